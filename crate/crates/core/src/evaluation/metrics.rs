use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::foods::{FoodQualityTable, NutrientDB};
use super::stats::pearson;
use super::EvaluationError;
use crate::adime::AdimePlan;
use crate::profile::{Biomarker, FoodItem, Nutrient, NutrientVector, PatientProfile};

/// The five biomarker/nutrient pairs of the personalization analysis.
pub const CORRELATION_PAIRS: [(Biomarker, Nutrient); 5] = [
    (Biomarker::SystolicBp, Nutrient::Sodium),
    (Biomarker::Glucose, Nutrient::Sugars),
    (Biomarker::Hba1c, Nutrient::Sugars),
    (Biomarker::TotalCholesterol, Nutrient::Fat),
    (Biomarker::Bmi, Nutrient::Energy),
];

/// How one patient's recommended foods collapse into a single vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Sum,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Mean => "mean",
            Aggregation::Sum => "sum",
        }
    }

    pub fn apply(self, vectors: &[NutrientVector]) -> Option<NutrientVector> {
        let mean = NutrientVector::mean(vectors)?;
        Some(match self {
            Aggregation::Mean => mean,
            Aggregation::Sum => {
                let n = vectors.len() as f64;
                NutrientVector {
                    energy_kcal: mean.energy_kcal * n,
                    sodium_mg: mean.sodium_mg * n,
                    sugars_g: mean.sugars_g * n,
                    fat_g: mean.fat_g * n,
                    potassium_mg: mean.potassium_mg * n,
                    fiber_g: mean.fiber_g * n,
                }
            }
        })
    }
}

impl std::str::FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "sum" => Ok(Aggregation::Sum),
            other => Err(format!("unknown aggregation `{other}` (expected mean or sum)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub resolved: usize,
    pub total: usize,
}

impl Coverage {
    pub fn fraction(&self) -> Option<f64> {
        (self.total > 0).then(|| self.resolved as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub biomarker: Biomarker,
    pub nutrient: Nutrient,
    /// Patients contributing to this pair.
    pub n: usize,
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub na_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub aggregation: Aggregation,
    pub pairs: Vec<PairCorrelation>,
    pub coverage: Coverage,
}

impl CorrelationMatrix {
    pub fn pair(&self, b: Biomarker, n: Nutrient) -> Option<&PairCorrelation> {
        self.pairs.iter().find(|p| p.biomarker == b && p.nutrient == n)
    }
}

/// Resolves foods against the database, returning vectors and coverage.
fn resolve_foods(foods: &[&str], db: &NutrientDB) -> (Vec<NutrientVector>, Coverage) {
    let vectors: Vec<NutrientVector> = foods.iter().filter_map(|f| db.resolve(f)).map(|r| r.nutrients).collect();
    let cov = Coverage { resolved: vectors.len(), total: foods.len() };
    (vectors, cov)
}

/// Pearson r between each biomarker and the aggregated nutrient content of
/// the patient's recommended foods. Pairs that cannot be computed are NA
/// with a reason. Patients are sorted before the reduction so the result
/// does not depend on input order.
pub fn personalization_matrix(
    plans: &[(AdimePlan, PatientProfile)],
    db: &NutrientDB,
    aggregation: Aggregation,
) -> CorrelationMatrix {
    let mut coverage = Coverage::default();
    let mut per_patient: Vec<(&PatientProfile, NutrientVector)> = Vec::new();
    for (plan, profile) in plans {
        let (vectors, cov) = resolve_foods(&plan.recommended_foods(), db);
        coverage.resolved += cov.resolved;
        coverage.total += cov.total;
        if let Some(v) = aggregation.apply(&vectors) {
            per_patient.push((profile, v));
        }
    }
    let pairs = CORRELATION_PAIRS
        .iter()
        .map(|&(b, n)| {
            let mut points: Vec<(&str, f64, f64)> = per_patient
                .iter()
                .filter_map(|(p, v)| p.biomarker(b).map(|x| (p.patient_id.as_str(), x, v.get(n))))
                .collect();
            points.sort_by(|a, b| a.0.cmp(b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
            let xs: Vec<f64> = points.iter().map(|p| p.1).collect();
            let ys: Vec<f64> = points.iter().map(|p| p.2).collect();
            let (r, na_reason) = match pearson(&xs, &ys) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            PairCorrelation { biomarker: b, nutrient: n, n: points.len(), r, na_reason }
        })
        .collect();
    CorrelationMatrix { aggregation, pairs, coverage }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub nutrient: Nutrient,
    pub unit: String,
    pub before: f64,
    pub after: f64,
    /// `None` when the before-mean is zero.
    pub change_percent: Option<f64>,
    /// Change rounded to 0.1 percentage points, or `NA`.
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NutrientDelta {
    pub rows: Vec<DeltaRow>,
    pub before_coverage: Coverage,
    pub after_coverage: Coverage,
}

pub fn percent_change(before: f64, after: f64) -> Option<f64> {
    (before != 0.0).then(|| (after - before) / before * 100.0)
}

/// Per-nutrient change between two mean vectors.
pub fn delta_between(before: &NutrientVector, after: &NutrientVector) -> Vec<DeltaRow> {
    Nutrient::ALL
        .iter()
        .map(|&n| {
            let (b, a) = (before.get(n), after.get(n));
            let change = percent_change(b, a);
            DeltaRow {
                nutrient: n,
                unit: n.unit().to_string(),
                before: b,
                after: a,
                change_percent: change,
                display: change.map_or_else(|| "NA".to_string(), |c| format!("{c:+.1}%")),
            }
        })
        .collect()
}

/// Mean nutrient content of the original diet against the mean of the
/// recommended foods.
pub fn nutrient_delta(
    original: &[FoodItem],
    recommended: &[&str],
    db: &NutrientDB,
) -> Result<NutrientDelta, EvaluationError> {
    let before: Vec<NutrientVector> = original.iter().filter_map(|i| db.resolve_item(i)).collect();
    let before_coverage = Coverage { resolved: before.len(), total: original.len() };
    let (after, after_coverage) = resolve_foods(recommended, db);
    let before_mean = NutrientVector::mean(&before).ok_or(EvaluationError::EmptySide("original diet"))?;
    let after_mean = NutrientVector::mean(&after).ok_or(EvaluationError::EmptySide("recommended foods"))?;
    Ok(NutrientDelta { rows: delta_between(&before_mean, &after_mean), before_coverage, after_coverage })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanQuality {
    pub plan_id: String,
    pub mean: Option<f64>,
    pub coverage: Coverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualitySummary {
    pub per_plan: Vec<PlanQuality>,
    /// Mean over every resolved recommended item in the cohort.
    pub cohort_mean: f64,
    pub coverage: Coverage,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn food_quality_mean(
    plans: &[AdimePlan],
    table: &FoodQualityTable,
    db: &NutrientDB,
) -> Result<QualitySummary, EvaluationError> {
    let mut all = Vec::new();
    let mut coverage = Coverage::default();
    let mut per_plan = Vec::new();
    for plan in plans {
        let foods = plan.recommended_foods();
        let scores: Vec<f64> = foods
            .iter()
            .filter_map(|f| db.resolve(f))
            .filter_map(|r| table.score(&r.food_code))
            .collect();
        let cov = Coverage { resolved: scores.len(), total: foods.len() };
        coverage.resolved += cov.resolved;
        coverage.total += cov.total;
        per_plan.push(PlanQuality { plan_id: plan.plan_id.clone(), mean: mean(&scores), coverage: cov });
        all.extend(scores);
    }
    let cohort_mean = mean(&all).ok_or(EvaluationError::NoResolvedItems)?;
    Ok(QualitySummary { per_plan, cohort_mean, coverage })
}

/// Number of distinct food codes across all recommended foods.
pub fn diversity_count(plans: &[AdimePlan], db: &NutrientDB) -> usize {
    plans
        .iter()
        .flat_map(|p| p.recommended_foods())
        .filter_map(|f| db.resolve(f))
        .map(|r| r.food_code.as_str())
        .collect::<BTreeSet<_>>()
        .len()
}
