use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::foods::{FoodQualityTable, NutrientDB};
use super::metrics::{
    diversity_count, food_quality_mean, nutrient_delta, personalization_matrix, Aggregation, CorrelationMatrix,
    NutrientDelta, QualitySummary,
};
use super::specificity::{actionability_rate, SpecificityLexicon};
use crate::adime::AdimePlan;
use crate::profile::{FoodItem, PatientProfile};

pub const PROXY_NOTE: &str =
    "automated proxy metrics: specificity uses a fixed generic-term lexicon in place of dietitian annotation";

/// A metric value or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Metric<T> {
    Ok { value: T },
    Na { reason: String },
}

impl<T> Metric<T> {
    pub fn na(reason: impl Into<String>) -> Self {
        Metric::Na { reason: reason.into() }
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            Metric::Ok { value } => Some(value),
            Metric::Na { .. } => None,
        }
    }
}

impl<T, E: std::fmt::Display> From<Result<T, E>> for Metric<T> {
    fn from(r: Result<T, E>) -> Self {
        match r {
            Ok(value) => Metric::Ok { value },
            Err(e) => Metric::na(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub note: String,
    pub plans: usize,
    pub actionability: Metric<f64>,
    pub correlations: Metric<CorrelationMatrix>,
    pub nutrient_delta: Metric<NutrientDelta>,
    pub food_quality: Metric<QualitySummary>,
    pub diversity: Metric<usize>,
}

pub struct EvaluationInputs<'a> {
    pub plans: &'a [(AdimePlan, PatientProfile)],
    /// `Err` carries the reason the table is unavailable.
    pub db: Result<&'a NutrientDB, String>,
    pub quality: Result<&'a FoodQualityTable, String>,
    pub lexicon: &'a SpecificityLexicon,
    pub aggregation: Aggregation,
}

pub fn evaluate_cohort(input: &EvaluationInputs) -> EvaluationReport {
    let plans: Vec<AdimePlan> = input.plans.iter().map(|(p, _)| p.clone()).collect();
    let na_db = |what: &str| format!("{what} needs the nutrient database: {}", input.db.as_ref().err().unwrap());
    let correlations = match input.db {
        Ok(db) => Metric::Ok { value: personalization_matrix(input.plans, db, input.aggregation) },
        Err(_) => Metric::na(na_db("correlation")),
    };
    let delta = match input.db {
        Ok(db) => {
            let original: Vec<FoodItem> =
                input.plans.iter().flat_map(|(_, p)| p.dietary_history.items.clone()).collect();
            let recommended: Vec<&str> = plans.iter().flat_map(|p| p.recommended_foods()).collect();
            nutrient_delta(&original, &recommended, db).into()
        }
        Err(_) => Metric::na(na_db("nutrient delta")),
    };
    let food_quality = match (&input.db, &input.quality) {
        (Ok(db), Ok(table)) => food_quality_mean(&plans, table, db).into(),
        (Err(_), _) => Metric::na(na_db("food quality")),
        (_, Err(reason)) => Metric::na(format!("quality table unavailable: {reason}")),
    };
    let diversity = match input.db {
        Ok(db) => Metric::Ok { value: diversity_count(&plans, db) },
        Err(_) => Metric::na(na_db("diversity")),
    };
    EvaluationReport {
        note: PROXY_NOTE.to_string(),
        plans: plans.len(),
        actionability: actionability_rate(&plans, input.lexicon).into(),
        correlations,
        nutrient_delta: delta,
        food_quality,
        diversity,
    }
}

impl EvaluationReport {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# evaluation ({} plans)", self.plans);
        let _ = writeln!(s, "# {}", self.note);
        match &self.actionability {
            Metric::Ok { value } => {
                let _ = writeln!(s, "actionability: {:.4}", value);
            }
            Metric::Na { reason } => {
                let _ = writeln!(s, "actionability: NA ({reason})");
            }
        }
        s.push_str("\ncorrelations\n");
        match &self.correlations {
            Metric::Ok { value } => {
                let _ = writeln!(
                    s,
                    "  aggregation: {}; foods resolved {}/{}",
                    value.aggregation.as_str(), value.coverage.resolved, value.coverage.total
                );
                for p in &value.pairs {
                    let r = match (p.r, &p.na_reason) {
                        (Some(r), _) => format!("{r:+.4}"),
                        (None, Some(why)) => format!("NA ({why})"),
                        (None, None) => "NA".to_string(),
                    };
                    let _ = writeln!(s, "  {:<18} vs {:<8} n={:<4} r={}", p.biomarker.name(), p.nutrient.name(), p.n, r);
                }
            }
            Metric::Na { reason } => {
                let _ = writeln!(s, "  NA ({reason})");
            }
        }
        s.push_str("\nnutrient delta (mean per food, before -> after)\n");
        match &self.nutrient_delta {
            Metric::Ok { value } => {
                let _ = writeln!(
                    s,
                    "  original items resolved {}/{}; recommended items resolved {}/{}",
                    value.before_coverage.resolved,
                    value.before_coverage.total,
                    value.after_coverage.resolved,
                    value.after_coverage.total
                );
                for r in &value.rows {
                    let _ = writeln!(
                        s,
                        "  {:<10} {:>9.2} -> {:>9.2} {:<4} {}",
                        r.nutrient.name(),
                        r.before,
                        r.after,
                        r.unit,
                        r.display
                    );
                }
            }
            Metric::Na { reason } => {
                let _ = writeln!(s, "  NA ({reason})");
            }
        }
        s.push_str("\nfood quality\n");
        match &self.food_quality {
            Metric::Ok { value } => {
                let _ = writeln!(
                    s,
                    "  cohort mean {:.2}; items resolved {}/{}",
                    value.cohort_mean, value.coverage.resolved, value.coverage.total
                );
                for p in &value.per_plan {
                    let m = p.mean.map_or_else(|| "NA".to_string(), |m| format!("{m:.2}"));
                    let _ = writeln!(s, "  {:<24} {}", p.plan_id, m);
                }
            }
            Metric::Na { reason } => {
                let _ = writeln!(s, "  NA ({reason})");
            }
        }
        match &self.diversity {
            Metric::Ok { value } => {
                let _ = writeln!(s, "\ndiversity: {value} unique food codes");
            }
            Metric::Na { reason } => {
                let _ = writeln!(s, "\ndiversity: NA ({reason})");
            }
        }
        s
    }
}
