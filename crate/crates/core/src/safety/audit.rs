use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{extract_constraints, verify_plan, InteractionRuleBase, TermMatcher};
use crate::adime::AdimePlan;
use crate::profile::{DrugClass, MedicationEntry, PatientProfile};
use crate::retrieval::DrugLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub cohort: String,
    /// Plans with at least one concrete food item.
    pub evaluated: usize,
    /// Plans without food items; excluded from the rate.
    pub not_evaluated: usize,
    pub violations: usize,
    /// `violations / evaluated` as a percentage; `None` when nothing was
    /// evaluated.
    pub rate_percent: Option<f64>,
}

impl AuditRow {
    fn new(cohort: &str, evaluated: usize, not_evaluated: usize, violations: usize) -> Self {
        AuditRow {
            cohort: cohort.to_string(),
            evaluated,
            not_evaluated,
            violations,
            rate_percent: (evaluated > 0).then(|| violations as f64 / evaluated as f64 * 100.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditTable {
    pub rows: Vec<AuditRow>,
    pub overall: AuditRow,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl AuditTable {
    pub fn row(&self, cohort: DrugClass) -> Option<&AuditRow> {
        self.rows.iter().find(|r| r.cohort == cohort.as_str())
    }

    /// Fixed-width text table, one row per cohort plus the overall row.
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "{:<28} {:>6} {:>10} {:>8} {:>13}\n",
            "cohort", "N", "violations", "rate", "not_evaluated"
        );
        for r in self.rows.iter().chain(std::iter::once(&self.overall)) {
            let rate = r.rate_percent.map_or_else(|| "NA".to_string(), |v| format!("{v:.1}%"));
            out.push_str(&format!(
                "{:<28} {:>6} {:>10} {:>8} {:>13}\n",
                r.cohort, r.evaluated, r.violations, rate, r.not_evaluated
            ));
        }
        out.push_str("rate = violations / N (plans with at least one food item)\n");
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}

fn meds_in(profile: &PatientProfile, classes: &[DrugClass]) -> Vec<MedicationEntry> {
    profile
        .medications
        .iter()
        .filter(|m| m.drug_class.is_some_and(|c| classes.contains(&c)))
        .cloned()
        .collect()
}

/// Screens each plan against the rule-base (and optional label) constraints
/// for its patient's medications, then counts per interaction cohort.
///
/// A patient on drugs from several cohorts counts once in each of them and
/// once overall. Profiles must already carry drug classes.
pub fn audit_violation_rate(
    plans: &[(AdimePlan, PatientProfile)],
    rules: &InteractionRuleBase,
    labels: &[DrugLabel],
    epsilon: f64,
    matcher: &dyn TermMatcher,
) -> AuditTable {
    let mut rows = Vec::new();
    for cohort in DrugClass::COHORTS {
        let (mut ev, mut not_ev, mut viol) = (0, 0, 0);
        for (plan, profile) in plans {
            let meds = meds_in(profile, &[cohort]);
            if meds.is_empty() {
                continue;
            }
            let names: BTreeSet<&str> = meds.iter().map(|m| m.name.as_str()).collect();
            let own_labels: Vec<DrugLabel> =
                labels.iter().filter(|l| names.contains(l.drug_name.as_str())).cloned().collect();
            let c_safe = extract_constraints(None, &meds, &own_labels, rules);
            let report = verify_plan(plan, &c_safe, epsilon, matcher);
            if !report.evaluated {
                not_ev += 1;
                continue;
            }
            ev += 1;
            if !report.is_compliant() {
                viol += 1;
            }
        }
        rows.push(AuditRow::new(cohort.as_str(), ev, not_ev, viol));
    }

    let (mut ev, mut not_ev, mut viol) = (0, 0, 0);
    for (plan, profile) in plans {
        let meds = meds_in(profile, &DrugClass::COHORTS);
        if meds.is_empty() {
            continue;
        }
        let names: BTreeSet<&str> = meds.iter().map(|m| m.name.as_str()).collect();
        let own_labels: Vec<DrugLabel> =
            labels.iter().filter(|l| names.contains(l.drug_name.as_str())).cloned().collect();
        let report = verify_plan(plan, &extract_constraints(None, &meds, &own_labels, rules), epsilon, matcher);
        if !report.evaluated {
            not_ev += 1;
        } else {
            ev += 1;
            if !report.is_compliant() {
                viol += 1;
            }
        }
    }

    AuditTable {
        rows,
        overall: AuditRow::new("overall", ev, not_ev, viol),
        warnings: Vec::new(),
    }
}
