mod audit;
mod evaluate;
mod run;
mod serve;
mod synth;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nutriplan_core::adime::AdimePlan;
use nutriplan_core::planner::PlanDocument;
use nutriplan_core::profile::PatientProfile;
use walkdir::WalkDir;

use crate::error::CliError;

pub use audit::{cmd_audit, AuditArgs, AuditOutput};
pub use evaluate::{cmd_evaluate, EvaluateArgs};
pub use run::{cmd_run, failure_table, load_planner, read_cohort, run_with, RunArgs};
pub use serve::{cmd_serve, router, ServeArgs, ServeResponse};
pub use synth::{cmd_synth, SynthArgs};

/// Every `plan.json` under `dir`, in path order. Accepts the plan documents
/// `run` writes as well as bare plans.
pub fn load_plans(dir: &Path) -> Result<Vec<(PathBuf, AdimePlan)>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::input(dir, "plans directory not found"));
    }
    let mut out = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::input(dir, e))?;
        if !entry.file_type().is_file() || entry.file_name() != "plan.json" {
            continue;
        }
        let path = entry.path();
        let raw = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
        let plan = match serde_json::from_str::<PlanDocument>(&raw) {
            Ok(doc) => doc.plan,
            Err(_) => serde_json::from_str::<AdimePlan>(&raw).map_err(|e| CliError::input(path, e))?,
        };
        out.push((path.to_path_buf(), plan));
    }
    Ok(out)
}

/// Joins plans to profiles by patient id. Unmatched ids on either side
/// become warnings.
pub fn pair_with_cohort(
    plans: Vec<(PathBuf, AdimePlan)>,
    cohort: &[PatientProfile],
) -> (Vec<(AdimePlan, PatientProfile)>, Vec<String>) {
    let by_id: BTreeMap<&str, &PatientProfile> = cohort.iter().map(|p| (p.patient_id.as_str(), p)).collect();
    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (path, plan) in plans {
        match by_id.get(plan.patient_id.as_str()) {
            Some(p) if seen.insert(plan.patient_id.clone()) => pairs.push((plan, (*p).clone())),
            Some(_) => warnings.push(format!("{}: duplicate plan for patient `{}` skipped", path.display(), plan.patient_id)),
            None => warnings.push(format!("{}: patient `{}` is not in the cohort", path.display(), plan.patient_id)),
        }
    }
    for p in cohort {
        if !seen.contains(&p.patient_id) {
            warnings.push(format!("patient `{}` has no plan", p.patient_id));
        }
    }
    (pairs, warnings)
}
