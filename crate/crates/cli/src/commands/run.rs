use std::path::{Path, PathBuf};

use chrono::Utc;
use nutriplan_core::config::{BackendMode, Config};
use nutriplan_core::planner::Planner;
use nutriplan_core::profile::{parse_cohort, PatientProfile};
use nutriplan_core::text::sha256_hex;
use rayon::prelude::*;

use crate::error::CliError;
use crate::manifest::{timestamp, PatientRecord, PatientStatus, RunManifest};

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub config: PathBuf,
    pub cohort: PathBuf,
    pub out: PathBuf,
    pub backend: Option<BackendMode>,
}

pub fn load_planner(config: &Path, backend: Option<BackendMode>) -> Result<Planner, CliError> {
    let loaded = Config::load(config)?;
    Ok(Planner::from_config(&loaded, backend)?)
}

pub fn read_cohort(path: &Path) -> Result<(Vec<PatientProfile>, String), CliError> {
    let raw = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    let cohort = parse_cohort(&raw).map_err(|e| CliError::input(path, e))?;
    Ok((cohort, sha256_hex(raw)))
}

/// Plans every patient into `out/<patient_id>/`. One patient's failure
/// does not stop the others; the manifest lists every outcome.
pub fn run_with(planner: &Planner, args: &RunArgs) -> Result<RunManifest, CliError> {
    let (cohort, cohort_hash) = read_cohort(&args.cohort)?;
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;

    let mut manifest = RunManifest {
        manifest_id: planner.manifest_id().to_string(),
        config_path: args.config.clone(),
        cohort_path: args.cohort.clone(),
        out_dir: args.out.clone(),
        backend_mode: planner.mode().as_str().to_string(),
        started_at: timestamp(Utc::now()),
        finished_at: None,
        content_hashes: planner.content_hashes().clone(),
        cohort_hash,
        patients: cohort
            .iter()
            .map(|p| PatientRecord { patient_id: p.patient_id.clone(), status: PatientStatus::Pending, error: None })
            .collect(),
    };
    manifest.write(&args.out)?;
    if cohort.is_empty() {
        log::warn!("cohort {} is empty; nothing to plan", args.cohort.display());
    }

    let outcomes: Vec<Result<(), String>> = cohort
        .par_iter()
        .map(|p| {
            let out = planner.plan_patient(p).map_err(|e| e.to_string())?;
            let dir = args.out.join(&p.patient_id);
            out.write_to(&dir).map_err(|e| format!("cannot write {}: {e}", dir.display()))
        })
        .collect();

    for (rec, outcome) in manifest.patients.iter_mut().zip(outcomes) {
        match outcome {
            Ok(()) => rec.status = PatientStatus::Ok,
            Err(e) => {
                rec.status = PatientStatus::Failed;
                rec.error = Some(e);
            }
        }
    }
    manifest.finished_at = Some(timestamp(Utc::now()));
    manifest.write(&args.out)?;
    Ok(manifest)
}

pub fn failure_table(manifest: &RunManifest) -> String {
    let failed: Vec<&PatientRecord> = manifest.failed().collect();
    let width = failed.iter().map(|r| r.patient_id.len()).max().unwrap_or(0).max("patient".len());
    let mut s = format!("{:<width$}  error\n", "patient");
    for r in failed {
        s.push_str(&format!("{:<width$}  {}\n", r.patient_id, r.error.as_deref().unwrap_or("")));
    }
    s
}

pub fn cmd_run(args: &RunArgs) -> Result<RunManifest, CliError> {
    let planner = load_planner(&args.config, args.backend)?;
    let manifest = run_with(&planner, args)?;
    let total = manifest.patients.len();
    let failed = manifest.failed().count();
    log::info!("planned {} of {total} patient(s) into {}", total - failed, args.out.display());
    if failed > 0 {
        eprint!("{}", failure_table(&manifest));
        return Err(CliError::PatientFailures { failed, total });
    }
    Ok(manifest)
}
