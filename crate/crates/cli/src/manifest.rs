use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatientStatus {
    Pending,
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub status: PatientStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// `manifest.json` at the root of a run directory. Written once before any
/// patient is planned and rewritten with outcomes at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_id: String,
    pub config_path: PathBuf,
    pub cohort_path: PathBuf,
    pub out_dir: PathBuf,
    pub backend_mode: String,
    pub started_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
    /// sha256 of every input that feeds the manifest id.
    pub content_hashes: BTreeMap<String, String>,
    pub cohort_hash: String,
    pub patients: Vec<PatientRecord>,
}

pub fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        let path = out_dir.join("manifest.json");
        std::fs::write(&path, nutriplan_core::canonical_json(self)).map_err(|e| CliError::io(&path, e))
    }

    pub fn failed(&self) -> impl Iterator<Item = &PatientRecord> {
        self.patients.iter().filter(|p| p.status == PatientStatus::Failed)
    }
}
