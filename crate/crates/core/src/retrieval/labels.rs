use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::RetrievalError;
use crate::profile::{normalize_medication_name, MedicationEntry};

pub const DEFAULT_FOOD_SECTION_PATTERNS: [&str; 3] = ["food", "drug interactions", "warnings"];

/// Shared record shape for label fixtures and normalized live responses:
/// a drug name plus named label sections.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub drug_name: String,
    pub sections: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrugLabel {
    pub drug_name: String,
    pub sections: BTreeMap<String, String>,
    pub food_interaction_sections: Vec<String>,
}

impl DrugLabel {
    pub fn from_record(record: LabelRecord, patterns: &[String]) -> Self {
        let mut label = DrugLabel {
            drug_name: normalize_medication_name(&record.drug_name),
            sections: record.sections,
            food_interaction_sections: Vec::new(),
        };
        label.food_interaction_sections = extract_food_sections(&label, patterns);
        label
    }

    /// Evidence reference used in insights and constraints.
    pub fn label_id(&self) -> String {
        format!("label:{}", self.drug_name)
    }
}

/// Text of every section whose name contains one of `patterns`
/// (case-insensitive), in section-name order.
pub fn extract_food_sections(label: &DrugLabel, patterns: &[String]) -> Vec<String> {
    let patterns: Vec<String> = patterns.iter().map(|p| p.to_lowercase()).collect();
    label
        .sections
        .iter()
        .filter(|(name, _)| {
            let name = name.to_lowercase();
            patterns.iter().any(|p| name.contains(p.as_str()))
        })
        .map(|(_, text)| text.clone())
        .collect()
}

pub trait LabelSource: Send + Sync {
    /// `Ok(None)` means the source answered and has no label for `drug`.
    fn lookup(&self, drug: &str) -> Result<Option<LabelRecord>, RetrievalError>;
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelFetch {
    pub labels: Vec<DrugLabel>,
    pub not_found: Vec<String>,
}

/// One label per resolvable medication, in input order; misses are listed in
/// `not_found` rather than failing the call.
pub fn fetch_drug_labels(
    meds: &[MedicationEntry],
    source: &dyn LabelSource,
    patterns: &[String],
) -> Result<LabelFetch, RetrievalError> {
    let mut out = LabelFetch::default();
    let mut seen = std::collections::BTreeSet::new();
    for m in meds {
        if !seen.insert(m.name.clone()) {
            continue;
        }
        match source.lookup(&m.name)? {
            Some(record) => out.labels.push(DrugLabel::from_record(record, patterns)),
            None => out.not_found.push(m.name.clone()),
        }
    }
    Ok(out)
}

/// Directory of `*.json` label records, loaded eagerly and keyed by
/// normalized drug name.
#[derive(Debug, Clone)]
pub struct FixtureLabelSource {
    records: BTreeMap<String, LabelRecord>,
}

impl FixtureLabelSource {
    pub fn open(dir: &Path) -> Result<Self, RetrievalError> {
        let unavailable = |e: std::io::Error| {
            RetrievalError::SourceUnavailable(format!("{}: {e}", dir.display()))
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(unavailable)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut records = BTreeMap::new();
        for p in paths {
            let raw = std::fs::read_to_string(&p).map_err(unavailable)?;
            let record: LabelRecord = serde_json::from_str(&raw).map_err(|e| {
                RetrievalError::SourceUnavailable(format!("{}: {e}", p.display()))
            })?;
            records.insert(normalize_medication_name(&record.drug_name), record);
        }
        Ok(FixtureLabelSource { records })
    }

    pub fn from_records(records: impl IntoIterator<Item = LabelRecord>) -> Self {
        FixtureLabelSource {
            records: records
                .into_iter()
                .map(|r| (normalize_medication_name(&r.drug_name), r))
                .collect(),
        }
    }
}

impl LabelSource for FixtureLabelSource {
    fn lookup(&self, drug: &str) -> Result<Option<LabelRecord>, RetrievalError> {
        Ok(self.records.get(&normalize_medication_name(drug)).cloned())
    }
}

/// Live client for the openFDA drug label endpoint.
///
/// `GET {base_url}/drug/label.json?search=openfda.generic_name:"<drug>"&limit=1`
/// (plus `api_key=` when configured). The first result's string-array fields
/// become sections, with underscores in field names replaced by spaces
/// (`drug_interactions` becomes `drug interactions`). A 404 is a miss.
pub struct OpenFdaLabelSource {
    agent: ureq::Agent,
    base_url: String,
    api_key: Option<String>,
}

#[derive(Deserialize)]
struct OpenFdaResponse {
    #[serde(default)]
    results: Vec<serde_json::Map<String, serde_json::Value>>,
}

const NON_SECTION_FIELDS: [&str; 5] = ["openfda", "id", "set_id", "effective_time", "version"];

impl OpenFdaLabelSource {
    pub fn new(base_url: &str, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        OpenFdaLabelSource {
            agent,
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
        }
    }

    /// Converts one openFDA result object into the shared record shape.
    pub fn record_from_result(
        drug: &str,
        result: &serde_json::Map<String, serde_json::Value>,
    ) -> LabelRecord {
        let mut sections = BTreeMap::new();
        for (key, value) in result {
            if NON_SECTION_FIELDS.contains(&key.as_str()) || key.ends_with("_table") {
                continue;
            }
            let Some(items) = value.as_array() else { continue };
            let texts: Vec<&str> = items.iter().filter_map(|v| v.as_str()).collect();
            if !texts.is_empty() {
                sections.insert(key.replace('_', " "), texts.join("\n"));
            }
        }
        LabelRecord {
            drug_name: drug.to_string(),
            sections,
        }
    }
}

impl LabelSource for OpenFdaLabelSource {
    fn lookup(&self, drug: &str) -> Result<Option<LabelRecord>, RetrievalError> {
        let mut req = self
            .agent
            .get(format!("{}/drug/label.json", self.base_url))
            .query("search", format!("openfda.generic_name:\"{drug}\""))
            .query("limit", "1");
        if let Some(key) = &self.api_key {
            req = req.query("api_key", key);
        }
        let mut resp = match req.call() {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(404)) => return Ok(None),
            Err(e) => return Err(RetrievalError::SourceUnavailable(e.to_string())),
        };
        let parsed: OpenFdaResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| RetrievalError::SourceUnavailable(e.to_string()))?;
        Ok(parsed
            .results
            .first()
            .map(|r| Self::record_from_result(drug, r)))
    }
}
