use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AdimeError;

/// The nine internal fields every mapping table must cover.
pub const REQUIRED_FIELDS: [&str; 9] = [
    "hypertension_diet",
    "diabetes_diet",
    "nutrient_flags.sodium",
    "nutrient_flags.limit_val",
    "intervention.replace",
    "intervention.add",
    "medication.supplement",
    "health_priority.rank",
    "monitoring.frequency",
];

/// One mapping rule. An empty `value` matches any value of the field; an
/// empty `code` means the code is derived from the plan value itself (food
/// and supplement names, UCUM units).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingRow {
    pub internal_field: String,
    #[serde(default)]
    pub value: String,
    pub adime_stage: String,
    pub fhir_path: String,
    pub system: String,
    #[serde(default)]
    pub code: String,
    #[serde(default)]
    pub display: String,
    /// Codes not taken from a published terminology.
    #[serde(default)]
    pub placeholder: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeMappingTable {
    pub rows: Vec<MappingRow>,
}

impl CodeMappingTable {
    pub fn new(rows: Vec<MappingRow>) -> Result<Self, AdimeError> {
        let table = CodeMappingTable { rows };
        let missing = table.missing_required_fields();
        if !missing.is_empty() {
            return Err(AdimeError::Mapping(format!(
                "mapping table lacks rows for {}",
                missing.join(", ")
            )));
        }
        let mut seen = BTreeSet::new();
        for r in &table.rows {
            if r.system.trim().is_empty() {
                return Err(AdimeError::Mapping(format!("row `{}` has no system", r.internal_field)));
            }
            if !seen.insert((r.internal_field.clone(), r.value.to_lowercase())) {
                return Err(AdimeError::Mapping(format!(
                    "duplicate row `{}` / `{}`",
                    r.internal_field, r.value
                )));
            }
        }
        Ok(table)
    }

    /// Reads a CSV file with header
    /// `internal_field,value,adime_stage,fhir_path,system,code,display,placeholder`.
    pub fn from_csv(raw: &str) -> Result<Self, AdimeError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(raw.as_bytes());
        let rows = rdr
            .deserialize()
            .collect::<Result<Vec<MappingRow>, _>>()
            .map_err(|e| AdimeError::Mapping(format!("mapping table: {e}")))?;
        Self::new(rows)
    }

    pub fn load(path: &Path) -> Result<Self, AdimeError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| AdimeError::Mapping(format!("{}: {e}", path.display())))?;
        Self::from_csv(&raw)
    }

    pub fn missing_required_fields(&self) -> Vec<&'static str> {
        REQUIRED_FIELDS
            .iter()
            .copied()
            .filter(|f| !self.rows.iter().any(|r| r.internal_field == *f))
            .collect()
    }

    /// Row for `field` whose value equals `value` (case-insensitive), falling
    /// back to the field's wildcard row.
    pub fn lookup(&self, field: &str, value: &str) -> Option<&MappingRow> {
        let rows = || self.rows.iter().filter(move |r| r.internal_field == field);
        rows()
            .find(|r| !r.value.is_empty() && r.value.eq_ignore_ascii_case(value))
            .or_else(|| rows().find(|r| r.value.is_empty()))
    }

    pub fn require(&self, field: &str, value: &str) -> Result<&MappingRow, AdimeError> {
        self.lookup(field, value).ok_or_else(|| {
            if value.is_empty() {
                AdimeError::Mapping(format!("no mapping row for `{field}`"))
            } else {
                AdimeError::Mapping(format!("no mapping row for `{field}` = `{value}`"))
            }
        })
    }
}
