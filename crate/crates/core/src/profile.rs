//! Patient input state: anthropometrics, biomarkers, medications, dietary
//! history and sociodemographics.
//!
//! Profiles arrive as JSON documents (one per patient, or an array of them for
//! a cohort). Parsing is two-phase: the document is deserialized into a loose
//! wire shape, then validated into a [`PatientProfile`] whose invariants hold
//! for the rest of the pipeline.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest allowed gap between a supplied BMI and weight / height².
pub const BMI_INPUT_TOLERANCE: f64 = 1e-3;

const REQUIRED_GROUPS: [&str; 6] = [
    "patient_id",
    "anthropometrics",
    "biomarkers",
    "medications",
    "dietary_history",
    "sociodemographics",
];

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ProfileError {
    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        ProfileError::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Field path for validation errors.
    pub fn path(&self) -> Option<&str> {
        match self {
            ProfileError::Validation { path, .. } => Some(path),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientProfile {
    pub patient_id: String,
    pub anthropometrics: Anthropometrics,
    pub biomarkers: Biomarkers,
    pub medications: Vec<MedicationEntry>,
    pub dietary_history: DietaryRecord,
    pub sociodemographics: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Anthropometrics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_kg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bmi: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Biomarkers {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub systolic_bp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glucose: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hba1c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_cholesterol: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, f64>,
}

/// Biomarkers used by the personalization analysis, plus BMI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Biomarker {
    SystolicBp,
    Glucose,
    Hba1c,
    TotalCholesterol,
    Bmi,
}

impl Biomarker {
    pub fn name(self) -> &'static str {
        match self {
            Biomarker::SystolicBp => "systolic_bp",
            Biomarker::Glucose => "glucose",
            Biomarker::Hba1c => "hba1c",
            Biomarker::TotalCholesterol => "total_cholesterol",
            Biomarker::Bmi => "bmi",
        }
    }
}

impl PatientProfile {
    pub fn biomarker(&self, which: Biomarker) -> Option<f64> {
        match which {
            Biomarker::SystolicBp => self.biomarkers.systolic_bp,
            Biomarker::Glucose => self.biomarkers.glucose,
            Biomarker::Hba1c => self.biomarkers.hba1c,
            Biomarker::TotalCholesterol => self.biomarkers.total_cholesterol,
            Biomarker::Bmi => self.anthropometrics.bmi,
        }
    }

    pub fn drug_classes(&self) -> BTreeSet<DrugClass> {
        self.medications.iter().filter_map(|m| m.drug_class).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrugClass {
    Warfarin,
    PotassiumSparingDiuretic,
    Statin,
    Other,
}

impl DrugClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DrugClass::Warfarin => "warfarin",
            DrugClass::PotassiumSparingDiuretic => "potassium_sparing_diuretic",
            DrugClass::Statin => "statin",
            DrugClass::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "warfarin" => Some(DrugClass::Warfarin),
            "potassium_sparing_diuretic" => Some(DrugClass::PotassiumSparingDiuretic),
            "statin" => Some(DrugClass::Statin),
            "other" => Some(DrugClass::Other),
            _ => None,
        }
    }

    /// The three interaction cohorts, in reporting order.
    pub const COHORTS: [DrugClass; 3] = [
        DrugClass::Warfarin,
        DrugClass::PotassiumSparingDiuretic,
        DrugClass::Statin,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MedicationEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drug_class: Option<DrugClass>,
}

impl MedicationEntry {
    /// Builds an entry with a normalized name. Returns `None` when nothing is
    /// left after normalization.
    pub fn new(raw_name: &str) -> Option<Self> {
        let name = normalize_medication_name(raw_name);
        (!name.is_empty()).then_some(MedicationEntry {
            name,
            drug_class: None,
        })
    }
}

fn dosage_suffix() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // first whitespace-separated token that starts with a digit, and everything after it
    RE.get_or_init(|| Regex::new(r"\s+[0-9][^\s]*(\s.*)?$").expect("static regex"))
}

/// Case-folds, trims and strips a trailing dosage (`"Warfarin 5mg"` becomes
/// `"warfarin"`, `"Metformin 500 mg twice daily"` becomes `"metformin"`).
pub fn normalize_medication_name(raw: &str) -> String {
    let folded = crate::text::fold(raw);
    dosage_suffix().replace(&folded, "").trim().to_string()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NutrientVector {
    pub energy_kcal: f64,
    pub sodium_mg: f64,
    pub sugars_g: f64,
    pub fat_g: f64,
    pub potassium_mg: f64,
    pub fiber_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nutrient {
    Energy,
    Sodium,
    Sugars,
    Fat,
    Potassium,
    Fiber,
}

impl Nutrient {
    pub const ALL: [Nutrient; 6] = [
        Nutrient::Energy,
        Nutrient::Sodium,
        Nutrient::Sugars,
        Nutrient::Fat,
        Nutrient::Potassium,
        Nutrient::Fiber,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Nutrient::Energy => "energy",
            Nutrient::Sodium => "sodium",
            Nutrient::Sugars => "sugars",
            Nutrient::Fat => "fat",
            Nutrient::Potassium => "potassium",
            Nutrient::Fiber => "fiber",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Nutrient::Energy => "kcal",
            Nutrient::Sodium | Nutrient::Potassium => "mg",
            Nutrient::Sugars | Nutrient::Fat | Nutrient::Fiber => "g",
        }
    }
}

impl NutrientVector {
    pub fn get(&self, n: Nutrient) -> f64 {
        match n {
            Nutrient::Energy => self.energy_kcal,
            Nutrient::Sodium => self.sodium_mg,
            Nutrient::Sugars => self.sugars_g,
            Nutrient::Fat => self.fat_g,
            Nutrient::Potassium => self.potassium_mg,
            Nutrient::Fiber => self.fiber_g,
        }
    }

    fn fields(&self) -> [(&'static str, f64); 6] {
        [
            ("energy_kcal", self.energy_kcal),
            ("sodium_mg", self.sodium_mg),
            ("sugars_g", self.sugars_g),
            ("fat_g", self.fat_g),
            ("potassium_mg", self.potassium_mg),
            ("fiber_g", self.fiber_g),
        ]
    }

    /// Component-wise arithmetic mean; `None` for an empty slice.
    pub fn mean(vectors: &[NutrientVector]) -> Option<NutrientVector> {
        if vectors.is_empty() {
            return None;
        }
        let n = vectors.len() as f64;
        let mut acc = NutrientVector::default();
        for v in vectors {
            acc.energy_kcal += v.energy_kcal;
            acc.sodium_mg += v.sodium_mg;
            acc.sugars_g += v.sugars_g;
            acc.fat_g += v.fat_g;
            acc.potassium_mg += v.potassium_mg;
            acc.fiber_g += v.fiber_g;
        }
        Some(NutrientVector {
            energy_kcal: acc.energy_kcal / n,
            sodium_mg: acc.sodium_mg / n,
            sugars_g: acc.sugars_g / n,
            fat_g: acc.fat_g / n,
            potassium_mg: acc.potassium_mg / n,
            fiber_g: acc.fiber_g / n,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DietaryRecord {
    pub items: Vec<FoodItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodItem {
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub food_code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nutrients: Option<NutrientVector>,
}

// ---- wire shape ---------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    patient_id: String,
    anthropometrics: Anthropometrics,
    biomarkers: Biomarkers,
    medications: Vec<RawMedication>,
    dietary_history: DietaryRecord,
    sociodemographics: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawMedication {
    Name(String),
    Entry {
        name: String,
        #[serde(default)]
        drug_class: Option<DrugClass>,
    },
}

/// Parses and validates one patient-profile document.
pub fn parse_profile(raw: &str) -> Result<PatientProfile, ProfileError> {
    let value: serde_json::Value =
        serde_json::from_str(raw).map_err(|e| ProfileError::Syntax(e.to_string()))?;
    profile_from_value(value, "")
}

/// Parses a cohort document (a JSON array of profiles). Patient ids must be
/// unique.
pub fn parse_cohort(raw: &str) -> Result<Vec<PatientProfile>, ProfileError> {
    let value: serde_json::Value =
        serde_json::from_str(raw).map_err(|e| ProfileError::Syntax(e.to_string()))?;
    let serde_json::Value::Array(docs) = value else {
        return Err(ProfileError::invalid("", "cohort file must be an array of profiles"));
    };
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(docs.len());
    for (i, doc) in docs.into_iter().enumerate() {
        let p = profile_from_value(doc, &format!("[{i}]."))?;
        if !seen.insert(p.patient_id.clone()) {
            return Err(ProfileError::invalid(
                format!("[{i}].patient_id"),
                format!("duplicate patient_id `{}`", p.patient_id),
            ));
        }
        out.push(p);
    }
    Ok(out)
}

pub fn load_cohort(path: &Path) -> Result<Vec<PatientProfile>, ProfileError> {
    let raw = std::fs::read_to_string(path).map_err(|source| ProfileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_cohort(&raw)
}

fn profile_from_value(value: serde_json::Value, prefix: &str) -> Result<PatientProfile, ProfileError> {
    let Some(obj) = value.as_object() else {
        return Err(ProfileError::invalid(prefix.trim_end_matches('.'), "profile must be an object"));
    };
    for key in REQUIRED_GROUPS {
        if !obj.contains_key(key) {
            return Err(ProfileError::invalid(format!("{prefix}{key}"), "required field missing"));
        }
    }
    let raw: RawProfile = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ProfileError::invalid(format!("{prefix}{path}"), e.inner().to_string())
    })?;
    validate(raw).map_err(|e| match e {
        ProfileError::Validation { path, message } => ProfileError::Validation {
            path: format!("{prefix}{path}"),
            message,
        },
        other => other,
    })
}

fn check_positive(path: &str, v: Option<f64>) -> Result<(), ProfileError> {
    match v {
        Some(x) if !(x.is_finite() && x > 0.0) => Err(ProfileError::invalid(
            path,
            format!("must be a finite positive number, got {x}"),
        )),
        _ => Ok(()),
    }
}

fn validate(raw: RawProfile) -> Result<PatientProfile, ProfileError> {
    let patient_id = raw.patient_id.trim().to_string();
    if patient_id.is_empty() {
        return Err(ProfileError::invalid("patient_id", "must be non-empty"));
    }

    let mut anthropometrics = raw.anthropometrics;
    check_positive("anthropometrics.height_m", anthropometrics.height_m)?;
    check_positive("anthropometrics.weight_kg", anthropometrics.weight_kg)?;
    check_positive("anthropometrics.bmi", anthropometrics.bmi)?;
    if let (Some(h), Some(w)) = (anthropometrics.height_m, anthropometrics.weight_kg) {
        let derived = w / (h * h);
        if let Some(given) = anthropometrics.bmi {
            if (given - derived).abs() > BMI_INPUT_TOLERANCE {
                return Err(ProfileError::invalid(
                    "anthropometrics.bmi",
                    format!("bmi {given} inconsistent with weight/height² = {derived:.6}"),
                ));
            }
        }
        anthropometrics.bmi = Some(derived);
    }

    let b = &raw.biomarkers;
    check_positive("biomarkers.systolic_bp", b.systolic_bp)?;
    check_positive("biomarkers.glucose", b.glucose)?;
    check_positive("biomarkers.hba1c", b.hba1c)?;
    check_positive("biomarkers.total_cholesterol", b.total_cholesterol)?;
    for (k, v) in &b.extras {
        check_positive(&format!("biomarkers.extras.{k}"), Some(*v))?;
    }

    let mut medications = Vec::with_capacity(raw.medications.len());
    for (i, m) in raw.medications.into_iter().enumerate() {
        let (name, class) = match m {
            RawMedication::Name(n) => (n, None),
            RawMedication::Entry { name, drug_class } => (name, drug_class),
        };
        let mut entry = MedicationEntry::new(&name).ok_or_else(|| {
            ProfileError::invalid(format!("medications[{i}].name"), "empty after normalization")
        })?;
        entry.drug_class = class;
        medications.push(entry);
    }

    for (i, item) in raw.dietary_history.items.iter().enumerate() {
        if item.description.trim().is_empty() {
            return Err(ProfileError::invalid(
                format!("dietary_history.items[{i}].description"),
                "must be non-empty",
            ));
        }
        if let Some(n) = &item.nutrients {
            for (field, v) in n.fields() {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(ProfileError::invalid(
                        format!("dietary_history.items[{i}].nutrients.{field}"),
                        format!("must be non-negative, got {v}"),
                    ));
                }
            }
        }
    }

    Ok(PatientProfile {
        patient_id,
        anthropometrics,
        biomarkers: raw.biomarkers,
        medications,
        dietary_history: raw.dietary_history,
        sociodemographics: raw.sociodemographics,
    })
}

pub fn serialize_profile(p: &PatientProfile) -> String {
    serde_json::to_string_pretty(p).expect("profile serializes")
}

/// Normalized medication name to class.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MedicationClassTable {
    pub classes: BTreeMap<String, DrugClass>,
}

impl MedicationClassTable {
    pub fn from_toml(raw: &str) -> Result<Self, toml::de::Error> {
        let mut t: MedicationClassTable = toml::from_str(raw)?;
        t.classes = t
            .classes
            .into_iter()
            .map(|(k, v)| (normalize_medication_name(&k), v))
            .collect();
        Ok(t)
    }

    pub fn lookup(&self, name: &str) -> DrugClass {
        self.classes
            .get(&normalize_medication_name(name))
            .copied()
            .unwrap_or(DrugClass::Other)
    }
}

/// Fills in every entry's class from the table. A class given explicitly in
/// the profile (other than `other`) is kept; names missing from the table
/// become [`DrugClass::Other`].
pub fn classify_medications(
    meds: &[MedicationEntry],
    table: &MedicationClassTable,
) -> Vec<MedicationEntry> {
    meds.iter()
        .map(|m| MedicationEntry {
            name: normalize_medication_name(&m.name),
            drug_class: Some(match m.drug_class {
                Some(c) if c != DrugClass::Other => c,
                _ => table.lookup(&m.name),
            }),
        })
        .collect()
}
