//! ADIME plan projection and the FHIR R4 NutritionOrder mapping.

mod fhir;
mod mapping;
mod plan;

pub use fhir::{
    map_to_fhir, map_to_fhir_with_trace, parse_frequency, validate_fhir, validate_fhir_value,
    Annotation, CodeableConcept, Coding, Extension, FhirNutritionOrder, FhirOptions, Meta,
    NutrientModifier, OralDiet, Quantity, Reference, SupplementOrder, Timing, TimingRepeat,
    ValidationFailure, ValidationReport, MANIFEST_TAG_SYSTEM, PRIORITY_EXTENSION_URL,
};
pub use mapping::{CodeMappingTable, MappingRow, REQUIRED_FIELDS};
pub use plan::{
    parse_draft_plan, Action, AdimePlan, Assessment, Diagnosis, DiagnosisEntry, Intervention,
    InterventionItem, MonitoringEntry, Supplement,
};

use thiserror::Error;

use crate::orchestrator::SynthesisBundle;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdimeError {
    /// A required section is missing; carries the lowercase section name.
    #[error("draft plan is missing the `{0}` section")]
    Parse(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("mapping error: {0}")]
    Mapping(String),
}

/// Parses the bundle's draft plan, ordering the diagnosis by the bundle's
/// ranked issue list.
pub fn project_adime(bundle: &SynthesisBundle) -> Result<AdimePlan, AdimeError> {
    parse_draft_plan(&bundle.patient_id, &bundle.draft_plan, &bundle.ranked)
}
