//! Multi-agent, guideline-grounded nutrition planning.
//!
//! A patient profile flows through isolated domain agents, conditional
//! specialist refinement, transparent priority scoring and a report stage
//! whose prompt carries hard drug-food constraints. The draft is projected
//! onto ADIME, verified against the constraint set and mapped to a FHIR R4
//! NutritionOrder.

pub mod adime;
pub mod config;
pub mod evaluation;
pub mod orchestrator;
pub mod planner;
pub mod priority;
pub mod profile;
pub mod retrieval;
pub mod safety;
pub mod synthetic;
pub mod text;

use serde::Serialize;

/// Pretty JSON with sorted object keys and a trailing newline. Every file
/// the pipeline writes goes through here so reruns are byte-identical.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("value serializes to JSON");
    let mut s = serde_json::to_string_pretty(&v).expect("JSON value serializes");
    s.push('\n');
    s
}
