//! Automated plan metrics: actionability from a specificity lexicon,
//! biomarker/nutrient personalization correlations, nutrient deltas against
//! the original diet, mean food-quality scores and food diversity.
//!
//! The lexicon is an automated proxy for dietitian annotation and the
//! report says so in its header.

mod foods;
mod metrics;
mod report;
mod specificity;
mod stats;

pub use foods::{FoodQualityTable, FoodRecord, NutrientDB};
pub use metrics::{
    delta_between, diversity_count, food_quality_mean, nutrient_delta, percent_change, personalization_matrix,
    Aggregation, CorrelationMatrix, Coverage, DeltaRow, NutrientDelta, PairCorrelation, PlanQuality, QualitySummary,
    CORRELATION_PAIRS,
};
pub use report::{evaluate_cohort, EvaluationInputs, EvaluationReport, Metric, PROXY_NOTE};
pub use specificity::{
    actionability_of, actionability_rate, classify_specificity, Specificity, SpecificityLexicon,
    DEFAULT_GENERIC_TERMS,
};
pub use stats::pearson;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvaluationError {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("zero variance in a series")]
    ZeroVariance,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no resolvable foods on the {0} side")]
    EmptySide(&'static str),
    #[error("no recommended food resolved to a quality score")]
    NoResolvedItems,
    #[error("table error: {0}")]
    Table(String),
}
