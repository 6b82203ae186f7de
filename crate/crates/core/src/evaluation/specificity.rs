use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvaluationError;
use crate::adime::AdimePlan;
use crate::text::fold;

/// Phrases that mark a recommendation as generic. The shipped seed starts
/// from the two generic exemplars ("healthy foods", "more protein") and adds
/// a handful of equally vague phrasings.
pub const DEFAULT_GENERIC_TERMS: [&str; 12] = [
    "healthy food",
    "more protein",
    "balanced diet",
    "balanced meal",
    "healthy fat",
    "lean protein",
    "more fruit",
    "more vegetable",
    "whole food",
    "nutritious food",
    "variety of",
    "less processed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Specificity {
    Specific,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecificityLexicon {
    generic_terms: BTreeSet<String>,
}

impl Default for SpecificityLexicon {
    fn default() -> Self {
        Self::new(DEFAULT_GENERIC_TERMS)
    }
}

impl SpecificityLexicon {
    pub fn new<S: AsRef<str>>(terms: impl IntoIterator<Item = S>) -> Self {
        SpecificityLexicon {
            generic_terms: terms
                .into_iter()
                .map(|t| fold(t.as_ref()))
                .filter(|t| !t.is_empty())
                .collect(),
        }
    }

    /// One phrase per line; blank lines and `#` comments are skipped. The
    /// file extends the default seed.
    pub fn load(path: &Path) -> Result<Self, EvaluationError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| EvaluationError::Table(format!("{}: {e}", path.display())))?;
        let extra = raw.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        Ok(Self::new(DEFAULT_GENERIC_TERMS.iter().copied().chain(extra)))
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.generic_terms.iter().map(String::as_str)
    }
}

/// Generic iff the case-folded food contains any lexicon phrase.
pub fn classify_specificity(food: &str, lexicon: &SpecificityLexicon) -> Specificity {
    let f = fold(food);
    if lexicon.generic_terms.iter().any(|t| f.contains(t.as_str())) {
        Specificity::Generic
    } else {
        Specificity::Specific
    }
}

/// `1 - generic / total` over every intervention item in the plan set.
pub fn actionability_rate(plans: &[AdimePlan], lexicon: &SpecificityLexicon) -> Result<f64, EvaluationError> {
    let foods: Vec<&str> = plans.iter().flat_map(|p| p.recommended_foods()).collect();
    actionability_of(&foods, lexicon)
}

pub fn actionability_of(foods: &[&str], lexicon: &SpecificityLexicon) -> Result<f64, EvaluationError> {
    if foods.is_empty() {
        return Err(EvaluationError::EmptyInput("no intervention items".into()));
    }
    let generic = foods
        .iter()
        .filter(|f| classify_specificity(f, lexicon) == Specificity::Generic)
        .count();
    Ok(1.0 - generic as f64 / foods.len() as f64)
}
