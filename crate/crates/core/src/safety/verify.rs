use serde::{Deserialize, Serialize};

use super::SafetyConstraintSet;
use crate::adime::AdimePlan;
use crate::text::{contains_token_run, term_tokens};

/// Similarity between a plan food string and a contraindicated term, in
/// `[0, 1]`.
pub trait TermMatcher: Send + Sync {
    fn similarity(&self, food: &str, term: &str) -> f64;
}

/// 1.0 when the term's tokens occur as a contiguous run in the food's tokens
/// (after case folding and plural stripping), else 0.0.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactTokenMatcher;

impl TermMatcher for ExactTokenMatcher {
    fn similarity(&self, food: &str, term: &str) -> f64 {
        if contains_token_run(&term_tokens(food), &term_tokens(term)) {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ViolationHit {
    pub food: String,
    pub term: String,
    pub drug: String,
    pub source_ref: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub plan_id: String,
    pub hits: Vec<ViolationHit>,
    /// False when the plan contained no concrete food items.
    pub evaluated: bool,
}

impl ViolationReport {
    pub fn is_compliant(&self) -> bool {
        self.hits.is_empty()
    }
}

/// Records every (recommended food, contraindicated term) pair whose
/// similarity reaches `epsilon`. Replaced foods are being removed from the
/// diet, so only the foods the plan tells the patient to eat are checked.
pub fn verify_plan(
    plan: &AdimePlan,
    c_safe: &SafetyConstraintSet,
    epsilon: f64,
    matcher: &dyn TermMatcher,
) -> ViolationReport {
    let mut hits = Vec::new();
    for food in plan.recommended_foods() {
        for c in c_safe.constraints() {
            for term in &c.contraindicated_terms {
                if matcher.similarity(food, term) >= epsilon {
                    hits.push(ViolationHit {
                        food: food.to_string(),
                        term: term.clone(),
                        drug: c.drug.clone(),
                        source_ref: c.source_ref.clone(),
                    });
                }
            }
        }
    }
    hits.sort();
    hits.dedup();
    ViolationReport {
        plan_id: plan.plan_id.clone(),
        hits,
        evaluated: plan.has_food_items(),
    }
}
