//! Drug–nutrient safety: building the hard-negative constraint set, rendering
//! it into the synthesis prompt, verifying finished plans against it and
//! auditing violation rates per medication cohort.

mod audit;
mod rules;
mod verify;

pub use audit::{audit_violation_rate, AuditRow, AuditTable};
pub use rules::{InteractionRule, InteractionRuleBase};
pub use verify::{verify_plan, ExactTokenMatcher, TermMatcher, ViolationHit, ViolationReport};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::orchestrator::AgentInsight;
use crate::profile::{DrugClass, MedicationEntry};
use crate::retrieval::DrugLabel;
use crate::text::{contains_token_run, normalize_term, term_tokens};

/// Header line of the rendered hard-negative block.
pub const NEGATIVE_BLOCK_HEADER: &str =
    "DO NOT RECOMMEND (hard safety constraints; never include these foods or exceed these limits):";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NutrientLimit {
    pub nutrient: String,
    pub max_amount: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyConstraint {
    pub drug: String,
    pub contraindicated_terms: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nutrient_limit: Option<NutrientLimit>,
    pub source_ref: String,
    #[serde(default)]
    pub mechanism_note: String,
}

impl SafetyConstraint {
    pub fn is_empty(&self) -> bool {
        self.contraindicated_terms.is_empty() && self.nutrient_limit.is_none()
    }
}

/// Constraints deduplicated on `(drug, term)`: the first constraint to name a
/// term for a drug keeps it, later ones lose it (and are dropped entirely if
/// nothing is left).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SafetyConstraintSet {
    constraints: Vec<SafetyConstraint>,
}

impl SafetyConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_constraints(cs: impl IntoIterator<Item = SafetyConstraint>) -> Self {
        let mut set = Self::new();
        cs.into_iter().for_each(|c| set.insert(c));
        set
    }

    pub fn insert(&mut self, mut c: SafetyConstraint) {
        c.drug = crate::profile::normalize_medication_name(&c.drug);
        let taken: BTreeSet<&str> = self
            .constraints
            .iter()
            .filter(|e| e.drug == c.drug)
            .flat_map(|e| e.contraindicated_terms.iter().map(String::as_str))
            .collect();
        let mut seen = BTreeSet::new();
        let terms: Vec<String> = c
            .contraindicated_terms
            .iter()
            .map(|t| normalize_term(t))
            .filter(|t| !t.is_empty() && !taken.contains(t.as_str()) && seen.insert(t.clone()))
            .collect();
        c.contraindicated_terms = terms;
        if let Some(l) = &c.nutrient_limit {
            let dup = self
                .constraints
                .iter()
                .any(|e| e.drug == c.drug && e.nutrient_limit.as_ref() == Some(l));
            if dup {
                c.nutrient_limit = None;
            }
        }
        if !c.is_empty() {
            self.constraints.push(c);
        }
    }

    pub fn constraints(&self) -> &[SafetyConstraint] {
        &self.constraints
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    /// All `(drug, term)` pairs.
    pub fn pairs(&self) -> BTreeSet<(String, String)> {
        self.constraints
            .iter()
            .flat_map(|c| c.contraindicated_terms.iter().map(|t| (c.drug.clone(), t.clone())))
            .collect()
    }
}

/// Union of (a) constraints the medication agent wrote in its CONSTRAINTS
/// block, (b) lexicon terms found inside each label's food-interaction
/// sections, attributed to the label, and (c) rule-base lexicons for every
/// classified medication. Deduplication keeps the earliest attribution, so a
/// term found in a label cites the label rather than the rule.
pub fn extract_constraints(
    med_insight: Option<&AgentInsight>,
    meds: &[MedicationEntry],
    labels: &[DrugLabel],
    rules: &InteractionRuleBase,
) -> SafetyConstraintSet {
    let mut set = SafetyConstraintSet::new();
    if let Some(insight) = med_insight {
        for c in &insight.extracted_constraints {
            set.insert(c.clone());
        }
    }

    let lexicon: Vec<(&str, Vec<String>)> =
        rules.lexicon().into_iter().map(|t| (t, term_tokens(t))).collect();
    for label in labels {
        let mut found = BTreeSet::new();
        for section in &label.food_interaction_sections {
            let tokens = term_tokens(section);
            for (term, term_toks) in &lexicon {
                if contains_token_run(&tokens, term_toks) {
                    found.insert(term.to_string());
                }
            }
        }
        if !found.is_empty() {
            set.insert(SafetyConstraint {
                drug: label.drug_name.clone(),
                contraindicated_terms: found.into_iter().collect(),
                nutrient_limit: None,
                source_ref: label.label_id(),
                mechanism_note: "named in the label's food/interaction sections".into(),
            });
        }
    }

    for m in meds {
        let class = m.drug_class.unwrap_or(DrugClass::Other);
        if class == DrugClass::Other {
            continue;
        }
        for rule in rules.rules_for(class) {
            set.insert(SafetyConstraint {
                drug: m.name.clone(),
                contraindicated_terms: rule.terms.clone(),
                nutrient_limit: None,
                source_ref: rule.id.clone(),
                mechanism_note: rule.mechanism.clone(),
            });
        }
    }
    set
}

/// Canonical prompt block: one line per drug, sorted by drug then term.
/// Insertion order never affects the output; an empty set renders as "".
pub fn render_negative_constraints(c_safe: &SafetyConstraintSet) -> String {
    #[derive(Default)]
    struct PerDrug {
        terms: BTreeSet<String>,
        limits: BTreeSet<String>,
        notes: BTreeSet<String>,
    }
    let mut by_drug: BTreeMap<&str, PerDrug> = BTreeMap::new();
    for c in c_safe.constraints() {
        let entry = by_drug.entry(c.drug.as_str()).or_default();
        entry.terms.extend(c.contraindicated_terms.iter().cloned());
        if let Some(l) = &c.nutrient_limit {
            entry.limits.insert(format!("{} <= {} {}", l.nutrient, l.max_amount, l.unit));
        }
        if !c.mechanism_note.trim().is_empty() {
            entry.notes.insert(c.mechanism_note.trim().to_string());
        }
    }
    if by_drug.is_empty() {
        return String::new();
    }
    let mut out = String::from(NEGATIVE_BLOCK_HEADER);
    out.push('\n');
    for (drug, d) in by_drug {
        out.push_str(&format!("- drug: {drug}"));
        if !d.terms.is_empty() {
            out.push_str(&format!(" | avoid: {}", d.terms.into_iter().collect::<Vec<_>>().join(", ")));
        }
        if !d.limits.is_empty() {
            out.push_str(&format!(" | limit: {}", d.limits.into_iter().collect::<Vec<_>>().join("; ")));
        }
        if !d.notes.is_empty() {
            out.push_str(&format!(" | mechanism: {}", d.notes.into_iter().collect::<Vec<_>>().join("; ")));
        }
        out.push('\n');
    }
    out
}
