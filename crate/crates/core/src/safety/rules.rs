use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::profile::DrugClass;
use crate::text::normalize_term;

/// One drug-class contraindication lexicon with its citation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRule {
    pub id: String,
    pub drug_class: DrugClass,
    pub terms: Vec<String>,
    #[serde(default)]
    pub mechanism: String,
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InteractionRuleBase {
    pub rules: Vec<InteractionRule>,
}

impl InteractionRuleBase {
    /// Builds a rule base, normalizing every term to lowercase singular form
    /// and dropping duplicates within a rule.
    pub fn new(rules: Vec<InteractionRule>) -> Self {
        let rules = rules
            .into_iter()
            .map(|mut r| {
                let mut seen = BTreeSet::new();
                r.terms = r
                    .terms
                    .iter()
                    .map(|t| normalize_term(t))
                    .filter(|t| !t.is_empty() && seen.insert(t.clone()))
                    .collect();
                r
            })
            .collect();
        InteractionRuleBase { rules }
    }

    pub fn from_toml(raw: &str) -> Result<Self, toml::de::Error> {
        let parsed: InteractionRuleBase = toml::from_str(raw)?;
        Ok(Self::new(parsed.rules))
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let raw = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&raw).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn rules_for(&self, class: DrugClass) -> impl Iterator<Item = &InteractionRule> {
        self.rules.iter().filter(move |r| r.drug_class == class)
    }

    /// Every distinct term across all rules, sorted.
    pub fn lexicon(&self) -> BTreeSet<&str> {
        self.rules
            .iter()
            .flat_map(|r| r.terms.iter().map(String::as_str))
            .collect()
    }
}
