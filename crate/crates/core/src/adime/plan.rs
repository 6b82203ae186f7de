use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AdimeError;
use crate::priority::{ScoredIssue, Sigma};
use crate::safety::NutrientLimit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Action {
    Continue,
    Replace,
    Add,
}

impl Action {
    pub fn parse(token: &str) -> Option<Action> {
        match token.trim().to_ascii_lowercase().as_str() {
            "continue" => Some(Action::Continue),
            "replace" => Some(Action::Replace),
            "add" => Some(Action::Add),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Continue => "Continue",
            Action::Replace => "Replace",
            Action::Add => "Add",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionItem {
    pub action: Action,
    pub food: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement_for: Option<String>,
    pub reason: String,
}

impl InterventionItem {
    pub fn new(
        action: Action,
        food: impl Into<String>,
        replacement_for: Option<String>,
        reason: impl Into<String>,
    ) -> Result<Self, AdimeError> {
        let item = InterventionItem {
            action,
            food: food.into().trim().to_string(),
            replacement_for: replacement_for.map(|r| r.trim().to_string()),
            reason: reason.into().trim().to_string(),
        };
        item.validate()?;
        Ok(item)
    }

    pub fn validate(&self) -> Result<(), AdimeError> {
        if self.food.is_empty() {
            return Err(AdimeError::Schema(format!("{} item with empty food", self.action.as_str())));
        }
        match (&self.action, &self.replacement_for) {
            (Action::Replace, None) => Err(AdimeError::Schema(format!(
                "Replace item `{}` has no replaced food",
                self.food
            ))),
            (Action::Replace, Some(r)) if r.is_empty() => Err(AdimeError::Schema(format!(
                "Replace item `{}` has an empty replaced food",
                self.food
            ))),
            (Action::Add | Action::Continue, Some(_)) => Err(AdimeError::Schema(format!(
                "{} item `{}` cannot name a replaced food",
                self.action.as_str(),
                self.food
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Supplement {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub summary: Vec<String>,
    /// Diet-pattern tags such as `hypertension_diet = DASH`.
    pub diet_patterns: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisEntry {
    pub issue_id: String,
    pub domain_tag: String,
    pub rank: usize,
    pub score: f64,
    pub sigma: Sigma,
    pub statement: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub issues: Vec<DiagnosisEntry>,
    pub nutrient_limits: Vec<NutrientLimit>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub items: Vec<InterventionItem>,
    pub supplements: Vec<Supplement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoringEntry {
    pub metric: String,
    pub frequency: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdimePlan {
    pub plan_id: String,
    pub patient_id: String,
    pub assessment: Assessment,
    pub diagnosis: Diagnosis,
    pub intervention: Intervention,
    pub monitoring: Vec<MonitoringEntry>,
    pub evaluation: Vec<String>,
}

impl AdimePlan {
    /// Empty plan shell for `patient_id`.
    pub fn new(patient_id: &str) -> Self {
        AdimePlan {
            plan_id: format!("plan-{patient_id}"),
            patient_id: patient_id.to_string(),
            assessment: Assessment::default(),
            diagnosis: Diagnosis::default(),
            intervention: Intervention::default(),
            monitoring: Vec::new(),
            evaluation: Vec::new(),
        }
    }

    /// Empty plan plus one `Add` item per food.
    pub fn with_added_foods(patient_id: &str, foods: &[&str]) -> Self {
        let mut plan = Self::new(patient_id);
        plan.intervention.items = foods
            .iter()
            .map(|f| InterventionItem { action: Action::Add, food: f.to_string(), replacement_for: None, reason: String::new() })
            .collect();
        plan
    }

    /// Foods the plan tells the patient to eat: Add and Continue foods plus
    /// the new food of each Replace. Replaced foods are excluded.
    pub fn recommended_foods(&self) -> Vec<&str> {
        self.intervention.items.iter().map(|i| i.food.as_str()).collect()
    }

    pub fn has_food_items(&self) -> bool {
        !self.intervention.items.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Assessment,
    Diagnosis,
    Intervention,
    Monitoring,
    Evaluation,
    Prohibited,
}

impl Section {
    const REQUIRED: [Section; 5] = [
        Section::Assessment,
        Section::Diagnosis,
        Section::Intervention,
        Section::Monitoring,
        Section::Evaluation,
    ];

    fn header(line: &str) -> Option<Section> {
        let t = line.trim().trim_start_matches('#').trim().trim_end_matches(':').trim();
        match t.to_ascii_uppercase().as_str() {
            "ASSESSMENT" => Some(Section::Assessment),
            "DIAGNOSIS" => Some(Section::Diagnosis),
            "INTERVENTION" => Some(Section::Intervention),
            "MONITORING" => Some(Section::Monitoring),
            "EVALUATION" => Some(Section::Evaluation),
            "PROHIBITED" => Some(Section::Prohibited),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Section::Assessment => "assessment",
            Section::Diagnosis => "diagnosis",
            Section::Intervention => "intervention",
            Section::Monitoring => "monitoring",
            Section::Evaluation => "evaluation",
            Section::Prohibited => "prohibited",
        }
    }
}

const REASON_SEPARATORS: [&str; 4] = [" \u{2014} ", " \u{2013} ", " -- ", " - "];

fn split_reason(s: &str) -> (&str, &str) {
    REASON_SEPARATORS
        .iter()
        .filter_map(|sep| s.find(sep).map(|i| (i, sep.len())))
        .min_by_key(|(i, _)| *i)
        .map(|(i, n)| (s[..i].trim(), s[i + n..].trim()))
        .unwrap_or((s.trim(), ""))
}

fn parse_limit(rest: &str) -> Result<NutrientLimit, AdimeError> {
    let bad = || AdimeError::Schema(format!("malformed nutrient limit `{rest}`"));
    let parts: Vec<&str> = rest.split_whitespace().collect();
    let pos = parts.iter().position(|p| p.parse::<f64>().is_ok()).ok_or_else(bad)?;
    if pos == 0 || pos + 1 >= parts.len() {
        return Err(bad());
    }
    let max_amount: f64 = parts[pos].parse().map_err(|_| bad())?;
    if !max_amount.is_finite() || max_amount < 0.0 {
        return Err(bad());
    }
    Ok(NutrientLimit {
        nutrient: parts[..pos].join(" ").to_lowercase(),
        max_amount,
        unit: parts[pos + 1..].join(" "),
    })
}

fn default_statement(s: &ScoredIssue) -> String {
    format!("{} ({}) identified during assessment", s.issue.issue_id, s.issue.domain_tag)
}

/// Parses the report agent's labeled-section draft into an [`AdimePlan`].
///
/// Diagnosis entries follow the order of `ranked`; PES statements written by
/// the report agent are attached by issue id. A PROHIBITED section, if the
/// draft echoes one, is ignored.
pub fn parse_draft_plan(
    patient_id: &str,
    draft: &str,
    ranked: &[ScoredIssue],
) -> Result<AdimePlan, AdimeError> {
    let mut lines_by: BTreeMap<Section, Vec<&str>> = BTreeMap::new();
    let mut current = None;
    for line in draft.lines() {
        if let Some(s) = Section::header(line) {
            current = Some(s);
            lines_by.entry(s).or_default();
            continue;
        }
        let body = line.trim().trim_start_matches(['-', '*']).trim();
        if body.is_empty() {
            continue;
        }
        if let Some(s) = current {
            lines_by.entry(s).or_default().push(body);
        }
    }
    for s in Section::REQUIRED {
        if !lines_by.contains_key(&s) {
            return Err(AdimeError::Parse(s.name().into()));
        }
    }

    let mut assessment = Assessment::default();
    for l in &lines_by[&Section::Assessment] {
        match l.split_once(':') {
            Some((k, v)) if k.trim().eq_ignore_ascii_case("pattern") => {
                let (tag, value) = v
                    .split_once('=')
                    .ok_or_else(|| AdimeError::Schema(format!("malformed diet pattern `{v}`")))?;
                assessment
                    .diet_patterns
                    .insert(tag.trim().to_lowercase(), value.trim().to_string());
            }
            _ => assessment.summary.push(l.to_string()),
        }
    }

    let known: BTreeSet<&str> = ranked.iter().map(|s| s.issue.issue_id.as_str()).collect();
    let mut statements: BTreeMap<String, String> = BTreeMap::new();
    let mut nutrient_limits = Vec::new();
    for l in &lines_by[&Section::Diagnosis] {
        let (k, v) = l
            .split_once(':')
            .ok_or_else(|| AdimeError::Schema(format!("diagnosis line without `:`: `{l}`")))?;
        let k = k.trim();
        if k.eq_ignore_ascii_case("limit") {
            nutrient_limits.push(parse_limit(v)?);
        } else if known.contains(k) {
            statements.insert(k.to_string(), v.trim().to_string());
        } else {
            return Err(AdimeError::Schema(format!("diagnosis names unknown issue `{k}`")));
        }
    }
    let issues = ranked
        .iter()
        .enumerate()
        .map(|(i, s)| DiagnosisEntry {
            issue_id: s.issue.issue_id.clone(),
            domain_tag: s.issue.domain_tag.clone(),
            rank: i + 1,
            score: s.score,
            sigma: s.sigma,
            statement: statements
                .get(&s.issue.issue_id)
                .cloned()
                .unwrap_or_else(|| default_statement(s)),
        })
        .collect();

    let mut intervention = Intervention::default();
    for l in &lines_by[&Section::Intervention] {
        let (token, rest) = l
            .split_once(':')
            .ok_or_else(|| AdimeError::Schema(format!("intervention line without action: `{l}`")))?;
        let (what, reason) = split_reason(rest);
        if token.trim().eq_ignore_ascii_case("supplement") {
            if what.is_empty() {
                return Err(AdimeError::Schema("supplement with empty name".into()));
            }
            intervention.supplements.push(Supplement { name: what.into(), reason: reason.into() });
            continue;
        }
        let action = Action::parse(token)
            .ok_or_else(|| AdimeError::Schema(format!("invalid action `{}`", token.trim())))?;
        let item = match action {
            Action::Replace => {
                let (old, new) = what.split_once("->").ok_or_else(|| {
                    AdimeError::Schema(format!("Replace item `{what}` must read `old -> new`"))
                })?;
                InterventionItem::new(action, new, Some(old.to_string()), reason)?
            }
            _ => InterventionItem::new(action, what, None, reason)?,
        };
        intervention.items.push(item);
    }

    let mut monitoring = Vec::new();
    for l in &lines_by[&Section::Monitoring] {
        let (metric, freq) = l
            .split_once(':')
            .ok_or_else(|| AdimeError::Schema(format!("monitoring line without frequency: `{l}`")))?;
        monitoring.push(MonitoringEntry {
            metric: metric.trim().to_string(),
            frequency: freq.trim().to_string(),
        });
    }

    let evaluation = lines_by[&Section::Evaluation].iter().map(|s| s.to_string()).collect();

    Ok(AdimePlan {
        plan_id: format!("plan-{patient_id}"),
        patient_id: patient_id.to_string(),
        assessment,
        diagnosis: Diagnosis { issues, nutrient_limits },
        intervention,
        monitoring,
        evaluation,
    })
}
