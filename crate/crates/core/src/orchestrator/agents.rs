use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::retrieval::SourceTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Domain,
    Refine,
    Prioritize,
    Report,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Domain => "domain",
            Stage::Refine => "refine",
            Stage::Prioritize => "prioritize",
            Stage::Report => "report",
        }
    }
}

/// Declarative filter over profile field paths and insight tags.
///
/// Patterns are exact names, `*` (everything) or `prefix:*` for tags. A
/// profile pattern also matches every path nested below it, so
/// `biomarkers` selects `biomarkers.systolic_bp`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSelector {
    #[serde(default)]
    pub profile_fields: Vec<String>,
    #[serde(default)]
    pub insight_tags: Vec<String>,
}

impl InputSelector {
    pub fn matches_field(&self, path: &str) -> bool {
        self.profile_fields.iter().any(|p| {
            p == "*"
                || path == p
                || path
                    .strip_prefix(p.as_str())
                    .is_some_and(|rest| rest.starts_with('.') || rest.starts_with('['))
        })
    }

    pub fn matches_tag(&self, tag: &str) -> bool {
        self.insight_tags.iter().any(|p| tag_matches(p, tag))
    }

    pub fn matches_any_tag(&self, tags: &[String]) -> bool {
        tags.iter().any(|t| self.matches_tag(t))
    }
}

fn tag_matches(pattern: &str, tag: &str) -> bool {
    match pattern.strip_suffix('*') {
        Some("") => true,
        Some(prefix) => tag.starts_with(prefix),
        None => pattern == tag,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub agent_id: String,
    pub stage: Stage,
    pub role_prompt: String,
    #[serde(default)]
    pub domain_tag: Option<String>,
    #[serde(default)]
    pub input_selector: InputSelector,
    /// Retrieval query with `{field.path}` placeholders filled from the
    /// profile. Agents without a template retrieve nothing.
    #[serde(default)]
    pub query_template: Option<String>,
    /// Restricts retrieval to these guideline sources; empty = all.
    #[serde(default)]
    pub source_filter: Vec<SourceTag>,
}

/// Agent dependency graph. Stage-1 agents are independent; stage-2
/// specialists depend on every stage-1 agent and on the specialists before
/// them; the prioritizer and the report agent depend on everything earlier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionGraph {
    pub nodes: Vec<AgentSpec>,
    pub edges: Vec<(String, String)>,
}

impl ExecutionGraph {
    /// Derives the edges from each agent's stage and validates the result.
    pub fn from_roster(nodes: Vec<AgentSpec>) -> Result<Self, OrchestratorError> {
        let mut edges = Vec::new();
        for (j, to) in nodes.iter().enumerate() {
            for (i, from) in nodes.iter().enumerate() {
                let dep = from.stage < to.stage || (from.stage == Stage::Refine && to.stage == Stage::Refine && i < j);
                if dep {
                    edges.push((from.agent_id.clone(), to.agent_id.clone()));
                }
            }
        }
        Self::new(nodes, edges)
    }

    pub fn new(nodes: Vec<AgentSpec>, edges: Vec<(String, String)>) -> Result<Self, OrchestratorError> {
        let g = ExecutionGraph { nodes, edges };
        g.validate()?;
        Ok(g)
    }

    pub fn node(&self, id: &str) -> Option<&AgentSpec> {
        self.nodes.iter().find(|n| n.agent_id == id)
    }

    pub fn stage_nodes(&self, stage: Stage) -> impl Iterator<Item = &AgentSpec> {
        self.nodes.iter().filter(move |n| n.stage == stage)
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let err = |m: String| Err(OrchestratorError::Graph(m));
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if n.agent_id.trim().is_empty() {
                return err("agent with empty id".into());
            }
            if !ids.insert(n.agent_id.as_str()) {
                return err(format!("duplicate agent id `{}`", n.agent_id));
            }
            if matches!(n.stage, Stage::Domain | Stage::Refine) && n.domain_tag.is_none() {
                return err(format!("{} agent `{}` needs a domain_tag", n.stage.as_str(), n.agent_id));
            }
        }
        for stage in [Stage::Prioritize, Stage::Report] {
            let count = self.stage_nodes(stage).count();
            if count != 1 {
                return err(format!("expected exactly one {} agent, found {count}", stage.as_str()));
            }
        }
        if self.stage_nodes(Stage::Domain).count() == 0 {
            return err("roster has no domain agents".into());
        }

        let stage1_tags: BTreeSet<&str> = self
            .stage_nodes(Stage::Domain)
            .filter_map(|n| n.domain_tag.as_deref())
            .collect();
        for n in self.stage_nodes(Stage::Refine) {
            for pat in &n.input_selector.insight_tags {
                let head = pat.split(':').next().unwrap_or_default();
                if pat != "*" && !stage1_tags.contains(head) {
                    return err(format!(
                        "selector `{pat}` of `{}` references no stage-1 agent tag",
                        n.agent_id
                    ));
                }
            }
        }

        let stage_of: BTreeMap<&str, Stage> =
            self.nodes.iter().map(|n| (n.agent_id.as_str(), n.stage)).collect();
        for (from, to) in &self.edges {
            let (Some(&fs), Some(&ts)) = (stage_of.get(from.as_str()), stage_of.get(to.as_str())) else {
                return err(format!("edge {from} -> {to} names an unknown agent"));
            };
            let ok = match ts {
                Stage::Domain => false,
                Stage::Refine => matches!(fs, Stage::Domain | Stage::Refine),
                Stage::Prioritize => matches!(fs, Stage::Domain | Stage::Refine),
                Stage::Report => fs != Stage::Report,
            };
            if !ok {
                return err(format!(
                    "edge {from} ({}) -> {to} ({}) breaks stage ordering",
                    fs.as_str(),
                    ts.as_str()
                ));
            }
        }
        self.topological_order().map(|_| ())
    }

    /// Kahn's algorithm; ties are broken by roster position so the order is
    /// total and stable.
    pub fn topological_order(&self) -> Result<Vec<&AgentSpec>, OrchestratorError> {
        let index: BTreeMap<&str, usize> =
            self.nodes.iter().enumerate().map(|(i, n)| (n.agent_id.as_str(), i)).collect();
        let mut indegree = vec![0usize; self.nodes.len()];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for (from, to) in &self.edges {
            let (Some(&f), Some(&t)) = (index.get(from.as_str()), index.get(to.as_str())) else {
                return Err(OrchestratorError::Graph(format!("edge {from} -> {to} names an unknown agent")));
            };
            out[f].push(t);
            indegree[t] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..self.nodes.len()).filter(|&i| indegree[i] == 0).collect();
        let mut order = VecDeque::new();
        while let Some(i) = ready.pop_first() {
            order.push_back(i);
            for &t in &out[i] {
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    ready.insert(t);
                }
            }
        }
        if order.len() != self.nodes.len() {
            return Err(OrchestratorError::Graph("execution graph has a cycle".into()));
        }
        Ok(order.into_iter().map(|i| &self.nodes[i]).collect())
    }
}

fn spec(
    id: &str,
    stage: Stage,
    domain: Option<&str>,
    role: &str,
    fields: &[&str],
    tags: &[&str],
    query: Option<&str>,
    sources: &[SourceTag],
) -> AgentSpec {
    AgentSpec {
        agent_id: id.into(),
        stage,
        role_prompt: role.into(),
        domain_tag: domain.map(str::to_string),
        input_selector: InputSelector {
            profile_fields: fields.iter().map(|s| s.to_string()).collect(),
            insight_tags: tags.iter().map(|s| s.to_string()).collect(),
        },
        query_template: query.map(str::to_string),
        source_filter: sources.to_vec(),
    }
}

/// Four domain agents, three condition specialists, the prioritizer and the
/// report agent. The manager is the graph executor itself.
pub fn default_roster() -> Vec<AgentSpec> {
    use Stage::*;
    vec![
        spec(
            "body", Domain, Some("body"),
            "You are a body-composition assessor. Interpret anthropometrics and demographics for nutrition risk.",
            &["anthropometrics", "sociodemographics"], &[],
            Some("weight management guidance for adults with BMI {anthropometrics.bmi}"), &[],
        ),
        spec(
            "clinical", Domain, Some("clinical"),
            "You are a clinical nutrition assessor. Interpret laboratory biomarkers and blood pressure.",
            &["biomarkers"], &[],
            Some("dietary management of blood pressure {biomarkers.systolic_bp} glucose {biomarkers.glucose} HbA1c {biomarkers.hba1c} cholesterol {biomarkers.total_cholesterol}"),
            &[],
        ),
        spec(
            "medication", Domain, Some("medication"),
            "You are a clinical pharmacist. Identify drug-nutrient interactions from the supplied drug labels.",
            &["medications"], &[],
            Some("food and drug interactions for {medications}"), &[],
        ),
        spec(
            "diet", Domain, Some("diet"),
            "You are a dietary-intake assessor. Review the recorded foods for quality and easy substitutions.",
            &["dietary_history"], &[],
            Some("healthy food substitutions for {dietary_history}"), &[],
        ),
        spec(
            "hypertension", Refine, Some("hypertension"),
            "You are a hypertension nutrition specialist. Refine the plan with DASH-based sodium and potassium guidance.",
            &["biomarkers.systolic_bp", "dietary_history"], &["clinical:hypertension", "diet"],
            Some("DASH eating plan sodium limit potassium foods for systolic blood pressure {biomarkers.systolic_bp}"),
            &[SourceTag::Dash],
        ),
        spec(
            "diabetes", Refine, Some("diabetes"),
            "You are a diabetes nutrition specialist. Refine the plan with carbohydrate-quality and glycemic guidance.",
            &["biomarkers.glucose", "biomarkers.hba1c", "dietary_history"], &["clinical:diabetes", "diet"],
            Some("carbohydrate counting and glycemic control for HbA1c {biomarkers.hba1c}"),
            &[SourceTag::Ada],
        ),
        spec(
            "dyslipidemia", Refine, Some("dyslipidemia"),
            "You are a lipid nutrition specialist. Refine the plan with fat-quality and fiber guidance.",
            &["biomarkers.total_cholesterol", "dietary_history"], &["clinical:dyslipidemia", "diet"],
            Some("saturated fat and soluble fiber guidance for total cholesterol {biomarkers.total_cholesterol}"),
            &[],
        ),
        spec(
            "prioritizer", Prioritize, None,
            "You are the prioritization agent. Review the candidate issues and return them with calibrated severity, urgency and modifiability.",
            &[], &["*"], None, &[],
        ),
        spec(
            "report", Report, None,
            "You are the report agent. Write the final nutrition care plan in ADIME form, obeying every prohibition.",
            &["patient_id"], &["*"], None, &[],
        ),
    ]
}
