use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use super::{AgentInsight, AgentSpec};
use crate::priority::{HealthIssue, ScoredIssue};
use crate::profile::PatientProfile;
use crate::retrieval::{DrugLabel, RetrievalHit};

/// Response contract appended to every non-report role prompt.
pub const INSIGHT_FORMAT: &str = "\
Answer with these labeled blocks, one item per line starting with `- `:
FINDINGS: free-text observations. Dietary suggestions use `suggest add: <food> -- <reason>`, \
`suggest continue: <food> -- <reason>`, `suggest replace: <old> -> <new> -- <reason>`, \
`suggest supplement: <name> -- <reason>`, `pattern: <tag>=<diet>`, `limit: <nutrient> <amount> <unit>`, \
`monitor: <metric>: <frequency>` and `goal: <target>`.
ISSUES: `id=<id>; domain=<domain>; severity=<raw value>; urgency=<0-10>; modifiability=<0-10>`.
CONSTRAINTS: `drug=<name>; avoid=<food>, <food>; limit=<nutrient> <amount> <unit>; note=<mechanism>; source=<label id>`.
EVIDENCE: ids of the evidence items you relied on.";

/// Draft-plan contract for the report agent.
pub const PLAN_FORMAT: &str = "\
Write the plan as five labeled sections, ASSESSMENT, DIAGNOSIS, INTERVENTION, MONITORING and EVALUATION, \
one item per line starting with `- `. ASSESSMENT may carry `pattern: <tag>=<diet>` lines. \
DIAGNOSIS lines read `<issue id>: <problem> related to <etiology> as evidenced by <signs>` or \
`limit: <nutrient> <amount> <unit>`. INTERVENTION lines read `Add: <food> -- <reason>`, \
`Continue: <food> -- <reason>`, `Replace: <old food> -> <new food> -- <reason>` or \
`Supplement: <name> -- <reason>`; no other actions are allowed. MONITORING lines read \
`<metric>: <frequency>`. End with a PROHIBITED section listing every forbidden food once.";

/// Flattens a profile into `path: value` pairs. Object keys are visited in
/// sorted order and arrays in index order.
pub fn flatten_profile(profile: &PatientProfile) -> Vec<(String, String)> {
    fn walk(v: &Value, path: String, out: &mut Vec<(String, String)>) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                    walk(child, p, out);
                }
            }
            Value::Array(items) => {
                for (i, child) in items.iter().enumerate() {
                    walk(child, format!("{path}[{i}]"), out);
                }
            }
            Value::Null => {}
            Value::String(s) => out.push((path, s.clone())),
            other => out.push((path, other.to_string())),
        }
    }
    let mut out = Vec::new();
    walk(&serde_json::to_value(profile).expect("profile serializes"), String::new(), &mut out);
    out
}

/// Profile lines visible to an agent.
pub fn profile_slice(profile: &PatientProfile, spec: &AgentSpec) -> Vec<(String, String)> {
    flatten_profile(profile)
        .into_iter()
        .filter(|(k, _)| spec.input_selector.matches_field(k))
        .collect()
}

/// Fills `{path}` placeholders from the profile. A path naming a list (such
/// as `medications`) resolves to the names or descriptions inside it;
/// anything unresolved becomes `n/a`.
pub fn render_query(template: &str, profile: &PatientProfile) -> String {
    static PLACEHOLDER: OnceLock<Regex> = OnceLock::new();
    let re = PLACEHOLDER
        .get_or_init(|| Regex::new(r"\{([A-Za-z0-9_.\[\]]+)\}").expect("static regex"));
    let flat = flatten_profile(profile);
    let q = re.replace_all(template, |c: &regex::Captures| {
        let key = &c[1];
        if let Some((_, v)) = flat.iter().find(|(k, _)| k == key) {
            return v.clone();
        }
        let nested: Vec<&str> = flat
            .iter()
            .filter(|(k, _)| {
                k.strip_prefix(key).is_some_and(|r| r.starts_with('.') || r.starts_with('['))
                    && (k.ends_with(".name") || k.ends_with(".description"))
            })
            .map(|(_, v)| v.as_str())
            .collect();
        if nested.is_empty() {
            "n/a".to_string()
        } else {
            nested.join(", ")
        }
    });
    q.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn agent_section(spec: &AgentSpec) -> String {
    format!(
        "## AGENT\nid: {}\nstage: {}\ndomain: {}\n",
        spec.agent_id,
        spec.stage.as_str(),
        spec.domain_tag.as_deref().unwrap_or("n/a")
    )
}

pub fn patient_section(lines: &[(String, String)]) -> String {
    let mut s = String::from("## PATIENT DATA\n");
    if lines.is_empty() {
        s.push_str("(none)\n");
    }
    for (k, v) in lines {
        s.push_str(&format!("{k}: {v}\n"));
    }
    s
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn evidence_section(query: Option<&str>, hits: &[RetrievalHit]) -> String {
    let mut s = String::new();
    if let Some(q) = query {
        s.push_str(&format!("## QUERY\n{q}\n\n"));
    }
    s.push_str("## EVIDENCE\n");
    if hits.is_empty() {
        s.push_str("(none)\n");
    }
    for h in hits {
        s.push_str(&format!("[{}] ({}) {}\n", h.chunk_id, h.source_tag.as_str(), one_line(&h.text)));
    }
    s
}

pub fn labels_section(labels: &[DrugLabel], not_found: &[String]) -> String {
    let mut s = String::from("## DRUG LABELS\n");
    for l in labels {
        if l.food_interaction_sections.is_empty() {
            s.push_str(&format!("[{}] (no food-relevant sections)\n", l.label_id()));
        }
        for text in &l.food_interaction_sections {
            s.push_str(&format!("[{}] {}\n", l.label_id(), one_line(text)));
        }
    }
    for n in not_found {
        s.push_str(&format!("[missing] no label found for {n}\n"));
    }
    if labels.is_empty() && not_found.is_empty() {
        s.push_str("(none)\n");
    }
    s
}

pub fn insights_section(insights: &[&AgentInsight]) -> String {
    let mut s = String::from("## CONTEXT INSIGHTS\n");
    if insights.is_empty() {
        s.push_str("(none)\n");
    }
    for i in insights {
        s.push_str(&format!("### {} [{}]\n", i.agent_id, i.tags.join(", ")));
        s.push_str(i.content.trim_end());
        s.push('\n');
    }
    s
}

pub fn candidate_issues_section(issues: &[HealthIssue]) -> String {
    let mut s = String::from("## CANDIDATE ISSUES\n");
    if issues.is_empty() {
        s.push_str("(none)\n");
    }
    for i in issues {
        s.push_str(&super::insight::format_issue(i));
        s.push('\n');
    }
    s
}

pub fn ranked_issues_section(ranked: &[ScoredIssue]) -> String {
    let mut s = String::from("## RANKED ISSUES\n");
    if ranked.is_empty() {
        s.push_str("(none)\n");
    }
    for (n, r) in ranked.iter().enumerate() {
        s.push_str(&format!(
            "{}. id={}; domain={}; score={:.4}; severity={:.4}; urgency={:.4}; modifiability={:.4}\n",
            n + 1,
            r.issue.issue_id,
            r.issue.domain_tag,
            r.score,
            r.sigma.severity,
            r.sigma.urgency,
            r.sigma.modifiability
        ));
    }
    s
}
