use serde::{Deserialize, Serialize};

use super::Stage;
use crate::priority::HealthIssue;
use crate::safety::{NutrientLimit, SafetyConstraint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentInsight {
    pub agent_id: String,
    pub stage: Stage,
    pub tags: Vec<String>,
    /// Retrieval query the agent's evidence was drawn with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    /// Raw response text.
    pub content: String,
    pub findings: Vec<String>,
    pub extracted_issues: Vec<HealthIssue>,
    pub extracted_constraints: Vec<SafetyConstraint>,
    /// Chunk ids and label ids the agent was given.
    pub evidence_refs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Append-only insight list in roster order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InsightPool {
    insights: Vec<AgentInsight>,
}

impl InsightPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, insight: AgentInsight) {
        self.insights.push(insight);
    }

    pub fn insights(&self) -> &[AgentInsight] {
        &self.insights
    }

    pub fn len(&self) -> usize {
        self.insights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.insights.is_empty()
    }

    pub fn stage(&self, stage: Stage) -> impl Iterator<Item = &AgentInsight> {
        self.insights.iter().filter(move |i| i.stage == stage)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    Findings,
    Issues,
    Constraints,
    Evidence,
}

fn block_header(line: &str) -> Option<Block> {
    let t = line.trim().trim_start_matches('#').trim().trim_end_matches(':').trim();
    match t.to_ascii_uppercase().as_str() {
        "FINDINGS" => Some(Block::Findings),
        "ISSUES" => Some(Block::Issues),
        "CONSTRAINTS" => Some(Block::Constraints),
        "EVIDENCE" => Some(Block::Evidence),
        _ => None,
    }
}

fn fields(line: &str) -> Vec<(String, String)> {
    line.split(';')
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.trim().to_ascii_lowercase(), v.trim().to_string()))
        .collect()
}

fn field<'a>(fs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    fs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn parse_issue(line: &str) -> Result<HealthIssue, String> {
    let fs = fields(line);
    let text = |k: &str| field(&fs, k).filter(|v| !v.is_empty()).ok_or(format!("missing `{k}`"));
    let num = |k: &str| -> Result<f64, String> {
        let v = text(k)?;
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or(format!("`{k}` is not a number: `{v}`"))
    };
    Ok(HealthIssue {
        issue_id: text("id")?.to_string(),
        domain_tag: text("domain")?.to_lowercase(),
        raw_severity: num("severity")?,
        raw_urgency: num("urgency")?,
        raw_modifiability: num("modifiability")?,
    })
}

fn parse_limit(s: &str) -> Result<NutrientLimit, String> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    let pos = parts
        .iter()
        .position(|p| p.parse::<f64>().is_ok())
        .ok_or(format!("limit without amount: `{s}`"))?;
    if pos == 0 || pos + 1 >= parts.len() {
        return Err(format!("limit must read `<nutrient> <amount> <unit>`: `{s}`"));
    }
    Ok(NutrientLimit {
        nutrient: parts[..pos].join(" ").to_lowercase(),
        max_amount: parts[pos].parse().map_err(|_| format!("bad amount in `{s}`"))?,
        unit: parts[pos + 1..].join(" "),
    })
}

fn parse_constraint(line: &str, agent_id: &str) -> Result<SafetyConstraint, String> {
    let fs = fields(line);
    let drug = field(&fs, "drug").filter(|v| !v.is_empty()).ok_or("missing `drug`")?;
    let terms: Vec<String> = field(&fs, "avoid")
        .map(|v| v.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect())
        .unwrap_or_default();
    let limit = field(&fs, "limit").filter(|v| !v.is_empty()).map(parse_limit).transpose()?;
    if terms.is_empty() && limit.is_none() {
        return Err("constraint needs `avoid` or `limit`".into());
    }
    Ok(SafetyConstraint {
        drug: drug.to_string(),
        contraindicated_terms: terms,
        nutrient_limit: limit,
        source_ref: field(&fs, "source")
            .filter(|v| !v.is_empty())
            .map(str::to_string)
            .unwrap_or_else(|| format!("agent:{agent_id}")),
        mechanism_note: field(&fs, "note").unwrap_or_default().to_string(),
    })
}

/// What the line parser pulled out of one response.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedResponse {
    pub findings: Vec<String>,
    pub issues: Vec<HealthIssue>,
    pub constraints: Vec<SafetyConstraint>,
    pub cited: Vec<String>,
    pub warnings: Vec<String>,
}

/// Tolerant line-oriented parse of a FINDINGS / ISSUES / CONSTRAINTS /
/// EVIDENCE response. Malformed issue and constraint lines are skipped with a
/// warning; text outside any block is ignored.
pub fn parse_response(agent_id: &str, text: &str) -> ParsedResponse {
    let mut out = ParsedResponse::default();
    let mut block = None;
    for (n, raw) in text.lines().enumerate() {
        if let Some(b) = block_header(raw) {
            block = Some(b);
            continue;
        }
        let line = raw.trim().trim_start_matches(['-', '*']).trim();
        if line.is_empty() {
            continue;
        }
        match block {
            Some(Block::Findings) => out.findings.push(line.to_string()),
            Some(Block::Issues) => match parse_issue(line) {
                Ok(i) => out.issues.push(i),
                Err(e) => out.warnings.push(format!("line {}: issue skipped: {e}", n + 1)),
            },
            Some(Block::Constraints) => match parse_constraint(line, agent_id) {
                Ok(c) => out.constraints.push(c),
                Err(e) => out.warnings.push(format!("line {}: constraint skipped: {e}", n + 1)),
            },
            Some(Block::Evidence) => out.cited.push(line.trim_matches(['[', ']']).to_string()),
            None => {}
        }
    }
    out
}

/// Renders an issue in the line format [`parse_response`] reads.
pub fn format_issue(i: &HealthIssue) -> String {
    format!(
        "- id={}; domain={}; severity={}; urgency={}; modifiability={}",
        i.issue_id, i.domain_tag, i.raw_severity, i.raw_urgency, i.raw_modifiability
    )
}
