use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::backend::{ChatMessage, GenerationBackend, GenerationRequest};
use super::insight::{parse_response, AgentInsight, InsightPool};
use super::prompt::{
    agent_section, candidate_issues_section, evidence_section, insights_section, labels_section,
    patient_section, profile_slice, ranked_issues_section, render_query, INSIGHT_FORMAT, PLAN_FORMAT,
};
use super::{AgentSpec, ExecutionGraph, OrchestratorError, Stage, StageFailure};
use crate::priority::{HealthIssue, PriorityConfig, ScoredIssue};
use crate::profile::{classify_medications, MedicationClassTable, PatientProfile};
use crate::retrieval::{fetch_drug_labels, DrugLabel, GuidelineStore, LabelFetch, LabelSource, SourceTag};
use crate::safety::{extract_constraints, render_negative_constraints, InteractionRuleBase, SafetyConstraintSet};
use crate::text::sha256_hex;

/// Everything a pipeline run reads besides the profile and the backend.
#[derive(Clone)]
pub struct PipelineResources {
    pub graph: ExecutionGraph,
    pub guidelines: GuidelineStore,
    pub labels: Arc<dyn LabelSource>,
    pub label_patterns: Vec<String>,
    pub class_table: MedicationClassTable,
    pub rules: InteractionRuleBase,
    pub priority: PriorityConfig,
    pub top_k: usize,
    /// Stamped into bundles and transcript records.
    pub manifest_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedHit {
    pub chunk_id: String,
    pub doc_id: String,
    pub source_tag: SourceTag,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalLogEntry {
    pub agent_id: String,
    pub query: String,
    pub source_filter: Vec<SourceTag>,
    pub hits: Vec<LoggedHit>,
}

/// One backend call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub seq: usize,
    pub manifest_id: String,
    pub agent_id: String,
    pub stage: Stage,
    pub prompt_hash: String,
    pub response_hash: String,
    pub prompt: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisBundle {
    pub manifest_id: String,
    pub patient_id: String,
    /// Stage-1 insights in roster order followed by stage-2 refinements.
    pub pool: InsightPool,
    pub activated_specialists: Vec<String>,
    pub prioritization: AgentInsight,
    pub ranked: Vec<ScoredIssue>,
    pub labels_used: Vec<String>,
    pub labels_not_found: Vec<String>,
    pub c_safe: SafetyConstraintSet,
    /// Exactly the block injected into the report prompt ("" when none).
    pub negative_block: String,
    pub draft_plan: String,
    pub retrieval_log: Vec<RetrievalLogEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub bundle: SynthesisBundle,
    pub transcript: Vec<TranscriptRecord>,
}

struct Call {
    agent_id: String,
    stage: Stage,
    request: GenerationRequest,
    response: String,
}

fn stage_err(agent_id: &str, source: StageFailure) -> OrchestratorError {
    OrchestratorError::Stage { agent_id: agent_id.to_string(), source }
}

fn call_backend(
    spec: &AgentSpec,
    body: String,
    backend: &dyn GenerationBackend,
) -> Result<Call, OrchestratorError> {
    let format = if spec.stage == Stage::Report { PLAN_FORMAT } else { INSIGHT_FORMAT };
    let request = GenerationRequest {
        agent_id: spec.agent_id.clone(),
        role_prompt: format!("{}\n\n{}", spec.role_prompt.trim(), format),
        messages: vec![ChatMessage::user(body)],
    };
    let response = backend
        .generate(&request)
        .map_err(|e| stage_err(&spec.agent_id, StageFailure::Backend(e)))?;
    Ok(Call { agent_id: spec.agent_id.clone(), stage: spec.stage, request, response })
}

fn build_insight(
    spec: &AgentSpec,
    call: &Call,
    query: Option<String>,
    evidence_refs: Vec<String>,
) -> AgentInsight {
    let parsed = parse_response(&spec.agent_id, &call.response);
    let mut warnings = parsed.warnings;
    for c in &parsed.cited {
        if !evidence_refs.contains(c) {
            warnings.push(format!("cited `{c}` was not among the supplied evidence"));
        }
    }
    for w in &warnings {
        log::warn!("{}: {w}", spec.agent_id);
    }
    let domain = spec.domain_tag.clone();
    let mut tags: Vec<String> = domain.iter().cloned().collect();
    if spec.stage == Stage::Domain {
        let d = domain.as_deref().unwrap_or_default();
        for i in &parsed.issues {
            let t = format!("{d}:{}", i.domain_tag);
            if !tags.contains(&t) {
                tags.push(t);
            }
        }
    } else if spec.stage != Stage::Refine {
        tags.push(spec.stage.as_str().to_string());
    }
    AgentInsight {
        agent_id: spec.agent_id.clone(),
        stage: spec.stage,
        tags,
        query,
        content: call.response.clone(),
        findings: parsed.findings,
        extracted_issues: parsed.issues,
        extracted_constraints: if spec.domain_tag.as_deref() == Some("medication") {
            parsed.constraints
        } else {
            Vec::new()
        },
        evidence_refs,
        warnings,
    }
}

struct Evidence {
    log: Option<RetrievalLogEntry>,
    section: String,
    refs: Vec<String>,
}

fn retrieve(
    spec: &AgentSpec,
    profile: &PatientProfile,
    res: &PipelineResources,
) -> Result<Evidence, OrchestratorError> {
    let Some(template) = &spec.query_template else {
        return Ok(Evidence { log: None, section: evidence_section(None, &[]), refs: Vec::new() });
    };
    let query = render_query(template, profile);
    let hits = res
        .guidelines
        .retrieve(&query, res.top_k, &spec.source_filter)
        .map_err(|e| stage_err(&spec.agent_id, StageFailure::Retrieval(e)))?;
    let section = evidence_section(Some(&query), &hits);
    let refs = hits.iter().map(|h| h.chunk_id.clone()).collect();
    let log = RetrievalLogEntry {
        agent_id: spec.agent_id.clone(),
        query,
        source_filter: spec.source_filter.clone(),
        hits: hits
            .into_iter()
            .map(|h| LoggedHit { chunk_id: h.chunk_id, doc_id: h.doc_id, source_tag: h.source_tag, score: h.score })
            .collect(),
    };
    Ok(Evidence { log: Some(log), section, refs })
}

struct AgentOutcome {
    insight: AgentInsight,
    call: Call,
    retrieval: Option<RetrievalLogEntry>,
    labels: Option<LabelFetch>,
}

fn run_domain_agent(
    spec: &AgentSpec,
    profile: &PatientProfile,
    res: &PipelineResources,
    backend: &dyn GenerationBackend,
) -> Result<AgentOutcome, OrchestratorError> {
    let Evidence { log: retrieval, section, mut refs } = retrieve(spec, profile, res)?;
    let mut body = format!(
        "{}\n{}\n{}",
        agent_section(spec),
        patient_section(&profile_slice(profile, spec)),
        section
    );
    let mut labels = None;
    if spec.domain_tag.as_deref() == Some("medication") {
        let fetched = fetch_drug_labels(&profile.medications, res.labels.as_ref(), &res.label_patterns)
            .map_err(|e| stage_err(&spec.agent_id, StageFailure::Retrieval(e)))?;
        body.push('\n');
        body.push_str(&labels_section(&fetched.labels, &fetched.not_found));
        refs.extend(fetched.labels.iter().map(DrugLabel::label_id));
        labels = Some(fetched);
    }
    let call = call_backend(spec, body, backend)?;
    let insight = build_insight(spec, &call, retrieval.as_ref().map(|r| r.query.clone()), refs);
    Ok(AgentOutcome { insight, call, retrieval, labels })
}

/// Stage 1: every domain agent sees only its own profile slice and its own
/// evidence. Calls run concurrently; results are merged in roster order.
fn stage1_assess(
    profile: &PatientProfile,
    domain_agents: &[&AgentSpec],
    res: &PipelineResources,
    backend: &dyn GenerationBackend,
) -> Result<Vec<(AgentInsight, Option<RetrievalLogEntry>, Option<LabelFetch>, Call)>, OrchestratorError> {
    let results: Vec<Result<AgentOutcome, OrchestratorError>> = std::thread::scope(|s| {
        let handles: Vec<_> = domain_agents
            .iter()
            .map(|spec| s.spawn(move || run_domain_agent(spec, profile, res, backend)))
            .collect();
        handles
            .into_iter()
            .zip(domain_agents)
            .map(|(h, spec)| {
                h.join().unwrap_or_else(|_| {
                    Err(stage_err(&spec.agent_id, StageFailure::Panic))
                })
            })
            .collect()
    });
    results
        .into_iter()
        .map(|r| r.map(|o| (o.insight, o.retrieval, o.labels, o.call)))
        .collect()
}

/// Stage-1 insights whose tags intersect the specialist's selector, in pool
/// order.
pub fn select_context<'a>(pool: &'a InsightPool, specialist: &AgentSpec) -> Vec<&'a AgentInsight> {
    pool.stage(Stage::Domain)
        .filter(|i| specialist.input_selector.matches_any_tag(&i.tags))
        .collect()
}

/// A specialist runs when some stage-1 issue carries its domain tag.
pub fn is_activated(pool: &InsightPool, specialist: &AgentSpec) -> bool {
    let Some(tag) = specialist.domain_tag.as_deref() else { return false };
    pool.stage(Stage::Domain)
        .flat_map(|i| &i.extracted_issues)
        .any(|issue| issue.domain_tag == tag)
}

/// Stage 2: activated specialists run one after another in roster order,
/// each seeing its selected stage-1 context plus every earlier refinement.
fn stage2_refine(
    profile: &PatientProfile,
    specialists: &[&AgentSpec],
    pool: &mut InsightPool,
    res: &PipelineResources,
    backend: &dyn GenerationBackend,
    calls: &mut Vec<Call>,
    retrievals: &mut Vec<RetrievalLogEntry>,
) -> Result<Vec<String>, OrchestratorError> {
    let mut activated = Vec::new();
    for spec in specialists {
        if !is_activated(pool, spec) {
            continue;
        }
        let Evidence { log: retrieval, section: evidence, refs } = retrieve(spec, profile, res)?;
        let mut context = select_context(pool, spec);
        context.extend(pool.stage(Stage::Refine));
        let body = format!(
            "{}\n{}\n{}\n{}",
            agent_section(spec),
            patient_section(&profile_slice(profile, spec)),
            evidence,
            insights_section(&context)
        );
        let call = call_backend(spec, body, backend)?;
        let insight = build_insight(spec, &call, retrieval.as_ref().map(|r| r.query.clone()), refs);
        pool.push(insight);
        calls.push(call);
        retrievals.extend(retrieval);
        activated.push(spec.agent_id.clone());
    }
    Ok(activated)
}

/// Issues from the pool merged by id; a later insight's version replaces an
/// earlier one in place.
pub fn merge_issues<'a>(insights: impl IntoIterator<Item = &'a AgentInsight>) -> Vec<HealthIssue> {
    let mut out: Vec<HealthIssue> = Vec::new();
    for i in insights {
        for issue in &i.extracted_issues {
            match out.iter_mut().find(|e| e.issue_id == issue.issue_id) {
                Some(e) => *e = issue.clone(),
                None => out.push(issue.clone()),
            }
        }
    }
    out
}

/// Stage 3 prompt body: ranked issues, selected insights and, when the
/// constraint set is non-empty, the rendered hard-negative block verbatim.
pub fn synthesis_prompt(
    spec: &AgentSpec,
    profile: &PatientProfile,
    context: &[&AgentInsight],
    ranked: &[ScoredIssue],
    negative_block: &str,
) -> String {
    let mut body = format!(
        "{}\n{}\n{}\n{}",
        agent_section(spec),
        patient_section(&profile_slice(profile, spec)),
        ranked_issues_section(ranked),
        insights_section(context)
    );
    if !negative_block.is_empty() {
        body.push('\n');
        body.push_str(negative_block);
    }
    body
}

/// Runs the whole agent graph for one patient.
pub fn run_pipeline(
    profile: &PatientProfile,
    res: &PipelineResources,
    backend: &dyn GenerationBackend,
) -> Result<PipelineRun, OrchestratorError> {
    res.graph.validate()?;
    let mut profile = profile.clone();
    profile.medications = classify_medications(&profile.medications, &res.class_table);

    let order = res.graph.topological_order()?;
    let domain: Vec<&AgentSpec> = order.iter().copied().filter(|s| s.stage == Stage::Domain).collect();
    let refine: Vec<&AgentSpec> = order.iter().copied().filter(|s| s.stage == Stage::Refine).collect();
    let prioritizer = order.iter().copied().find(|s| s.stage == Stage::Prioritize).expect("validated graph");
    let reporter = order.iter().copied().find(|s| s.stage == Stage::Report).expect("validated graph");

    let mut pool = InsightPool::new();
    let mut calls = Vec::new();
    let mut retrievals = Vec::new();
    let mut label_fetch = LabelFetch::default();
    for (insight, retrieval, labels, call) in stage1_assess(&profile, &domain, res, backend)? {
        pool.push(insight);
        retrievals.extend(retrieval);
        if let Some(l) = labels {
            label_fetch = l;
        }
        calls.push(call);
    }

    let activated = stage2_refine(&profile, &refine, &mut pool, res, backend, &mut calls, &mut retrievals)?;
    log::debug!("{}: specialists activated: {:?}", profile.patient_id, activated);

    let candidates = merge_issues(pool.insights());
    let context: Vec<&AgentInsight> = pool
        .insights()
        .iter()
        .filter(|i| prioritizer.input_selector.matches_any_tag(&i.tags))
        .collect();
    let body = format!(
        "{}\n{}\n{}",
        agent_section(prioritizer),
        insights_section(&context),
        candidate_issues_section(&candidates)
    );
    let call = call_backend(prioritizer, body, backend)?;
    let prioritization = build_insight(prioritizer, &call, None, Vec::new());
    calls.push(call);

    let mut issues = candidates;
    for issue in &prioritization.extracted_issues {
        match issues.iter_mut().find(|e| e.issue_id == issue.issue_id) {
            Some(e) => *e = issue.clone(),
            None => issues.push(issue.clone()),
        }
    }
    let ranked = res
        .priority
        .score_and_rank(&issues)
        .map_err(|e| stage_err(&prioritizer.agent_id, StageFailure::Priority(e)))?;

    let med_insight = pool
        .stage(Stage::Domain)
        .find(|i| i.tags.first().map(String::as_str) == Some("medication"));
    let c_safe = extract_constraints(med_insight, &profile.medications, &label_fetch.labels, &res.rules);
    let negative_block = render_negative_constraints(&c_safe);

    let mut context: Vec<&AgentInsight> = pool
        .insights()
        .iter()
        .filter(|i| reporter.input_selector.matches_any_tag(&i.tags))
        .collect();
    if reporter.input_selector.matches_any_tag(&prioritization.tags) {
        context.push(&prioritization);
    }
    let body = synthesis_prompt(reporter, &profile, &context, &ranked, &negative_block);
    let call = call_backend(reporter, body, backend)?;
    let draft_plan = call.response.clone();
    calls.push(call);

    let transcript = calls
        .into_iter()
        .enumerate()
        .map(|(seq, c)| TranscriptRecord {
            seq,
            manifest_id: res.manifest_id.clone(),
            agent_id: c.agent_id,
            stage: c.stage,
            prompt_hash: c.request.request_hash(),
            response_hash: sha256_hex(&c.response),
            prompt: c.request.prompt_text(),
            response: c.response,
        })
        .collect();

    let labels_used: BTreeSet<String> = label_fetch.labels.iter().map(DrugLabel::label_id).collect();
    Ok(PipelineRun {
        bundle: SynthesisBundle {
            manifest_id: res.manifest_id.clone(),
            patient_id: profile.patient_id.clone(),
            pool,
            activated_specialists: activated,
            prioritization,
            ranked,
            labels_used: labels_used.into_iter().collect(),
            labels_not_found: label_fetch.not_found,
            c_safe,
            negative_block,
            draft_plan,
            retrieval_log: retrievals,
        },
        transcript,
    })
}
