//! Agent roster, execution graph and the three-stage pipeline: isolated
//! domain assessment, conditional specialist refinement, then
//! prioritization and safety-gated synthesis.

mod agents;
mod backend;
mod insight;
mod mock;
mod pipeline;
pub mod prompt;

pub use agents::{default_roster, AgentSpec, ExecutionGraph, InputSelector, Stage};
pub use backend::{
    BackendError, ChatMessage, FailingBackend, GenerationBackend, GenerationRequest, GenerationSettings,
    HttpChatBackend, Script, ScriptEntry, ScriptedBackend,
};
pub use insight::{format_issue, parse_response, AgentInsight, InsightPool, ParsedResponse};
pub use mock::SimulatedBackend;
pub use pipeline::{
    is_activated, merge_issues, run_pipeline, select_context, synthesis_prompt, LoggedHit, PipelineResources,
    PipelineRun, RetrievalLogEntry, SynthesisBundle, TranscriptRecord,
};

use thiserror::Error;

use crate::priority::PriorityError;
use crate::retrieval::RetrievalError;

#[derive(Debug, Error)]
pub enum StageFailure {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Priority(#[from] PriorityError),
    #[error("agent thread panicked")]
    Panic,
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid execution graph: {0}")]
    Graph(String),
    #[error("agent `{agent_id}` failed: {source}")]
    Stage { agent_id: String, source: StageFailure },
}

impl OrchestratorError {
    pub fn is_backend(&self) -> bool {
        matches!(self, OrchestratorError::Stage { source: StageFailure::Backend(_), .. })
    }
}
