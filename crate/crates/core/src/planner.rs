//! End-to-end planning for one patient: pipeline, ADIME projection, safety
//! verification and FHIR mapping, all stamped with one manifest id.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adime::{map_to_fhir_with_trace, project_adime, AdimeError, AdimePlan, CodeMappingTable, FhirNutritionOrder, FhirOptions};
use crate::config::{BackendMode, ConfigError, EmbeddingConfig, LabelSourceKind, LoadedConfig};
use crate::orchestrator::{
    default_roster, ExecutionGraph, GenerationBackend, GenerationSettings, HttpChatBackend, OrchestratorError,
    PipelineResources, Script, ScriptedBackend, SimulatedBackend, SynthesisBundle, TranscriptRecord,
};
use crate::priority::PriorityConfig;
use crate::profile::{MedicationClassTable, PatientProfile};
use crate::retrieval::{
    load_corpus, ChunkingParams, EmbeddingBackend, FixtureLabelSource, GuidelineStore, HashedBagOfTokens,
    LabelSource, OpenFdaLabelSource, RemoteEmbeddingBackend,
};
use crate::safety::{verify_plan, ExactTokenMatcher, InteractionRuleBase, ViolationReport};
use crate::text::sha256_hex;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
    #[error("plan projection failed: {0}")]
    Adime(#[from] AdimeError),
}

impl PlanError {
    pub fn is_backend(&self) -> bool {
        matches!(self, PlanError::Orchestrator(e) if e.is_backend())
    }
}

/// The plan file: plan, its verification result and the manifest id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub manifest_id: String,
    pub plan: AdimePlan,
    pub verification: ViolationReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientOutput {
    pub patient_id: String,
    pub plan: PlanDocument,
    pub fhir: FhirNutritionOrder,
    pub bundle: SynthesisBundle,
    pub transcript: Vec<TranscriptRecord>,
    /// Mapping-table fields the FHIR projection used.
    pub mapped_fields: Vec<String>,
}

impl PatientOutput {
    pub fn plan_json(&self) -> String {
        crate::canonical_json(&self.plan)
    }

    pub fn fhir_json(&self) -> String {
        self.fhir.to_canonical_json()
    }

    pub fn bundle_json(&self) -> String {
        crate::canonical_json(&self.bundle)
    }

    /// One compact JSON record per line, keys sorted.
    pub fn transcript_jsonl(&self) -> String {
        self.transcript
            .iter()
            .map(|r| {
                let v = serde_json::to_value(r).expect("transcript record serializes");
                serde_json::to_string(&v).expect("JSON value serializes") + "\n"
            })
            .collect()
    }

    /// Writes `plan.json`, `fhir.json`, `bundle.json` and `transcript.jsonl`
    /// into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("plan.json"), self.plan_json())?;
        std::fs::write(dir.join("fhir.json"), self.fhir_json())?;
        std::fs::write(dir.join("bundle.json"), self.bundle_json())?;
        std::fs::write(dir.join("transcript.jsonl"), self.transcript_jsonl())
    }
}

/// Loaded resources plus a backend, ready to plan any number of patients.
pub struct Planner {
    resources: PipelineResources,
    mapping: CodeMappingTable,
    fhir: FhirOptions,
    epsilon: f64,
    backend: Arc<dyn GenerationBackend>,
    mode: BackendMode,
    content_hashes: BTreeMap<String, String>,
}

fn read_hashed(path: &Path, key: &str, hashes: &mut BTreeMap<String, String>) -> Result<String, ConfigError> {
    let raw = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    hashes.insert(key.to_string(), sha256_hex(&raw));
    Ok(raw)
}

fn hash_dir(dir: &Path, prefix: &str, hashes: &mut BTreeMap<String, String>) -> Result<(), ConfigError> {
    let io = |e: std::io::Error| ConfigError::Io { path: dir.display().to_string(), message: e.to_string() };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    for p in paths {
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let bytes = std::fs::read(&p).map_err(io)?;
        hashes.insert(format!("{prefix}/{name}"), sha256_hex(bytes));
    }
    Ok(())
}

fn env_key(var: &Option<String>) -> Option<String> {
    var.as_ref().and_then(|v| std::env::var(v).ok()).filter(|k| !k.is_empty())
}

/// Run identifier derived from the backend mode and the content hashes of
/// the config and every fixture it names.
pub fn manifest_id(mode: BackendMode, content_hashes: &BTreeMap<String, String>) -> String {
    let material = serde_json::json!({ "backend_mode": mode.as_str(), "content_hashes": content_hashes });
    format!("m-{}", &sha256_hex(crate::canonical_json(&material))[..16])
}

impl Planner {
    /// Loads every resource named by the config. `mode` overrides the
    /// configured backend mode.
    pub fn from_config(cfg: &LoadedConfig, mode: Option<BackendMode>) -> Result<Planner, ConfigError> {
        let c = &cfg.config;
        let mode = mode.unwrap_or(c.backend.mode);
        let mut hashes = BTreeMap::new();
        hashes.insert("config".to_string(), sha256_hex(&cfg.raw));

        let rules_path = cfg.resolve(&c.safety.rules);
        let rules = InteractionRuleBase::from_toml(&read_hashed(&rules_path, "rules", &mut hashes)?)
            .map_err(|e| ConfigError::resource("interaction rules", e))?;
        let classes_path = cfg.resolve(&c.safety.drug_classes);
        let class_table = MedicationClassTable::from_toml(&read_hashed(&classes_path, "drug_classes", &mut hashes)?)
            .map_err(|e| ConfigError::resource("drug class table", e))?;
        let mapping_path = cfg.resolve(&c.fhir.mapping_table);
        let mapping = CodeMappingTable::from_csv(&read_hashed(&mapping_path, "mapping_table", &mut hashes)?)
            .map_err(|e| ConfigError::resource("code mapping table", e))?;

        let corpus_dir = cfg.resolve(&c.retrieval.corpus_dir);
        hash_dir(&corpus_dir, "corpus", &mut hashes)?;
        let docs = load_corpus(&corpus_dir).map_err(|e| ConfigError::resource("guideline corpus", e))?;
        let embedder: Arc<dyn EmbeddingBackend> = match &c.retrieval.embedding {
            EmbeddingConfig::Hashed { dimension, seed } => Arc::new(HashedBagOfTokens::new(*dimension, *seed)),
            EmbeddingConfig::Remote { .. } if mode == BackendMode::Mock => {
                return Err(ConfigError::invalid(
                    "retrieval.embedding.kind",
                    "mock mode needs the local hashed embedding",
                ))
            }
            EmbeddingConfig::Remote { base_url, model, dimension, api_key_env } => {
                Arc::new(RemoteEmbeddingBackend::new(base_url, model, env_key(api_key_env), *dimension))
            }
        };
        let params = ChunkingParams { chunk_chars: c.retrieval.chunk_chars, overlap_chars: c.retrieval.overlap_chars };
        params.validate().map_err(|e| ConfigError::invalid("retrieval.chunk_chars", e.to_string()))?;
        let guidelines =
            GuidelineStore::build(&docs, params, embedder).map_err(|e| ConfigError::resource("guideline index", e))?;

        let lc = &c.retrieval.labels;
        let labels: Arc<dyn LabelSource> = if mode == BackendMode::Mock || lc.source == LabelSourceKind::Fixtures {
            let dir = cfg.resolve(&lc.fixtures_dir);
            hash_dir(&dir, "labels", &mut hashes)?;
            Arc::new(FixtureLabelSource::open(&dir).map_err(|e| ConfigError::resource("label fixtures", e))?)
        } else {
            let base = lc.base_url.as_deref().ok_or(ConfigError::MissingKey("retrieval.labels.base_url".into()))?;
            Arc::new(OpenFdaLabelSource::new(base, env_key(&lc.api_key_env)))
        };

        let settings = GenerationSettings {
            model: c.backend.model.clone(),
            temperature: c.backend.temperature,
            max_tokens: c.backend.max_tokens,
        };
        let backend: Arc<dyn GenerationBackend> = match mode {
            BackendMode::Mock => {
                let sim: Arc<dyn GenerationBackend> = Arc::new(SimulatedBackend::new(settings.clone()));
                match &c.backend.script {
                    Some(p) => {
                        let raw = read_hashed(&cfg.resolve(p), "script", &mut hashes)?;
                        let script: Script =
                            serde_json::from_str(&raw).map_err(|e| ConfigError::resource("backend script", e))?;
                        Arc::new(ScriptedBackend::from_script(script, settings).with_fallback(sim))
                    }
                    None => sim,
                }
            }
            BackendMode::Live => {
                let base = c.backend.base_url.as_deref().ok_or(ConfigError::MissingKey("backend.base_url".into()))?;
                let key = match &c.backend.api_key_env {
                    Some(var) => Some(env_key(&Some(var.clone())).ok_or_else(|| {
                        ConfigError::invalid("backend.api_key_env", format!("environment variable {var} is not set"))
                    })?),
                    None => None,
                };
                Arc::new(HttpChatBackend::new(base, key, settings, Duration::from_secs(c.backend.timeout_secs)))
            }
        };

        let roster = if c.agents.is_empty() { default_roster() } else { c.agents.clone() };
        let graph = ExecutionGraph::from_roster(roster).map_err(|e| ConfigError::invalid("agents", e.to_string()))?;
        let mut priority = PriorityConfig { weights: c.weights, ..PriorityConfig::default() };
        priority.severity_bands.extend(c.bands.clone());
        priority.validate().map_err(|e| ConfigError::invalid("bands", e.to_string()))?;

        let id = manifest_id(mode, &hashes);
        Ok(Planner {
            resources: PipelineResources {
                graph,
                guidelines,
                labels,
                label_patterns: lc.section_patterns.clone(),
                class_table,
                rules,
                priority,
                top_k: c.retrieval.top_k,
                manifest_id: id.clone(),
            },
            mapping,
            fhir: FhirOptions {
                date_time: c.fhir.date_time.clone(),
                urgent_threshold: c.fhir.urgent_threshold,
                manifest_id: Some(id),
            },
            epsilon: c.safety.epsilon,
            backend,
            mode,
            content_hashes: hashes,
        })
    }

    /// Swaps the generation backend, keeping the manifest id.
    pub fn with_backend(mut self, backend: Arc<dyn GenerationBackend>) -> Self {
        self.backend = backend;
        self
    }

    pub fn manifest_id(&self) -> &str {
        &self.resources.manifest_id
    }

    pub fn mode(&self) -> BackendMode {
        self.mode
    }

    pub fn content_hashes(&self) -> &BTreeMap<String, String> {
        &self.content_hashes
    }

    pub fn resources(&self) -> &PipelineResources {
        &self.resources
    }

    pub fn mapping(&self) -> &CodeMappingTable {
        &self.mapping
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn plan_patient(&self, profile: &PatientProfile) -> Result<PatientOutput, PlanError> {
        let run = crate::orchestrator::run_pipeline(profile, &self.resources, self.backend.as_ref())?;
        let plan = project_adime(&run.bundle)?;
        let verification = verify_plan(&plan, &run.bundle.c_safe, self.epsilon, &ExactTokenMatcher);
        let (fhir, mapped_fields) = map_to_fhir_with_trace(&plan, &self.mapping, &self.fhir)?;
        Ok(PatientOutput {
            patient_id: profile.patient_id.clone(),
            plan: PlanDocument { manifest_id: self.manifest_id().to_string(), plan, verification },
            fhir,
            bundle: run.bundle,
            transcript: run.transcript,
            mapped_fields,
        })
    }
}
