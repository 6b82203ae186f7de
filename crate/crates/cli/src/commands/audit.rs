use std::path::PathBuf;

use nutriplan_core::config::Config;
use nutriplan_core::profile::{classify_medications, MedicationClassTable, MedicationEntry};
use nutriplan_core::retrieval::{fetch_drug_labels, FixtureLabelSource, DEFAULT_FOOD_SECTION_PATTERNS};
use nutriplan_core::safety::{audit_violation_rate, AuditTable, ExactTokenMatcher, InteractionRuleBase};

use super::{load_plans, pair_with_cohort, read_cohort};
use crate::error::CliError;

#[derive(Debug, Clone, Default)]
pub struct AuditArgs {
    pub plans: PathBuf,
    pub cohort: PathBuf,
    /// Supplies defaults for the options below.
    pub config: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub drug_classes: Option<PathBuf>,
    /// Directory of label fixtures; without it only the rule base is used.
    pub labels: Option<PathBuf>,
    pub epsilon: Option<f64>,
    /// Defaults to `<plans>/audit.json`.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct AuditOutput {
    pub table: AuditTable,
    pub written_to: PathBuf,
}

struct Resolved {
    rules: PathBuf,
    drug_classes: PathBuf,
    labels: Option<PathBuf>,
    patterns: Vec<String>,
    epsilon: f64,
}

fn resolve(args: &AuditArgs) -> Result<Resolved, CliError> {
    let cfg = args.config.as_deref().map(Config::load).transpose()?;
    let rules = match (&args.rules, &cfg) {
        (Some(p), _) => p.clone(),
        (None, Some(c)) => c.resolve(&c.config.safety.rules),
        (None, None) => return Err(CliError::Usage("audit needs --rules or --config".into())),
    };
    let drug_classes = match (&args.drug_classes, &cfg) {
        (Some(p), _) => p.clone(),
        (None, Some(c)) => c.resolve(&c.config.safety.drug_classes),
        (None, None) => return Err(CliError::Usage("audit needs --drug-classes or --config".into())),
    };
    let labels = match (&args.labels, &cfg) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(c)) => Some(c.resolve(&c.config.retrieval.labels.fixtures_dir)),
        (None, None) => None,
    };
    let patterns = match &cfg {
        Some(c) => c.config.retrieval.labels.section_patterns.clone(),
        None => DEFAULT_FOOD_SECTION_PATTERNS.iter().map(|s| s.to_string()).collect(),
    };
    let epsilon = args.epsilon.or(cfg.as_ref().map(|c| c.config.safety.epsilon)).unwrap_or(0.5);
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(CliError::Usage(format!("--epsilon must lie in (0, 1], got {epsilon}")));
    }
    Ok(Resolved { rules, drug_classes, labels, patterns, epsilon })
}

/// Re-checks stored plans against each patient's medications. Violations
/// are results, not errors.
pub fn cmd_audit(args: &AuditArgs) -> Result<AuditOutput, CliError> {
    let r = resolve(args)?;
    let rules_raw = std::fs::read_to_string(&r.rules).map_err(|e| CliError::input(&r.rules, e))?;
    let rules = InteractionRuleBase::from_toml(&rules_raw).map_err(|e| CliError::input(&r.rules, e))?;
    let classes_raw = std::fs::read_to_string(&r.drug_classes).map_err(|e| CliError::input(&r.drug_classes, e))?;
    let classes = MedicationClassTable::from_toml(&classes_raw).map_err(|e| CliError::input(&r.drug_classes, e))?;

    let (mut cohort, _) = read_cohort(&args.cohort)?;
    for p in &mut cohort {
        p.medications = classify_medications(&p.medications, &classes);
    }
    let (entries, warnings) = pair_with_cohort(load_plans(&args.plans)?, &cohort);
    for w in &warnings {
        log::warn!("{w}");
    }

    let labels = match &r.labels {
        Some(dir) => {
            let source = FixtureLabelSource::open(dir).map_err(|e| CliError::input(dir, e))?;
            let meds: Vec<MedicationEntry> = entries.iter().flat_map(|(_, p)| p.medications.clone()).collect();
            fetch_drug_labels(&meds, &source, &r.patterns).map_err(|e| CliError::input(dir, e))?.labels
        }
        None => Vec::new(),
    };

    let mut table = audit_violation_rate(&entries, &rules, &labels, r.epsilon, &ExactTokenMatcher);
    table.warnings.extend(warnings);
    let out = args.out.clone().unwrap_or_else(|| args.plans.join("audit.json"));
    std::fs::write(&out, nutriplan_core::canonical_json(&table)).map_err(|e| CliError::io(&out, e))?;
    Ok(AuditOutput { table, written_to: out })
}
