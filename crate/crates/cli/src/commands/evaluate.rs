use std::path::{Path, PathBuf};

use nutriplan_core::config::Config;
use nutriplan_core::evaluation::{
    evaluate_cohort, Aggregation, EvaluationInputs, EvaluationReport, FoodQualityTable, NutrientDB,
    SpecificityLexicon,
};

use super::{load_plans, pair_with_cohort, read_cohort};
use crate::error::CliError;

#[derive(Debug, Clone, Default)]
pub struct EvaluateArgs {
    pub plans: PathBuf,
    pub cohort: PathBuf,
    /// Supplies the aggregation and lexicon defaults.
    pub config: Option<PathBuf>,
    pub nutrient_db: Option<PathBuf>,
    pub quality_table: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub aggregation: Option<Aggregation>,
    /// Defaults to `<plans>/evaluation.json`.
    pub out: Option<PathBuf>,
}

/// A missing or unreadable table becomes the NA reason of every metric
/// that needs it.
fn load_table<T>(
    path: Option<&Path>,
    flag: &str,
    load: impl Fn(&Path) -> Result<T, nutriplan_core::evaluation::EvaluationError>,
) -> Result<T, String> {
    let path = path.ok_or_else(|| format!("not provided ({flag})"))?;
    load(path).map_err(|e| e.to_string())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(EvaluationReport, PathBuf), CliError> {
    let cfg = args.config.as_deref().map(Config::load).transpose()?;
    let aggregation = args
        .aggregation
        .or(cfg.as_ref().map(|c| c.config.evaluation.aggregation))
        .unwrap_or_default();
    let lexicon_path = args
        .lexicon
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.config.evaluation.lexicon.as_ref().map(|p| c.resolve(p))));
    let lexicon = match &lexicon_path {
        Some(p) => SpecificityLexicon::load(p).map_err(|e| CliError::input(p, e))?,
        None => SpecificityLexicon::default(),
    };

    let (cohort, _) = read_cohort(&args.cohort)?;
    let (entries, warnings) = pair_with_cohort(load_plans(&args.plans)?, &cohort);
    for w in &warnings {
        log::warn!("{w}");
    }

    let db = load_table(args.nutrient_db.as_deref(), "--nutrient-db", NutrientDB::load);
    let quality = load_table(args.quality_table.as_deref(), "--quality-table", FoodQualityTable::load);
    for (name, t) in [("nutrient database", db.as_ref().err()), ("quality table", quality.as_ref().err())] {
        if let Some(reason) = t {
            log::warn!("{name} unavailable: {reason}");
        }
    }
    let report = evaluate_cohort(&EvaluationInputs {
        plans: &entries,
        db: db.as_ref().map_err(Clone::clone),
        quality: quality.as_ref().map_err(Clone::clone),
        lexicon: &lexicon,
        aggregation,
    });
    let out = args.out.clone().unwrap_or_else(|| args.plans.join("evaluation.json"));
    std::fs::write(&out, nutriplan_core::canonical_json(&report)).map_err(|e| CliError::io(&out, e))?;
    Ok((report, out))
}
