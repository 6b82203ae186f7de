use std::path::PathBuf;

use nutriplan_core::synthetic::synthetic_cohort;

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct SynthArgs {
    pub n: usize,
    pub seed: u64,
    pub out: PathBuf,
}

/// Writes a seeded synthetic cohort in the cohort file format.
pub fn cmd_synth(args: &SynthArgs) -> Result<usize, CliError> {
    let cohort = synthetic_cohort(args.n, args.seed);
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(&args.out, nutriplan_core::canonical_json(&cohort)).map_err(|e| CliError::io(&args.out, e))?;
    Ok(cohort.len())
}
