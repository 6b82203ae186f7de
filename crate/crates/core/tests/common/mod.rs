#![allow(dead_code)]

use std::path::PathBuf;

use nutriplan_core::config::Config;
use nutriplan_core::planner::Planner;
use nutriplan_core::profile::{load_cohort, PatientProfile};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn planner() -> Planner {
    let cfg = Config::load(&data_dir().join("config.toml")).expect("shipped config loads");
    Planner::from_config(&cfg, None).expect("shipped resources load")
}

pub fn cohort() -> Vec<PatientProfile> {
    load_cohort(&data_dir().join("cohort.json")).expect("fixture cohort loads")
}
