mod common;

use std::process::Command;
use std::sync::Arc;

use nutriplan_cli::commands::{
    cmd_audit, cmd_evaluate, cmd_run, cmd_synth, load_planner, run_with, AuditArgs, EvaluateArgs, RunArgs, SynthArgs,
};
use nutriplan_cli::manifest::{PatientStatus, RunManifest};
use nutriplan_cli::CliError;
use nutriplan_core::adime::AdimePlan;
use nutriplan_core::evaluation::Metric;
use nutriplan_core::orchestrator::{BackendError, GenerationBackend, GenerationRequest, GenerationSettings, SimulatedBackend};
use nutriplan_core::profile::load_cohort;
use nutriplan_core::safety::AuditTable;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nutriplan"))
}

#[test]
fn missing_weights_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = common::read(&common::data_dir().join("config.toml"));
    let start = raw.find("[weights]").unwrap();
    let end = start + raw[start..].find("\n\n").unwrap();
    let cfg = tmp.path().join("no_weights.toml");
    std::fs::write(&cfg, format!("{}{}", &raw[..start], &raw[end..])).unwrap();
    let args = RunArgs {
        config: cfg.clone(),
        cohort: common::data_dir().join("cohort.json"),
        out: tmp.path().join("out"),
        backend: None,
    };
    let err = cmd_run(&args).unwrap_err();
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--cohort")
        .arg(&args.cohort)
        .arg("--out")
        .arg(&args.out)
        .output()
        .unwrap();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("`weights`"), "{err}");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`weights`"));
}

#[test]
fn empty_cohort_is_a_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let cohort = tmp.path().join("empty.json");
    std::fs::write(&cohort, "[]").unwrap();
    let out = tmp.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(common::data_dir().join("config.toml"))
        .arg("--cohort")
        .arg(&cohort)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&status.stderr).contains("empty"));
    let entries: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, ["manifest.json"]);
}

#[test]
fn manifest_records_hashes_and_outcomes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = common::data_dir();
    let m = cmd_run(&RunArgs {
        config: data.join("config.toml"),
        cohort: data.join("cohort.json"),
        out: tmp.path().to_path_buf(),
        backend: None,
    })
    .unwrap();
    let on_disk: RunManifest = serde_json::from_str(&common::read(&tmp.path().join("manifest.json"))).unwrap();
    assert_eq!(on_disk, m);
    assert_eq!(m.backend_mode, "mock");
    assert!(m.finished_at.is_some());
    for key in ["config", "rules", "drug_classes", "mapping_table", "corpus/dash_eating_plan.md", "labels/warfarin.json"] {
        assert_eq!(m.content_hashes[key].len(), 64, "{key}");
    }
    assert!(m.patients.iter().all(|p| p.status == PatientStatus::Ok));
    for p in &m.patients {
        for f in common::ARTIFACTS {
            let body = common::read(&tmp.path().join(&p.patient_id).join(f));
            assert!(body.contains(&m.manifest_id), "{}/{f} lacks the manifest id", p.patient_id);
        }
    }
}

/// Simulator that fails every call made on behalf of one patient.
struct FailFor {
    inner: SimulatedBackend,
    patient_marker: String,
}

impl GenerationBackend for FailFor {
    fn settings(&self) -> &GenerationSettings {
        self.inner.settings()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        if request.body().contains(&self.patient_marker) {
            return Err(BackendError::Transport("connection reset".into()));
        }
        self.inner.generate(request)
    }
}

#[test]
fn one_failed_patient_does_not_stop_the_rest() {
    let data = common::data_dir();
    let planner = load_planner(&data.join("config.toml"), None)
        .unwrap()
        .with_backend(Arc::new(FailFor { inner: SimulatedBackend::default(), patient_marker: "warfarin".into() }));
    let tmp = tempfile::tempdir().unwrap();
    let m = run_with(
        &planner,
        &RunArgs { config: data.join("config.toml"), cohort: data.join("cohort.json"), out: tmp.path().into(), backend: None },
    )
    .unwrap();
    let statuses: Vec<_> = m.patients.iter().map(|p| (p.patient_id.as_str(), p.status)).collect();
    assert_eq!(statuses, [("P001", PatientStatus::Failed), ("P002", PatientStatus::Ok), ("P003", PatientStatus::Ok)]);
    assert!(m.patients[0].error.as_deref().unwrap().contains("connection reset"));
    assert!(!tmp.path().join("P001").exists());
    assert!(tmp.path().join("P002/plan.json").exists());
    let table = nutriplan_cli::commands::failure_table(&m);
    assert!(table.contains("P001") && !table.contains("P002"));
}

fn write_plan(dir: &std::path::Path, plan: &AdimePlan) {
    let d = dir.join(&plan.patient_id);
    std::fs::create_dir_all(&d).unwrap();
    std::fs::write(d.join("plan.json"), serde_json::to_string_pretty(plan).unwrap()).unwrap();
}

fn audit_args(plans: &std::path::Path, cohort: &std::path::Path) -> AuditArgs {
    let data = common::data_dir();
    AuditArgs {
        plans: plans.to_path_buf(),
        cohort: cohort.to_path_buf(),
        rules: Some(data.join("interaction_rules.toml")),
        drug_classes: Some(data.join("drug_classes.toml")),
        labels: Some(data.join("labels")),
        ..Default::default()
    }
}

#[test]
fn audit_of_seeded_fixture_is_thirty_percent() {
    let tmp = tempfile::tempdir().unwrap();
    let plans = tmp.path().join("plans");
    let cohort: Vec<serde_json::Value> = (0..10)
        .map(|i| {
            serde_json::json!({
                "patient_id": format!("W{i:02}"),
                "anthropometrics": {"height_m": 1.7, "weight_kg": 70.0},
                "biomarkers": {},
                "medications": ["Warfarin 5 mg"],
                "dietary_history": {"items": []},
                "sociodemographics": {}
            })
        })
        .collect();
    let cohort_path = tmp.path().join("cohort.json");
    std::fs::write(&cohort_path, serde_json::to_string(&cohort).unwrap()).unwrap();
    for i in 0..10 {
        let food = match i {
            0 => "sauteed spinach",
            1 => "kale",
            2 => "Brussels sprouts",
            _ => "brown rice",
        };
        write_plan(&plans, &AdimePlan::with_added_foods(&format!("W{i:02}"), &["oatmeal", food]));
    }
    let out = cmd_audit(&audit_args(&plans, &cohort_path)).unwrap();
    let w = &out.table.rows[0];
    assert_eq!((w.cohort.as_str(), w.evaluated, w.violations), ("warfarin", 10, 3));
    assert_eq!(w.rate_percent, Some(30.0));
    let stored: AuditTable = serde_json::from_str(&common::read(&out.written_to)).unwrap();
    assert_eq!(stored, out.table);
}

#[test]
fn empty_plans_dir_gives_na_and_mismatches_warn() {
    let tmp = tempfile::tempdir().unwrap();
    let plans = tmp.path().join("plans");
    std::fs::create_dir_all(&plans).unwrap();
    let cohort = common::data_dir().join("cohort.json");
    let out = cmd_audit(&audit_args(&plans, &cohort)).unwrap();
    assert_eq!(out.table.overall.rate_percent, None);
    assert!(out.table.render_text().contains("NA"));

    write_plan(&plans, &AdimePlan::with_added_foods("ZZZ", &["oatmeal"]));
    let out = cmd_audit(&audit_args(&plans, &cohort)).unwrap();
    assert!(out.table.warnings.iter().any(|w| w.contains("`ZZZ` is not in the cohort")));
    assert!(out.table.warnings.iter().any(|w| w.contains("`P001` has no plan")));
}

#[test]
fn unreadable_plan_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(tmp.path().join("X")).unwrap();
    std::fs::write(tmp.path().join("X/plan.json"), "{ not json").unwrap();
    let err = cmd_audit(&audit_args(tmp.path(), &common::data_dir().join("cohort.json"))).unwrap_err();
    assert!(matches!(err, CliError::Input { .. }));
    assert_eq!(err.exit_code(), 1);
    let usage = cmd_audit(&AuditArgs { plans: tmp.path().into(), cohort: "c.json".into(), ..Default::default() }).unwrap_err();
    assert_eq!(usage.exit_code(), 2);
}

#[test]
fn evaluate_reports_na_with_reasons() {
    let data = common::data_dir();
    let tmp = tempfile::tempdir().unwrap();
    cmd_run(&RunArgs { config: data.join("config.toml"), cohort: data.join("cohort.json"), out: tmp.path().into(), backend: None })
        .unwrap();
    let (report, _) = cmd_evaluate(&EvaluateArgs {
        plans: tmp.path().into(),
        cohort: data.join("cohort.json"),
        nutrient_db: Some(data.join("nutrients.csv")),
        ..Default::default()
    })
    .unwrap();
    match &report.food_quality {
        Metric::Na { reason } => assert!(reason.contains("--quality-table"), "{reason}"),
        other => panic!("expected NA, got {other:?}"),
    }
    assert!(matches!(report.correlations, Metric::Ok { .. }));

    let single = tmp.path().join("single");
    std::fs::create_dir_all(single.join("P001")).unwrap();
    std::fs::copy(tmp.path().join("P001/plan.json"), single.join("P001/plan.json")).unwrap();
    let (report, _) = cmd_evaluate(&EvaluateArgs {
        plans: single,
        cohort: data.join("cohort.json"),
        nutrient_db: Some(data.join("nutrients.csv")),
        quality_table: Some(data.join("food_quality.csv")),
        ..Default::default()
    })
    .unwrap();
    let Metric::Ok { value } = &report.correlations else { panic!("matrix itself should compute") };
    assert!(value.pairs.iter().all(|p| p.r.is_none() && p.na_reason.is_some()));
    assert!(matches!(report.food_quality, Metric::Ok { .. }));
}

#[test]
fn synthetic_cohort_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("synth/cohort.json");
    assert_eq!(cmd_synth(&SynthArgs { n: 25, seed: 9, out: out.clone() }).unwrap(), 25);
    let cohort = load_cohort(&out).unwrap();
    assert_eq!(cohort, nutriplan_core::synthetic::synthetic_cohort(25, 9));
}
