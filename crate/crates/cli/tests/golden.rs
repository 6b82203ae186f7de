mod common;

use nutriplan_cli::commands::{cmd_audit, cmd_evaluate, cmd_run, AuditArgs, EvaluateArgs, RunArgs};
use nutriplan_core::profile::load_cohort;

fn golden_run(out: &std::path::Path) {
    let data = common::data_dir();
    cmd_run(&RunArgs {
        config: data.join("golden.toml"),
        cohort: data.join("cohort.json"),
        out: out.to_path_buf(),
        backend: None,
    })
    .unwrap();
}

#[test]
fn run_matches_goldens() {
    let tmp = tempfile::tempdir().unwrap();
    golden_run(tmp.path());
    for p in load_cohort(&common::data_dir().join("cohort.json")).unwrap() {
        for f in common::ARTIFACTS {
            let actual = common::read(&tmp.path().join(&p.patient_id).join(f));
            common::check_golden(&format!("run/{}/{f}", p.patient_id), &actual).unwrap();
        }
    }
}

#[test]
fn audit_and_evaluate_match_goldens() {
    let data = common::data_dir();
    let tmp = tempfile::tempdir().unwrap();
    golden_run(tmp.path());
    let audit = cmd_audit(&AuditArgs {
        plans: tmp.path().to_path_buf(),
        cohort: data.join("cohort.json"),
        config: Some(data.join("golden.toml")),
        ..Default::default()
    })
    .unwrap();
    common::check_golden("audit.json", &common::read(&audit.written_to)).unwrap();
    common::check_golden("audit.txt", &audit.table.render_text()).unwrap();

    let (report, path) = cmd_evaluate(&EvaluateArgs {
        plans: tmp.path().to_path_buf(),
        cohort: data.join("cohort.json"),
        config: Some(data.join("golden.toml")),
        nutrient_db: Some(data.join("nutrients.csv")),
        quality_table: Some(data.join("food_quality.csv")),
        ..Default::default()
    })
    .unwrap();
    common::check_golden("evaluation.json", &common::read(&path)).unwrap();
    common::check_golden("evaluation.txt", &report.render_text()).unwrap();
}

#[test]
fn rerun_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    golden_run(a.path());
    golden_run(b.path());
    for pid in ["P001", "P002", "P003"] {
        for f in common::ARTIFACTS {
            assert_eq!(common::read(&a.path().join(pid).join(f)), common::read(&b.path().join(pid).join(f)), "{pid}/{f}");
        }
    }
}
