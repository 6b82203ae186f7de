mod common;

use std::sync::Arc;

use nutriplan_core::orchestrator::{FailingBackend, GenerationSettings, ScriptedBackend, SimulatedBackend, Stage};
use nutriplan_core::profile::parse_profile;
use nutriplan_core::safety::NEGATIVE_BLOCK_HEADER;

#[test]
fn domain_agents_see_only_their_slice() {
    let planner = common::planner();
    let out = planner.plan_patient(&common::cohort()[0]).unwrap();
    for rec in out.transcript.iter().filter(|r| r.stage == Stage::Domain) {
        assert!(!rec.prompt.contains("## CONTEXT INSIGHTS"), "{} saw peer insights", rec.agent_id);
        let has_labels = rec.prompt.contains("## DRUG LABELS");
        assert_eq!(has_labels, rec.agent_id == "medication", "{}", rec.agent_id);
    }
    let body = out.transcript.iter().find(|r| r.agent_id == "body").unwrap();
    assert!(body.prompt.contains("anthropometrics.weight_kg: 88"));
    assert!(!body.prompt.contains("medications"));
    assert!(!body.prompt.contains("systolic_bp"));
}

#[test]
fn specialists_activate_on_matching_issues() {
    let planner = common::planner();
    let cohort = common::cohort();
    let p1 = planner.plan_patient(&cohort[0]).unwrap();
    assert_eq!(p1.bundle.activated_specialists, ["hypertension", "diabetes"]);
    let p3 = planner.plan_patient(&cohort[2]).unwrap();
    assert_eq!(p3.bundle.activated_specialists, ["dyslipidemia"]);
    assert!(p3.transcript.iter().all(|r| r.agent_id != "hypertension"));
}

#[test]
fn report_prompt_carries_the_rendered_block_verbatim() {
    let planner = common::planner();
    for p in common::cohort() {
        let out = planner.plan_patient(&p).unwrap();
        assert!(!out.bundle.c_safe.is_empty());
        let report = out.transcript.iter().find(|r| r.stage == Stage::Report).unwrap();
        assert!(report.prompt.contains(&out.bundle.negative_block), "{}", p.patient_id);
        assert!(out.plan.verification.is_compliant(), "{}: {:?}", p.patient_id, out.plan.verification.hits);
    }
}

#[test]
fn no_constraints_means_no_block() {
    let p = parse_profile(
        r#"{"patient_id":"Q1","anthropometrics":{"height_m":1.8,"weight_kg":70},
            "biomarkers":{"systolic_bp":145},"medications":[],
            "dietary_history":{"items":[{"description":"white bread"}]},"sociodemographics":{}}"#,
    )
    .unwrap();
    let out = common::planner().plan_patient(&p).unwrap();
    assert!(out.bundle.c_safe.is_empty());
    assert_eq!(out.bundle.negative_block, "");
    assert!(out.transcript.iter().all(|r| !r.prompt.contains(NEGATIVE_BLOCK_HEADER)));
}

#[test]
fn reruns_are_identical() {
    let planner = common::planner();
    for p in common::cohort() {
        let a = planner.plan_patient(&p).unwrap();
        let b = planner.plan_patient(&p).unwrap();
        assert_eq!(a.plan_json(), b.plan_json());
        assert_eq!(a.fhir_json(), b.fhir_json());
        assert_eq!(a.bundle_json(), b.bundle_json());
        assert_eq!(a.transcript_jsonl(), b.transcript_jsonl());
    }
}

#[test]
fn transcript_is_ordered_and_stamped() {
    let planner = common::planner();
    let out = planner.plan_patient(&common::cohort()[1]).unwrap();
    for (i, r) in out.transcript.iter().enumerate() {
        assert_eq!(r.seq, i);
        assert_eq!(r.manifest_id, planner.manifest_id());
    }
    let stages: Vec<Stage> = out.transcript.iter().map(|r| r.stage).collect();
    assert!(stages.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(stages.last(), Some(&Stage::Report));
}

#[test]
fn one_failing_agent_aborts_the_patient() {
    let failing = FailingBackend { inner: Arc::new(SimulatedBackend::default()), fail_agent: "diet".into() };
    let planner = common::planner().with_backend(Arc::new(failing));
    let err = planner.plan_patient(&common::cohort()[0]).unwrap_err();
    assert!(err.is_backend());
    assert!(err.to_string().contains("`diet`"), "{err}");
}

#[test]
fn verifier_catches_what_the_report_ignores() {
    let draft = "ASSESSMENT\n- on warfarin\nDIAGNOSIS\nINTERVENTION\n- Add: steamed kale -- leafy green\n- Add: lentils -- fiber\nMONITORING\n- inr: weekly\nEVALUATION\n- stable INR\n";
    let scripted = ScriptedBackend::new(GenerationSettings::default())
        .with_default("report", draft)
        .with_fallback(Arc::new(SimulatedBackend::default()));
    let planner = common::planner().with_backend(Arc::new(scripted));
    let out = planner.plan_patient(&common::cohort()[0]).unwrap();
    let hits: Vec<_> = out.plan.verification.hits.iter().map(|h| (h.food.as_str(), h.term.as_str())).collect();
    assert_eq!(hits, [("steamed kale", "kale")]);
}
