mod common;

use std::collections::BTreeSet;

use nutriplan_core::adime::{
    map_to_fhir, map_to_fhir_with_trace, validate_fhir, validate_fhir_value, Action, AdimePlan,
    CodeMappingTable, DiagnosisEntry, FhirOptions, InterventionItem, MonitoringEntry, Supplement,
    REQUIRED_FIELDS,
};
use nutriplan_core::priority::Sigma;
use nutriplan_core::safety::NutrientLimit;
use serde_json::json;

fn table() -> CodeMappingTable {
    CodeMappingTable::load(&common::data_dir().join("fhir_mapping.csv")).unwrap()
}

/// Hand-built plan touching every required mapping row.
fn full_plan() -> AdimePlan {
    let mut plan = AdimePlan::new("C001");
    plan.assessment.diet_patterns.insert("hypertension_diet".into(), "DASH".into());
    plan.assessment.diet_patterns.insert("diabetes_diet".into(), "CarbCount".into());
    plan.diagnosis.issues.push(DiagnosisEntry {
        issue_id: "sbp-high".into(),
        domain_tag: "hypertension".into(),
        rank: 1,
        score: 0.81,
        sigma: Sigma { severity: 0.9, urgency: 0.8, modifiability: 0.6 },
        statement: "Elevated systolic blood pressure".into(),
    });
    plan.diagnosis.nutrient_limits.push(NutrientLimit { nutrient: "sodium".into(), max_amount: 1500.0, unit: "mg/day".into() });
    plan.intervention.items = vec![
        InterventionItem::new(Action::Replace, "unsalted almonds", Some("potato chips".into()), "less sodium").unwrap(),
        InterventionItem::new(Action::Add, "lentil soup", None, "fiber").unwrap(),
    ];
    plan.intervention.supplements.push(Supplement { name: "vitamin d3".into(), reason: "low intake".into() });
    plan.monitoring.push(MonitoringEntry { metric: "blood pressure".into(), frequency: "weekly".into() });
    plan.evaluation.push("SBP under 140 within 12 weeks".into());
    plan
}

#[test]
fn corpus_exercises_all_nine_rows() {
    let table = table();
    assert!(table.missing_required_fields().is_empty());
    let (_, used) = map_to_fhir_with_trace(&full_plan(), &table, &FhirOptions::default()).unwrap();
    let used: BTreeSet<&str> = used.iter().map(String::as_str).collect();
    for field in REQUIRED_FIELDS {
        assert!(used.contains(field), "{field} not exercised");
    }

    let planner = common::planner();
    let mut cohort_used = BTreeSet::new();
    for p in common::cohort() {
        cohort_used.extend(planner.plan_patient(&p).unwrap().mapped_fields);
    }
    for field in REQUIRED_FIELDS {
        assert!(cohort_used.contains(field), "{field} not exercised by the fixture cohort");
    }
}

#[test]
fn every_mapped_order_validates() {
    let order = map_to_fhir(&full_plan(), &table(), &FhirOptions::default()).unwrap();
    let report = validate_fhir(&order);
    assert!(report.is_valid(), "{:?}", report.failures);
    let planner = common::planner();
    for p in common::cohort() {
        let out = planner.plan_patient(&p).unwrap();
        let report = validate_fhir(&out.fhir);
        assert!(report.is_valid(), "{}: {:?}", p.patient_id, report.failures);
    }
}

#[test]
fn dash_maps_to_its_snomed_code() {
    let order = map_to_fhir(&full_plan(), &table(), &FhirOptions::default()).unwrap();
    let v = order.to_value();
    let types = v.pointer("/oralDiet/type").unwrap().as_array().unwrap();
    let dash = types.iter().find(|t| t["text"] == "DASH").unwrap();
    assert_eq!(dash["coding"][0], json!({"system": "http://snomed.info/sct", "code": "182922004", "display": "DASH diet"}));
    assert_eq!(order.priority_code(), Some("urgent"));
}

#[test]
fn three_defects_three_failures() {
    let order = map_to_fhir(&full_plan(), &table(), &FhirOptions::default()).unwrap();
    let mut v = order.to_value();
    v["status"] = json!("finished-ish");
    v["dateTime"] = json!("01/01/2025");
    v["foodPreferenceModifier"][0]["coding"][0]["system"] = json!("");
    let report = validate_fhir_value(&v);
    let paths: Vec<&str> = report.failures.iter().map(|f| f.path.as_str()).collect();
    assert_eq!(paths.len(), 3, "{:?}", report.failures);
    assert!(paths.contains(&"status"));
    assert!(paths.contains(&"dateTime"));
    assert!(paths.contains(&"foodPreferenceModifier[0].coding[0].system"));
}

#[test]
fn unmapped_value_is_a_mapping_error() {
    let mut plan = full_plan();
    plan.monitoring[0].frequency = "whenever".into();
    let err = map_to_fhir(&plan, &table(), &FhirOptions::default()).unwrap_err();
    assert!(err.to_string().contains("whenever"), "{err}");
}
