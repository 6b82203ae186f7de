mod common;

use nutriplan_core::adime::AdimePlan;
use nutriplan_core::profile::{classify_medications, DrugClass, MedicationEntry, PatientProfile};
use nutriplan_core::retrieval::{fetch_drug_labels, DrugLabel};
use nutriplan_core::safety::{
    audit_violation_rate, extract_constraints, verify_plan, ExactTokenMatcher, SafetyConstraint,
    SafetyConstraintSet,
};
use nutriplan_core::synthetic::synthetic_profile;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SAFE_FOODS: [&str; 8] =
    ["oatmeal", "brown rice", "lentils", "salmon", "apple", "carrots", "greek yogurt", "quinoa"];

/// Synthetic warfarin patients: the first `n_bad` plans carry spinach or kale
/// among safe foods, the rest only safe foods.
fn warfarin_cohort(seed: u64, n: usize, n_bad: usize) -> Vec<(AdimePlan, PatientProfile)> {
    let planner = common::planner();
    let table = &planner.resources().class_table;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let id = format!("W{i:02}");
            let mut profile = synthetic_profile(&mut rng, &id);
            profile.medications.push(MedicationEntry::new("Warfarin 5 mg").unwrap());
            profile.medications = classify_medications(&profile.medications, table);
            let mut foods: Vec<&str> = SAFE_FOODS.choose_multiple(&mut rng, 3).copied().collect();
            if i < n_bad {
                foods.push(*["spinach", "kale"].choose(&mut rng).unwrap());
                foods.shuffle(&mut rng);
            }
            (AdimePlan::with_added_foods(&id, &foods), profile)
        })
        .collect()
}

fn labels_for(entries: &[(AdimePlan, PatientProfile)]) -> Vec<DrugLabel> {
    let planner = common::planner();
    let res = planner.resources();
    let meds: Vec<MedicationEntry> = entries.iter().flat_map(|(_, p)| p.medications.clone()).collect();
    fetch_drug_labels(&meds, res.labels.as_ref(), &res.label_patterns).unwrap().labels
}

fn c_safe_for(profile: &PatientProfile, labels: &[DrugLabel]) -> SafetyConstraintSet {
    let planner = common::planner();
    extract_constraints(None, &profile.medications, labels, &planner.resources().rules)
}

#[test]
fn every_seeded_violation_is_flagged() {
    let entries = warfarin_cohort(11, 10, 10);
    let labels = labels_for(&entries);
    for (plan, profile) in &entries {
        let report = verify_plan(plan, &c_safe_for(profile, &labels), 0.5, &ExactTokenMatcher);
        assert!(!report.is_compliant(), "{} not flagged", plan.patient_id);
        assert!(report.hits.iter().all(|h| h.term == "spinach" || h.term == "kale"));
    }
}

#[test]
fn compliant_plans_raise_nothing() {
    let entries = warfarin_cohort(12, 10, 0);
    let labels = labels_for(&entries);
    for (plan, profile) in &entries {
        let report = verify_plan(plan, &c_safe_for(profile, &labels), 0.5, &ExactTokenMatcher);
        assert!(report.evaluated && report.is_compliant(), "{:?}", report.hits);
    }
}

#[test]
fn audit_reproduces_designed_counts() {
    let entries = warfarin_cohort(13, 10, 3);
    let labels = labels_for(&entries);
    let planner = common::planner();
    let table = audit_violation_rate(&entries, &planner.resources().rules, &labels, 0.5, &ExactTokenMatcher);
    let w = table.row(DrugClass::Warfarin).unwrap();
    assert_eq!((w.evaluated, w.not_evaluated, w.violations), (10, 0, 3));
    assert_eq!(w.rate_percent, Some(30.0));
    assert!(table.render_text().contains("30.0%"));
}

#[test]
fn fixture_cohort_plans_pass_the_audit() {
    let planner = common::planner();
    let table = planner.resources().class_table.clone();
    let mut entries = Vec::new();
    for mut p in common::cohort() {
        let out = planner.plan_patient(&p).unwrap();
        p.medications = classify_medications(&p.medications, &table);
        entries.push((out.plan.plan, p));
    }
    let labels = labels_for(&entries);
    let t = audit_violation_rate(&entries, &planner.resources().rules, &labels, 0.5, &ExactTokenMatcher);
    assert_eq!(t.overall.evaluated, 3);
    assert_eq!(t.overall.violations, 0);
}

fn constraint(drug: &str, terms: &[String]) -> SafetyConstraint {
    SafetyConstraint {
        drug: drug.to_string(),
        contraindicated_terms: terms.to_vec(),
        nutrient_limit: None,
        source_ref: "test".into(),
        mechanism_note: String::new(),
    }
}

const VOCAB: [&str; 12] = [
    "spinach", "kale", "banana", "grapefruit", "oatmeal", "salmon", "lentils", "avocado",
    "tomato", "broccoli", "apple", "rice",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn more_constraints_never_fewer_violations(
        foods in proptest::sample::subsequence(VOCAB.to_vec(), 1..6),
        base in proptest::sample::subsequence(VOCAB.to_vec(), 0..5),
        extra in proptest::sample::subsequence(VOCAB.to_vec(), 1..5),
    ) {
        let plan = AdimePlan::with_added_foods("X", &foods);
        let base: Vec<String> = base.iter().map(|s| s.to_string()).collect();
        let extra: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
        let small = SafetyConstraintSet::from_constraints([constraint("warfarin", &base)]);
        let large = SafetyConstraintSet::from_constraints([
            constraint("warfarin", &base),
            constraint("atorvastatin", &extra),
        ]);
        let a = verify_plan(&plan, &small, 0.5, &ExactTokenMatcher);
        let b = verify_plan(&plan, &large, 0.5, &ExactTokenMatcher);
        prop_assert!(b.hits.len() >= a.hits.len());
        for h in &a.hits {
            prop_assert!(b.hits.contains(h));
        }
    }
}
