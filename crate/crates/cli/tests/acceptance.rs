//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use nutriplan_cli::commands::{
    cmd_audit, cmd_evaluate, cmd_run, cmd_synth, load_planner, router, AuditArgs, EvaluateArgs, RunArgs, ServeResponse,
    SynthArgs,
};
use nutriplan_core::adime::{
    map_to_fhir_with_trace, validate_fhir, validate_fhir_value, Action, AdimePlan, CodeMappingTable, DiagnosisEntry,
    FhirOptions, InterventionItem, MonitoringEntry, Supplement, REQUIRED_FIELDS,
};
use nutriplan_core::evaluation::{
    actionability_rate, classify_specificity, nutrient_delta, pearson, FoodRecord, NutrientDB, Specificity,
    SpecificityLexicon,
};
use nutriplan_core::orchestrator::{Stage, SynthesisBundle, TranscriptRecord};
use nutriplan_core::priority::{rank_issues, score_issue, HealthIssue, ScoredIssue, Sigma, Weights};
use nutriplan_core::profile::{classify_medications, load_cohort, serialize_profile, DrugClass, FoodItem, MedicationEntry, Nutrient, NutrientVector};
use nutriplan_core::retrieval::{embed_text, fetch_drug_labels, retrieve_top_k, Chunk, HashedBagOfTokens, VectorIndex};
use nutriplan_core::safety::{
    audit_violation_rate, extract_constraints, render_negative_constraints, verify_plan, ExactTokenMatcher,
    NutrientLimit, SafetyConstraint, SafetyConstraintSet,
};
use nutriplan_core::synthetic::synthetic_profile;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(limit: Duration, started: Instant, what: &str) -> Result<Duration, String> {
    let took = started.elapsed();
    ensure!(took < limit, "{what} took {took:.2?}, limit {limit:?}");
    Ok(took)
}

// ---- 1 -------------------------------------------------------------------

fn golden_run(out: &Path) -> Result<(), String> {
    let data = common::data_dir();
    cmd_run(&RunArgs { config: data.join("golden.toml"), cohort: data.join("cohort.json"), out: out.into(), backend: None })
        .map(|_| ())
        .map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let started = Instant::now();
    let data = common::data_dir();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    golden_run(a.path())?;
    golden_run(b.path())?;
    let cohort = load_cohort(&data.join("cohort.json")).map_err(|e| e.to_string())?;
    let mut compared = 0;
    for p in &cohort {
        for f in common::ARTIFACTS {
            let x = common::read(&a.path().join(&p.patient_id).join(f));
            ensure!(x == common::read(&b.path().join(&p.patient_id).join(f)), "{}/{f} differs between runs", p.patient_id);
            common::check_golden(&format!("run/{}/{f}", p.patient_id), &x)?;
            compared += 1;
        }
    }

    let planner = Arc::new(load_planner(&data.join("golden.toml"), None).map_err(|e| e.to_string())?);
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    for p in &cohort {
        let req = Request::post("/v1/plan").body(Body::from(serialize_profile(p))).unwrap();
        let (status, body) = rt.block_on(async {
            let resp = router(Arc::clone(&planner)).oneshot(req).await.unwrap();
            (resp.status(), resp.into_body().collect().await.unwrap().to_bytes())
        });
        ensure!(status == StatusCode::OK, "serve returned {status} for {}", p.patient_id);
        let resp: ServeResponse = serde_json::from_slice(&body).map_err(|e| e.to_string())?;
        let dir = a.path().join(&p.patient_id);
        ensure!(nutriplan_core::canonical_json(&resp.plan) == common::read(&dir.join("plan.json")), "{}: serve plan differs from run", p.patient_id);
        ensure!(resp.fhir.to_canonical_json() == common::read(&dir.join("fhir.json")), "{}: serve FHIR differs from run", p.patient_id);
        ensure!(nutriplan_core::canonical_json(&resp.bundle) == common::read(&dir.join("bundle.json")), "{}: serve bundle differs from run", p.patient_id);
    }
    let took = within(Duration::from_secs(10), started, "golden suite")?;
    Ok(format!("{compared} artifacts identical across 2 runs and goldens; serve == run for {} patients; {took:.2?}", cohort.len()))
}

// ---- 2 -------------------------------------------------------------------

const WORDS: [&str; 40] = [
    "sodium", "potassium", "fiber", "sugar", "protein", "vegetable", "fruit", "grain", "dairy", "fish", "bean",
    "lentil", "nut", "oil", "salt", "blood", "pressure", "glucose", "insulin", "weight", "warfarin", "statin",
    "label", "meal", "portion", "snack", "breakfast", "dinner", "kidney", "heart", "stroke", "cholesterol", "fat",
    "calcium", "magnesium", "sweet", "fried", "whole", "refined", "water",
];

fn random_text(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Exhaustive scan with an independent cosine, sorted by score then id.
fn scan_oracle(entries: &[(Chunk, nutriplan_core::retrieval::EmbeddingVector)], q: &[f64], k: usize) -> Vec<(String, f64)> {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut all: Vec<(String, f64)> = entries
        .iter()
        .map(|(c, v)| {
            let dot: f64 = v.0.iter().zip(q).map(|(a, b)| a * b).sum();
            (c.chunk_id.clone(), (dot / (norm(&v.0) * norm(q))).clamp(-1.0, 1.0))
        })
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn retrieval_exactness() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut instances = 0;
    for round in 0..40 {
        let embedder = HashedBagOfTokens::new(64 + 32 * (round % 4), rng.gen());
        let chunks: Vec<Chunk> = (0..50)
            .map(|i| Chunk { chunk_id: format!("doc{round}#{i:04}"), doc_id: format!("doc{round}"), offset: i * 100, text: random_text(&mut rng, 12) })
            .collect();
        let index = VectorIndex::build(chunks, &embedder).map_err(|e| e.to_string())?;
        for k in [1, 3, 10] {
            let query = embed_text(&embedder, &random_text(&mut rng, 5)).map_err(|e| e.to_string())?;
            let got: Vec<(String, f64)> = retrieve_top_k(&index, &query, k)
                .map_err(|e| e.to_string())?
                .into_iter()
                .map(|(c, s)| (c.chunk_id, s))
                .collect();
            let want = scan_oracle(index.entries(), &query.0, k);
            ensure!(got.len() == want.len(), "round {round} k={k}: {} results, oracle {}", got.len(), want.len());
            for ((gi, gs), (wi, ws)) in got.iter().zip(&want) {
                ensure!(gi == wi && (gs - ws).abs() < 1e-12, "round {round} k={k}: got {got:?}, oracle {want:?}");
            }
            instances += 1;
        }
    }
    let took = within(Duration::from_secs(5), started, "retrieval check")?;
    Ok(format!("{instances} instances (50 chunks, k in 1/3/10) match the exhaustive scan; {took:.2?}"))
}

// ---- 3 -------------------------------------------------------------------

fn priority_properties() -> Outcome {
    let hand = score_issue(
        &Sigma { severity: 0.8, urgency: 0.5, modifiability: 0.2 },
        &Weights { severity: 0.5, urgency: 0.3, modifiability: 0.2 },
    )
    .map_err(|e| e.to_string())?;
    ensure!((hand - 0.59).abs() <= 1e-12, "hand case scored {hand}");

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let unit = |rng: &mut ChaCha8Rng| rng.gen_range(0.0..=1.0);
    for case in 0..1000 {
        let raw = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0f64)];
        let total: f64 = raw.iter().sum::<f64>().max(1e-9);
        let w = Weights { severity: raw[0] / total, urgency: raw[1] / total, modifiability: raw[2] / total };
        let sigma = Sigma { severity: unit(&mut rng), urgency: unit(&mut rng), modifiability: unit(&mut rng) };
        let s = score_issue(&sigma, &w).map_err(|e| e.to_string())?;
        ensure!((0.0..=1.0).contains(&s), "case {case}: S = {s} outside [0, 1]");

        let bumps = [
            Sigma { severity: rng.gen_range(sigma.severity..=1.0), ..sigma },
            Sigma { urgency: rng.gen_range(sigma.urgency..=1.0), ..sigma },
            Sigma { modifiability: rng.gen_range(sigma.modifiability..=1.0), ..sigma },
        ];
        for (i, b) in bumps.iter().enumerate() {
            let sb = score_issue(b, &w).map_err(|e| e.to_string())?;
            ensure!(sb >= s, "case {case}: raising component {i} lowered S from {s} to {sb}");
        }

        let issues: Vec<ScoredIssue> = (0..5)
            .map(|j| {
                let sg = Sigma { severity: unit(&mut rng), urgency: unit(&mut rng), modifiability: unit(&mut rng) };
                ScoredIssue {
                    issue: HealthIssue { issue_id: format!("i{j}"), domain_tag: "x".into(), raw_severity: 0.0, raw_urgency: 0.0, raw_modifiability: 0.0 },
                    sigma: sg,
                    score: 0.0,
                }
            })
            .collect();
        let order = |w: &Weights| -> Vec<String> {
            let scored = issues
                .iter()
                .map(|i| ScoredIssue { score: score_issue(&i.sigma, w).unwrap(), ..i.clone() })
                .collect();
            rank_issues(scored).into_iter().map(|i| i.issue.issue_id).collect()
        };
        let base = order(&w);
        for c in [0.1, 10.0] {
            ensure!(order(&w.scaled(c)) == base, "case {case}: ranking changed under weight scale {c}");
        }
    }
    Ok("hand case 0.59; 1000 random cases bounded, monotone, scale-invariant".into())
}

// ---- 4 -------------------------------------------------------------------

const SAFE_FOODS: [&str; 8] = ["oatmeal", "brown rice", "lentils", "salmon", "apple", "carrots", "greek yogurt", "quinoa"];

fn warfarin_entries(seed: u64, n_bad: usize) -> Result<Vec<(AdimePlan, nutriplan_core::profile::PatientProfile)>, String> {
    let planner = load_planner(&common::data_dir().join("config.toml"), None).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..10)
        .map(|i| {
            let id = format!("W{i:02}");
            let mut profile = synthetic_profile(&mut rng, &id);
            profile.medications = vec![MedicationEntry::new("Warfarin 5 mg").unwrap()];
            profile.medications = classify_medications(&profile.medications, &planner.resources().class_table);
            let mut foods: Vec<&str> = SAFE_FOODS.choose_multiple(&mut rng, 3).copied().collect();
            if i < n_bad {
                foods.push(*["spinach", "kale"].choose(&mut rng).unwrap());
            }
            (AdimePlan::with_added_foods(&id, &foods), profile)
        })
        .collect())
}

fn safety_gate() -> Outcome {
    let planner = load_planner(&common::data_dir().join("config.toml"), None).map_err(|e| e.to_string())?;
    let res = planner.resources();
    let labels_for = |entries: &[(AdimePlan, nutriplan_core::profile::PatientProfile)]| {
        let meds: Vec<MedicationEntry> = entries.iter().flat_map(|(_, p)| p.medications.clone()).collect();
        fetch_drug_labels(&meds, res.labels.as_ref(), &res.label_patterns).map(|f| f.labels).map_err(|e| e.to_string())
    };

    let bad = warfarin_entries(41, 10)?;
    let labels = labels_for(&bad)?;
    let flagged = bad
        .iter()
        .filter(|(plan, p)| {
            let c = extract_constraints(None, &p.medications, &labels, &res.rules);
            !verify_plan(plan, &c, planner.epsilon(), &ExactTokenMatcher).is_compliant()
        })
        .count();
    ensure!(flagged == 10, "{flagged}/10 seeded violations flagged");

    let good = warfarin_entries(42, 0)?;
    let false_pos = good
        .iter()
        .filter(|(plan, p)| {
            let c = extract_constraints(None, &p.medications, &labels, &res.rules);
            !verify_plan(plan, &c, planner.epsilon(), &ExactTokenMatcher).is_compliant()
        })
        .count();
    ensure!(false_pos == 0, "{false_pos} false positives on compliant plans");

    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let vocab: Vec<&str> = SAFE_FOODS.iter().copied().chain(["spinach", "kale", "banana", "grapefruit"]).collect();
    for case in 0..200 {
        let n_foods = rng.gen_range(1..6);
        let foods: Vec<&str> = vocab.choose_multiple(&mut rng, n_foods).copied().collect();
        let terms = |rng: &mut ChaCha8Rng| -> Vec<String> {
            let n = rng.gen_range(0..5);
            vocab.choose_multiple(rng, n).map(|s| s.to_string()).collect()
        };
        let c = |drug: &str, t: Vec<String>| SafetyConstraint {
            drug: drug.into(),
            contraindicated_terms: t,
            nutrient_limit: None,
            source_ref: "rand".into(),
            mechanism_note: String::new(),
        };
        let (t1, t2) = (terms(&mut rng), terms(&mut rng));
        let small = SafetyConstraintSet::from_constraints([c("warfarin", t1.clone())]);
        let large = SafetyConstraintSet::from_constraints([c("warfarin", t1), c("statin", t2)]);
        let plan = AdimePlan::with_added_foods("R", &foods);
        let a = verify_plan(&plan, &small, 0.5, &ExactTokenMatcher);
        let b = verify_plan(&plan, &large, 0.5, &ExactTokenMatcher);
        ensure!(a.hits.iter().all(|h| b.hits.contains(h)), "case {case}: a larger constraint set lost a violation");
    }

    let seeded = warfarin_entries(43, 3)?;
    let table = audit_violation_rate(&seeded, &res.rules, &labels_for(&seeded)?, planner.epsilon(), &ExactTokenMatcher);
    let w = table.row(DrugClass::Warfarin).ok_or("no warfarin row")?;
    ensure!((w.evaluated, w.violations) == (10, 3), "audit counted {}/{}", w.violations, w.evaluated);
    ensure!(w.rate_percent == Some(30.0), "audit rate {:?}", w.rate_percent);
    ensure!(table.render_text().contains("30.0%"), "rendered table lacks 30.0%");
    Ok("10/10 flagged, 0/10 false positives, 200 monotone cases, audit 3/10 = 30.0%".into())
}

// ---- 5 -------------------------------------------------------------------

fn hard_negative_injection() -> Outcome {
    let cohort = load_cohort(&common::data_dir().join("cohort.json")).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for p in &cohort {
        let dir = common::golden_dir().join("run").join(&p.patient_id);
        let bundle: SynthesisBundle = serde_json::from_str(&common::read(&dir.join("bundle.json"))).map_err(|e| e.to_string())?;
        if bundle.c_safe.is_empty() {
            continue;
        }
        let block = render_negative_constraints(&bundle.c_safe);
        ensure!(!block.is_empty(), "{}: non-empty C_safe rendered to nothing", p.patient_id);
        let report: TranscriptRecord = common::read(&dir.join("transcript.jsonl"))
            .lines()
            .map(|l| serde_json::from_str::<TranscriptRecord>(l).unwrap())
            .find(|r| r.stage == Stage::Report)
            .ok_or_else(|| format!("{}: no report record", p.patient_id))?;
        ensure!(report.prompt.contains(&block), "{}: report prompt lacks the rendered block", p.patient_id);
        checked += 1;
    }
    ensure!(checked > 0, "golden suite has no non-empty constraint set");
    Ok(format!("{checked}/{} golden patients carry the rendered block verbatim in the report prompt", cohort.len()))
}

// ---- 6 -------------------------------------------------------------------

fn conformance_plan() -> AdimePlan {
    let mut plan = AdimePlan::new("C001");
    plan.assessment.diet_patterns.insert("hypertension_diet".into(), "DASH".into());
    plan.assessment.diet_patterns.insert("diabetes_diet".into(), "CarbCount".into());
    plan.diagnosis.issues.push(DiagnosisEntry {
        issue_id: "hypertension".into(),
        domain_tag: "hypertension".into(),
        rank: 1,
        score: 0.8,
        sigma: Sigma { severity: 0.9, urgency: 0.8, modifiability: 0.6 },
        statement: "Excessive sodium intake".into(),
    });
    plan.diagnosis.nutrient_limits.push(NutrientLimit { nutrient: "sodium".into(), max_amount: 1500.0, unit: "mg/d".into() });
    plan.intervention.items = vec![
        InterventionItem::new(Action::Replace, "unsalted almonds", Some("potato chips".into()), "less sodium").unwrap(),
        InterventionItem::new(Action::Add, "lentils", None, "fiber").unwrap(),
    ];
    plan.intervention.supplements.push(Supplement { name: "vitamin d3".into(), reason: "low intake".into() });
    plan.monitoring.push(MonitoringEntry { metric: "blood pressure".into(), frequency: "weekly".into() });
    plan
}

fn fhir_conformance() -> Outcome {
    let data = common::data_dir();
    let table = CodeMappingTable::load(&data.join("fhir_mapping.csv")).map_err(|e| e.to_string())?;
    let planner = load_planner(&data.join("golden.toml"), None).map_err(|e| e.to_string())?;
    let mut used = BTreeSet::new();
    let mut orders = Vec::new();
    for p in load_cohort(&data.join("cohort.json")).map_err(|e| e.to_string())? {
        let out = planner.plan_patient(&p).map_err(|e| e.to_string())?;
        used.extend(out.mapped_fields.clone());
        orders.push(out.fhir);
    }
    let (order, trace) = map_to_fhir_with_trace(&conformance_plan(), &table, &FhirOptions::default()).map_err(|e| e.to_string())?;
    used.extend(trace);
    orders.push(order.clone());
    let missing: Vec<&str> = REQUIRED_FIELDS.iter().copied().filter(|f| !used.contains(*f)).collect();
    ensure!(missing.is_empty(), "mapping rows never exercised: {missing:?}");
    for o in &orders {
        let r = validate_fhir(o);
        ensure!(r.is_valid(), "{}: {:?}", o.id, r.failures);
    }

    let v = order.to_value();
    let dash = v
        .pointer("/oralDiet/type")
        .and_then(|t| t.as_array())
        .and_then(|t| t.iter().find(|c| c["text"] == "DASH"))
        .ok_or("no DASH diet type")?;
    ensure!(dash["coding"][0]["system"] == "http://snomed.info/sct" && dash["coding"][0]["code"] == "182922004", "DASH coded as {}", dash["coding"][0]);

    let mut bad = v.clone();
    bad["intent"] = serde_json::json!("wish");
    bad["patient"]["reference"] = serde_json::json!("");
    bad["oralDiet"]["schedule"][0]["repeat"]["periodUnit"] = serde_json::json!("fortnight");
    let failures = validate_fhir_value(&bad).failures;
    ensure!(failures.len() == 3, "3 defects gave {} failures: {failures:?}", failures.len());
    Ok(format!("9/9 rows exercised; {} orders valid; DASH -> 182922004; 3 defects -> 3 failures", orders.len()))
}

// ---- 7 -------------------------------------------------------------------

fn evaluation_anchors() -> Outcome {
    let v = |e, na, su, k, fi| NutrientVector { energy_kcal: e, sodium_mg: na, sugars_g: su, fat_g: 0.0, potassium_mg: k, fiber_g: fi };
    let db = NutrientDB::new([
        FoodRecord { food_code: "B".into(), name: "usual intake".into(), nutrients: v(195.27, 219.38, 10.6, 214.1, 1.67) },
        FoodRecord { food_code: "A".into(), name: "recommended foods".into(), nutrients: v(179.75, 200.21, 9.38, 271.74, 4.46) },
    ])
    .map_err(|e| e.to_string())?;
    let original = [FoodItem { description: "usual intake".into(), food_code: None, nutrients: None }];
    let delta = nutrient_delta(&original, &["recommended foods"], &db).map_err(|e| e.to_string())?;
    let anchors = [
        (Nutrient::Energy, -8.0),
        (Nutrient::Sodium, -9.0),
        (Nutrient::Sugars, -12.0),
        (Nutrient::Potassium, 27.0),
        (Nutrient::Fiber, 167.0),
    ];
    let mut shown = Vec::new();
    for (n, reported) in anchors {
        let row = delta.rows.iter().find(|r| r.nutrient == n).ok_or("missing row")?;
        let oracle = (row.after - row.before) / row.before * 100.0;
        let got = row.change_percent.ok_or("NA change")?;
        ensure!((got - oracle).abs() < 1e-9, "{n:?}: {got} vs oracle {oracle}");
        ensure!((got - reported).abs() <= 0.5, "{n:?}: {got:.2}% vs reported {reported}%");
        shown.push(row.display.clone());
    }

    for (xs, ys, r) in [(vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 3.0, 2.0, 4.0], 0.8), (vec![1.0, 2.0, 3.0], vec![6.0, 4.0, 2.0], -1.0)] {
        let got = pearson(&xs, &ys).map_err(|e| e.to_string())?;
        ensure!((got - r).abs() < 1e-9, "pearson({xs:?}, {ys:?}) = {got}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..1000 {
        let n = rng.gen_range(3..30);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let (a, b) = (rng.gen_range(0.01..50.0), rng.gen_range(-100.0..100.0));
        let moved: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let (r0, r1) = (pearson(&xs, &ys).map_err(|e| e.to_string())?, pearson(&moved, &ys).map_err(|e| e.to_string())?);
        ensure!((r0 - r1).abs() < 1e-9, "case {case}: r changed from {r0} to {r1} under affine map");
        ensure!(r0.abs() <= 1.0, "case {case}: |r| = {}", r0.abs());
    }
    Ok(format!("deltas {}; pearson hand cases exact; 1000 affine cases invariant", shown.join(" ")))
}

// ---- 8 -------------------------------------------------------------------

fn actionability() -> Outcome {
    let lex = SpecificityLexicon::default();
    let plans = [
        AdimePlan::with_added_foods("A", &["grilled salmon", "spinach"]),
        AdimePlan::with_added_foods("B", &["steel-cut oats", "more protein"]),
    ];
    let rate = actionability_rate(&plans, &lex).map_err(|e| e.to_string())?;
    ensure!(rate == 0.75, "rate {rate}");
    for (food, want) in [
        ("grilled salmon", Specificity::Specific),
        ("spinach", Specificity::Specific),
        ("healthy foods", Specificity::Generic),
        ("more protein", Specificity::Generic),
    ] {
        let got = classify_specificity(food, &lex);
        ensure!(got == want, "`{food}` classified {got:?}");
    }
    Ok("1 generic of 4 -> 0.75; four exemplars classified".into())
}

// ---- 9 -------------------------------------------------------------------

fn scale_smoke() -> Outcome {
    let data = common::data_dir();
    let tmp = tempfile::tempdir().unwrap();
    let cohort = tmp.path().join("cohort.json");
    cmd_synth(&SynthArgs { n: 330, seed: 330, out: cohort.clone() }).map_err(|e| e.to_string())?;
    let out = tmp.path().join("run");

    let started = Instant::now();
    let manifest = cmd_run(&RunArgs { config: data.join("config.toml"), cohort: cohort.clone(), out: out.clone(), backend: None })
        .map_err(|e| e.to_string())?;
    let run = within(Duration::from_secs(60), started, "run")?;
    ensure!(manifest.patients.len() == 330, "{} patients in manifest", manifest.patients.len());

    let started = Instant::now();
    let audit = cmd_audit(&AuditArgs { plans: out.clone(), cohort: cohort.clone(), config: Some(data.join("config.toml")), ..Default::default() })
        .map_err(|e| e.to_string())?;
    let audit_t = within(Duration::from_secs(10), started, "audit")?;
    ensure!(audit.table.overall.evaluated + audit.table.overall.not_evaluated > 0, "audit saw no plans");

    let started = Instant::now();
    cmd_evaluate(&EvaluateArgs {
        plans: out,
        cohort,
        config: Some(data.join("config.toml")),
        nutrient_db: Some(data.join("nutrients.csv")),
        quality_table: Some(data.join("food_quality.csv")),
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let eval_t = within(Duration::from_secs(10), started, "evaluate")?;
    Ok(format!("330 patients: run {run:.2?}, audit {audit_t:.2?}, evaluate {eval_t:.2?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("determinism golden suite", determinism),
        ("retrieval exactness", retrieval_exactness),
        ("priority scoring properties", priority_properties),
        ("safety gate soundness", safety_gate),
        ("hard-negative injection", hard_negative_injection),
        ("FHIR conformance", fhir_conformance),
        ("evaluation math anchors", evaluation_anchors),
        ("actionability metric", actionability),
        ("scale smoke test", scale_smoke),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
