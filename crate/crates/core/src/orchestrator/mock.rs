//! Rule-based stand-in for a language model.
//!
//! It reads the labeled prompt sections the pipeline writes and answers in
//! the response formats the parsers expect, using small built-in clinical
//! tables. Output depends only on the request text, so runs are reproducible
//! and the backend is safe to call from several threads.

use std::collections::{BTreeMap, BTreeSet};

use super::backend::{BackendError, GenerationBackend, GenerationRequest, GenerationSettings};
use crate::text::{contains_token_run, term_tokens};

/// Food and nutrient terms the simulated pharmacist recognizes in label text.
const INTERACTION_TERMS: [&str; 22] = [
    "spinach",
    "kale",
    "broccoli",
    "brussels sprout",
    "collard green",
    "swiss chard",
    "turnip green",
    "mustard green",
    "parsley",
    "green tea",
    "vitamin k",
    "cranberry",
    "grapefruit",
    "pomelo",
    "seville orange",
    "banana",
    "avocado",
    "tomato",
    "potato",
    "orange juice",
    "salt substitute",
    "alcohol",
];

const SWAPS: [(&str, &str, &str); 11] = [
    ("white bread", "whole wheat bread", "more fiber and a lower glycemic load"),
    ("white rice", "brown rice", "whole grain with more fiber"),
    ("soda", "sparkling water", "removes added sugars"),
    ("potato chips", "unsalted almonds", "less sodium, more unsaturated fat"),
    ("bacon", "grilled chicken breast", "lower sodium and saturated fat"),
    ("fried chicken", "baked chicken breast", "less fat from frying"),
    ("canned soup", "low-sodium lentil soup", "cuts sodium and adds fiber"),
    ("butter", "olive oil", "replaces saturated with unsaturated fat"),
    ("ice cream", "low-fat yogurt", "less saturated fat and sugar"),
    ("sweetened cereal", "steel-cut oats", "less added sugar, more fiber"),
    ("french fries", "baked sweet potato", "less fat from frying"),
];

const KEEP: [&str; 21] = [
    "oatmeal",
    "salmon",
    "grilled salmon",
    "apple",
    "banana",
    "spinach",
    "brown rice",
    "black beans",
    "lentils",
    "low-fat yogurt",
    "broccoli",
    "walnuts",
    "unsalted almonds",
    "chicken breast",
    "orange",
    "blueberries",
    "carrots",
    "eggs",
    "whole wheat bread",
    "olive oil",
    "kale",
];

/// Knowledge a condition specialist contributes, as finding lines.
fn specialist_lines(domain: &str) -> &'static [&'static str] {
    match domain {
        "hypertension" => &[
            "pattern: hypertension_diet=DASH",
            "limit: sodium 1500 mg/d",
            "suggest add: spinach -- potassium and magnesium support blood pressure control",
            "suggest add: banana -- potassium-rich fruit central to the DASH pattern",
            "suggest add: unsalted almonds -- magnesium-rich snack without added salt",
            "suggest add: low-fat yogurt -- calcium source within the DASH pattern",
            "monitor: blood pressure: weekly",
            "goal: systolic blood pressure below 130 mmHg within 3 months",
        ],
        "diabetes" => &[
            "pattern: diabetes_diet=CarbCount",
            "limit: added sugars 25 g/d",
            "suggest add: lentils -- fiber-rich protein with a low glycemic index",
            "suggest add: steel-cut oats -- whole-grain carbohydrate with slower absorption",
            "suggest add: broccoli -- non-starchy vegetable for volume and fiber",
            "monitor: hba1c: every 3 months",
            "goal: HbA1c below 7.0% at the next quarterly check",
        ],
        "dyslipidemia" => &[
            "limit: saturated fat 13 g/d",
            "suggest add: walnuts -- omega-3 fatty acids and plant sterols",
            "suggest add: grilled salmon -- omega-3 protein replacing fatty meats",
            "suggest add: grapefruit -- soluble fiber from citrus pectin",
            "monitor: lipid panel: every 6 months",
            "goal: total cholesterol below 200 mg/dL within 6 months",
        ],
        _ => &[],
    }
}

fn pes_statement(domain: &str) -> String {
    match domain {
        "hypertension" => "Excessive sodium intake related to a high-sodium dietary pattern as evidenced by elevated systolic blood pressure".into(),
        "diabetes" => "Inconsistent carbohydrate intake related to refined-carbohydrate food choices as evidenced by elevated HbA1c".into(),
        "dyslipidemia" => "Excessive saturated fat intake related to food choices as evidenced by elevated total cholesterol".into(),
        "obesity" => "Excessive energy intake related to dietary pattern as evidenced by elevated BMI".into(),
        "diet" => "Suboptimal diet quality related to food selection as evidenced by the dietary record".into(),
        other => format!("Nutrition-related risk related to {other} as evidenced by assessment findings"),
    }
}

/// Splits a prompt body into `## NAME` sections.
fn sections(body: &str) -> BTreeMap<String, Vec<&str>> {
    let mut out: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    let mut current = String::new();
    for line in body.lines() {
        if let Some(name) = line.strip_prefix("## ") {
            current = name.trim().to_string();
            out.entry(current.clone()).or_default();
        } else if line.starts_with("DO NOT RECOMMEND") {
            current = "DO NOT RECOMMEND".into();
            out.entry(current.clone()).or_default();
        } else if !current.is_empty() {
            out.entry(current.clone()).or_default().push(line);
        }
    }
    out
}

fn kv_lines<'a>(lines: &[&'a str]) -> BTreeMap<&'a str, &'a str> {
    lines
        .iter()
        .filter_map(|l| l.split_once(": "))
        .map(|(k, v)| (k.trim(), v.trim()))
        .collect()
}

fn num(data: &BTreeMap<&str, &str>, key: &str) -> Option<f64> {
    data.get(key).and_then(|v| v.parse().ok())
}

fn fmt(x: f64) -> String {
    let r = (x * 100.0).round() / 100.0;
    format!("{r}")
}

#[derive(Default)]
struct Reply {
    findings: Vec<String>,
    issues: Vec<String>,
    constraints: Vec<String>,
    evidence: Vec<String>,
}

impl Reply {
    fn issue(&mut self, id: &str, domain: &str, severity: f64, urgency: f64, modifiability: f64) {
        self.issues.push(format!(
            "id={id}; domain={domain}; severity={}; urgency={}; modifiability={}",
            fmt(severity),
            fmt(urgency),
            fmt(modifiability)
        ));
    }

    fn render(&self) -> String {
        let mut s = String::new();
        for (name, lines) in [
            ("FINDINGS", &self.findings),
            ("ISSUES", &self.issues),
            ("CONSTRAINTS", &self.constraints),
            ("EVIDENCE", &self.evidence),
        ] {
            s.push_str(name);
            s.push('\n');
            for l in lines {
                s.push_str(&format!("- {l}\n"));
            }
        }
        s
    }
}

fn evidence_ids(secs: &BTreeMap<String, Vec<&str>>) -> Vec<String> {
    let mut ids = Vec::new();
    for key in ["EVIDENCE", "DRUG LABELS"] {
        for l in secs.get(key).into_iter().flatten() {
            if let Some(id) = l.strip_prefix('[').and_then(|r| r.split_once(']')).map(|(id, _)| id) {
                if id != "missing" && !ids.iter().any(|x| x == id) {
                    ids.push(id.to_string());
                }
            }
        }
    }
    ids
}

fn body_agent(data: &BTreeMap<&str, &str>, r: &mut Reply) {
    let bmi = num(data, "anthropometrics.bmi").or_else(|| {
        let h = num(data, "anthropometrics.height_m")?;
        let w = num(data, "anthropometrics.weight_kg")?;
        Some(w / (h * h))
    });
    match bmi {
        Some(b) => {
            let cat = match b {
                b if b >= 30.0 => "obese range",
                b if b >= 25.0 => "overweight range",
                b if b >= 18.5 => "healthy range",
                _ => "underweight range",
            };
            r.findings.push(format!("BMI {:.1} is in the {cat}", b));
            if b >= 25.0 {
                let urgency = if b >= 35.0 { 6.0 } else if b >= 30.0 { 5.0 } else { 3.0 };
                r.issue("obesity", "obesity", b, urgency, 7.0);
                r.findings.push("monitor: body weight: weekly".into());
                r.findings.push("goal: 5% body weight reduction over 6 months".into());
            }
        }
        None => r.findings.push("BMI not available".into()),
    }
    if let Some(age) = num(data, "sociodemographics.age") {
        r.findings.push(format!("age {age}"));
        if age >= 65.0 {
            r.findings.push("suggest supplement: vitamin d3 -- bone health in older adults".into());
        }
    }
}

fn clinical_agent(data: &BTreeMap<&str, &str>, r: &mut Reply) {
    if let Some(sbp) = num(data, "biomarkers.systolic_bp") {
        r.findings.push(format!("systolic blood pressure {sbp} mmHg"));
        if sbp >= 130.0 {
            let urgency = if sbp >= 160.0 { 8.0 } else if sbp >= 140.0 { 6.0 } else { 4.0 };
            r.issue("hypertension", "hypertension", sbp, urgency, 8.0);
        }
    }
    let hba1c = num(data, "biomarkers.hba1c");
    let glucose = num(data, "biomarkers.glucose");
    if let Some(g) = glucose {
        r.findings.push(format!("fasting glucose {g} mg/dL"));
    }
    if let Some(a) = hba1c {
        r.findings.push(format!("HbA1c {a}%"));
    }
    // glucose-only patients get an HbA1c estimate from the ADAG regression
    let a1c = hba1c.or_else(|| glucose.map(|g| (g + 46.7) / 28.7));
    if let Some(a) = a1c {
        if a >= 5.7 || glucose.is_some_and(|g| g >= 100.0) {
            let urgency = if a >= 9.0 { 8.0 } else if a >= 6.5 { 6.0 } else { 3.0 };
            r.issue("diabetes", "diabetes", a, urgency, 7.0);
        }
    }
    if let Some(tc) = num(data, "biomarkers.total_cholesterol") {
        r.findings.push(format!("total cholesterol {tc} mg/dL"));
        if tc >= 200.0 {
            let urgency = if tc >= 240.0 { 5.0 } else { 3.0 };
            r.issue("dyslipidemia", "dyslipidemia", tc, urgency, 6.0);
        }
    }
    if r.issues.is_empty() {
        r.findings.push("no biomarker outside target range".into());
    }
}

fn medication_agent(data: &BTreeMap<&str, &str>, labels: &[&str], r: &mut Reply) {
    let meds: Vec<&str> = data
        .iter()
        .filter(|(k, _)| k.starts_with("medications[") && k.ends_with(".name"))
        .map(|(_, v)| *v)
        .collect();
    if meds.is_empty() {
        r.findings.push("no current medications".into());
        return;
    }
    for med in meds {
        let id = format!("label:{med}");
        let texts: Vec<&str> = labels
            .iter()
            .filter_map(|l| l.strip_prefix(&format!("[{id}] ")))
            .collect();
        if texts.is_empty() {
            r.findings.push(format!("{med}: no food-relevant label text available"));
            continue;
        }
        let tokens = term_tokens(&texts.join(" "));
        let found: Vec<&str> = INTERACTION_TERMS
            .iter()
            .copied()
            .filter(|t| contains_token_run(&tokens, &term_tokens(t)))
            .collect();
        r.findings.push(format!("{med}: label reviewed, {} food interaction term(s)", found.len()));
        if !found.is_empty() {
            r.constraints.push(format!(
                "drug={med}; avoid={}; note=named in the {med} label; source={id}",
                found.join(", ")
            ));
        }
    }
}

fn diet_agent(data: &BTreeMap<&str, &str>, r: &mut Reply) {
    let foods: Vec<&str> = data
        .iter()
        .filter(|(k, _)| k.starts_with("dietary_history.items[") && k.ends_with(".description"))
        .map(|(_, v)| *v)
        .collect();
    if foods.is_empty() {
        r.findings.push("no dietary record".into());
        return;
    }
    r.findings.push(format!("recorded foods: {}", foods.join(", ")));
    for f in &foods {
        let lf = f.to_lowercase();
        if let Some((old, new, why)) = SWAPS.iter().find(|(old, _, _)| *old == lf) {
            r.findings.push(format!("suggest replace: {old} -> {new} -- {why}"));
        } else if KEEP.contains(&lf.as_str()) {
            r.findings.push(format!("suggest continue: {lf} -- already a nutrient-dense choice"));
        }
    }
    let mean = |suffix: &str| {
        let vals: Vec<f64> = data
            .iter()
            .filter(|(k, _)| k.starts_with("dietary_history.items[") && k.ends_with(suffix))
            .filter_map(|(_, v)| v.parse().ok())
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    if let Some(na) = mean(".nutrients.sodium_mg") {
        if na > 400.0 {
            r.findings.push(format!("mean sodium {:.0} mg per recorded food", na));
            r.issue("excess_sodium", "diet", (na / 100.0).min(10.0), 5.0, 8.0);
        }
    }
    if let Some(fiber) = mean(".nutrients.fiber_g") {
        if fiber < 2.0 {
            r.findings.push(format!("mean fiber {:.1} g per recorded food", fiber));
            r.issue("low_fiber", "diet", 6.0, 3.0, 9.0);
        }
    }
}

fn domain_reply(domain: &str, secs: &BTreeMap<String, Vec<&str>>) -> String {
    let data = kv_lines(secs.get("PATIENT DATA").map(Vec::as_slice).unwrap_or_default());
    let mut r = Reply::default();
    match domain {
        "body" => body_agent(&data, &mut r),
        "clinical" => clinical_agent(&data, &mut r),
        "medication" => medication_agent(
            &data,
            secs.get("DRUG LABELS").map(Vec::as_slice).unwrap_or_default(),
            &mut r,
        ),
        "diet" => diet_agent(&data, &mut r),
        other => r.findings.push(format!("no assessment rules for domain {other}")),
    }
    r.evidence = evidence_ids(secs);
    r.render()
}

fn refine_reply(domain: &str, secs: &BTreeMap<String, Vec<&str>>) -> String {
    let mut r = Reply::default();
    let lines = specialist_lines(domain);
    if lines.is_empty() {
        r.findings.push(format!("no specialist rules for {domain}"));
    }
    r.findings.extend(lines.iter().map(|s| s.to_string()));
    let seen = secs.get("CONTEXT INSIGHTS").map_or(0, |ls| ls.iter().filter(|l| l.starts_with("### ")).count());
    r.findings.push(format!("reviewed {seen} prior insight(s)"));
    r.evidence = evidence_ids(secs);
    r.render()
}

fn prioritize_reply(secs: &BTreeMap<String, Vec<&str>>) -> String {
    let mut r = Reply::default();
    for l in secs.get("CANDIDATE ISSUES").into_iter().flatten() {
        if let Some(issue) = l.strip_prefix("- ") {
            r.issues.push(issue.to_string());
        }
    }
    r.findings.push(format!("{} candidate issue(s) confirmed", r.issues.len()));
    r.render()
}

/// Terms listed on the `avoid:` parts of the DO NOT RECOMMEND block.
fn prohibited_terms(secs: &BTreeMap<String, Vec<&str>>) -> BTreeSet<String> {
    let mut terms = BTreeSet::new();
    for l in secs.get("DO NOT RECOMMEND").into_iter().flatten() {
        for part in l.split(" | ") {
            if let Some(list) = part.trim().strip_prefix("avoid: ") {
                terms.extend(list.split(", ").map(|t| t.trim().to_string()).filter(|t| !t.is_empty()));
            }
        }
    }
    terms
}

fn report_reply(secs: &BTreeMap<String, Vec<&str>>) -> String {
    let prohibited = prohibited_terms(secs);
    let blocked = |food: &str| {
        let toks = term_tokens(food);
        prohibited.iter().any(|t| contains_token_run(&toks, &term_tokens(t)))
    };

    let mut summary: Vec<String> = Vec::new();
    let mut patterns: Vec<String> = Vec::new();
    let mut limits: Vec<String> = Vec::new();
    let mut items: Vec<String> = Vec::new();
    let mut supplements: Vec<String> = Vec::new();
    let mut monitors: Vec<String> = Vec::new();
    let mut goals: Vec<String> = Vec::new();
    let mut foods_seen: BTreeSet<String> = BTreeSet::new();
    let push = |v: &mut Vec<String>, s: String| {
        if !v.contains(&s) {
            v.push(s);
        }
    };

    let mut in_findings = false;
    for l in secs.get("CONTEXT INSIGHTS").into_iter().flatten() {
        let t = l.trim();
        if t.starts_with("### ") || ["ISSUES", "CONSTRAINTS", "EVIDENCE"].contains(&t) {
            in_findings = false;
            continue;
        }
        if t == "FINDINGS" {
            in_findings = true;
            continue;
        }
        let Some(f) = t.strip_prefix("- ").filter(|_| in_findings) else { continue };
        let (head, rest) = f.split_once(": ").unwrap_or(("", f));
        match head {
            "pattern" => push(&mut patterns, rest.to_string()),
            "limit" => push(&mut limits, rest.to_string()),
            "monitor" => push(&mut monitors, rest.to_string()),
            "goal" => push(&mut goals, rest.to_string()),
            "suggest supplement" => push(&mut supplements, rest.to_string()),
            "suggest add" | "suggest continue" | "suggest replace" => {
                let (what, reason) = rest.split_once(" -- ").unwrap_or((rest, ""));
                let food = what.rsplit(" -> ").next().unwrap_or(what).trim();
                if blocked(food) || !foods_seen.insert(food.to_lowercase()) {
                    continue;
                }
                let action = match head {
                    "suggest add" => "Add",
                    "suggest continue" => "Continue",
                    _ => "Replace",
                };
                items.push(format!("{action}: {what} -- {reason}"));
            }
            _ => {
                if !f.starts_with("reviewed ") {
                    push(&mut summary, f.to_string());
                }
            }
        }
    }

    let mut out = String::from("ASSESSMENT\n");
    for s in &summary {
        out.push_str(&format!("- {s}\n"));
    }
    for p in &patterns {
        out.push_str(&format!("- pattern: {p}\n"));
    }
    out.push_str("DIAGNOSIS\n");
    for l in secs.get("RANKED ISSUES").into_iter().flatten() {
        let Some((_, rest)) = l.split_once(". ") else { continue };
        let kv: BTreeMap<&str, &str> = rest
            .split("; ")
            .filter_map(|p| p.split_once('='))
            .collect();
        if let (Some(id), Some(domain)) = (kv.get("id"), kv.get("domain")) {
            out.push_str(&format!("- {id}: {}\n", pes_statement(domain)));
        }
    }
    for l in &limits {
        out.push_str(&format!("- limit: {l}\n"));
    }
    out.push_str("INTERVENTION\n");
    for i in &items {
        out.push_str(&format!("- {i}\n"));
    }
    for s in &supplements {
        out.push_str(&format!("- Supplement: {s}\n"));
    }
    out.push_str("MONITORING\n");
    if monitors.is_empty() {
        monitors.push("body weight: monthly".into());
    }
    for m in &monitors {
        out.push_str(&format!("- {m}\n"));
    }
    out.push_str("EVALUATION\n");
    if goals.is_empty() {
        goals.push("review adherence at the next visit".into());
    }
    for g in &goals {
        out.push_str(&format!("- {g}\n"));
    }
    if !prohibited.is_empty() {
        out.push_str("PROHIBITED\n");
        for t in &prohibited {
            out.push_str(&format!("- {t}\n"));
        }
    }
    out
}

pub struct SimulatedBackend {
    settings: GenerationSettings,
}

impl SimulatedBackend {
    pub fn new(settings: GenerationSettings) -> Self {
        SimulatedBackend { settings }
    }
}

impl Default for SimulatedBackend {
    fn default() -> Self {
        Self::new(GenerationSettings::default())
    }
}

impl GenerationBackend for SimulatedBackend {
    fn settings(&self) -> &GenerationSettings {
        &self.settings
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        let body = request.body();
        let secs = sections(&body);
        let agent = kv_lines(secs.get("AGENT").map(Vec::as_slice).unwrap_or_default());
        let stage = agent.get("stage").copied().unwrap_or_default();
        let domain = agent.get("domain").copied().unwrap_or_default();
        Ok(match stage {
            "domain" => domain_reply(domain, &secs),
            "refine" => refine_reply(domain, &secs),
            "prioritize" => prioritize_reply(&secs),
            "report" => report_reply(&secs),
            other => {
                return Err(BackendError::Malformed(format!(
                    "simulator cannot answer a request for stage `{other}`"
                )))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::ChatMessage;

    fn ask(body: &str) -> String {
        SimulatedBackend::default()
            .generate(&GenerationRequest {
                agent_id: "x".into(),
                role_prompt: String::new(),
                messages: vec![ChatMessage::user(body)],
            })
            .unwrap()
    }

    #[test]
    fn clinical_flags_hypertension() {
        let out = ask("## AGENT\nid: clinical\nstage: domain\ndomain: clinical\n\n## PATIENT DATA\nbiomarkers.systolic_bp: 152.0\n");
        assert!(out.contains("id=hypertension; domain=hypertension; severity=152; urgency=6; modifiability=8"));
    }

    #[test]
    fn medication_cites_label() {
        let out = ask("## AGENT\nstage: domain\ndomain: medication\n## PATIENT DATA\nmedications[0].name: warfarin\n## DRUG LABELS\n[label:warfarin] Avoid large changes in vitamin K intake such as spinach.\n");
        assert!(out.contains("drug=warfarin; avoid=spinach, vitamin k;"));
        assert!(out.contains("source=label:warfarin"));
    }

    #[test]
    fn report_drops_prohibited_foods_and_lists_them_once() {
        let body = "## AGENT\nstage: report\n## CONTEXT INSIGHTS\n### hypertension [hypertension]\nFINDINGS\n- suggest add: spinach -- k\n- suggest add: walnuts -- omega\n## RANKED ISSUES\n1. id=hypertension; domain=hypertension; score=0.5\n\nDO NOT RECOMMEND (x):\n- drug: warfarin | avoid: kale, spinach | mechanism: vitamin K\n";
        let out = ask(body);
        assert!(!out.contains("Add: spinach"));
        assert!(out.contains("Add: walnuts -- omega"));
        let prohibited = out.split("PROHIBITED\n").nth(1).unwrap();
        assert_eq!(prohibited, "- kale\n- spinach\n");
    }
}
