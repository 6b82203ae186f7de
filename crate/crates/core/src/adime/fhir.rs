use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::mapping::{CodeMappingTable, MappingRow};
use super::plan::{Action, AdimePlan};
use super::AdimeError;
use crate::text::{fold, normalize_term};

pub const PRIORITY_EXTENSION_URL: &str =
    "https://nutriplan.example.org/fhir/StructureDefinition/nutritionorder-priority";
pub const MANIFEST_TAG_SYSTEM: &str = "https://nutriplan.example.org/fhir/CodeSystem/run-manifest";

const STATUS_CODES: [&str; 7] =
    ["draft", "active", "on-hold", "revoked", "completed", "entered-in-error", "unknown"];
const INTENT_CODES: [&str; 9] = [
    "proposal",
    "plan",
    "directive",
    "order",
    "original-order",
    "reflex-order",
    "filler-order",
    "instance-order",
    "option",
];
const PRIORITY_CODES: [&str; 4] = ["routine", "urgent", "asap", "stat"];
const PERIOD_UNITS: [&str; 7] = ["s", "min", "h", "d", "wk", "mo", "a"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coding {
    pub system: String,
    pub code: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub display: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeableConcept {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coding: Vec<Coding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
    pub system: String,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reference {
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub tag: Vec<Coding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extension {
    pub url: String,
    #[serde(rename = "valueCodeableConcept")]
    pub value_codeable_concept: CodeableConcept,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NutrientModifier {
    pub modifier: CodeableConcept,
    pub amount: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRepeat {
    pub frequency: u32,
    pub period: f64,
    #[serde(rename = "periodUnit")]
    pub period_unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub repeat: TimingRepeat,
    pub code: CodeableConcept,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OralDiet {
    #[serde(rename = "type", default, skip_serializing_if = "Vec::is_empty")]
    pub diet_type: Vec<CodeableConcept>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<Timing>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nutrient: Vec<NutrientModifier>,
}

impl OralDiet {
    pub fn is_empty(&self) -> bool {
        self.diet_type.is_empty() && self.schedule.is_empty() && self.nutrient.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupplementOrder {
    #[serde(rename = "type")]
    pub supplement_type: CodeableConcept,
    #[serde(rename = "productName")]
    pub product_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub text: String,
}

/// FHIR R4 NutritionOrder, restricted to the elements this system fills.
///
/// Food preference and exclusion modifiers sit at the resource root, where
/// R4 defines them. R4 has no `priority` element on NutritionOrder, so the
/// routine/urgent code travels in an extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FhirNutritionOrder {
    #[serde(rename = "resourceType")]
    pub resource_type: String,
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<Extension>,
    pub status: String,
    pub intent: String,
    pub patient: Reference,
    #[serde(rename = "dateTime")]
    pub date_time: String,
    #[serde(rename = "foodPreferenceModifier", default, skip_serializing_if = "Vec::is_empty")]
    pub food_preference_modifier: Vec<CodeableConcept>,
    #[serde(rename = "excludeFoodModifier", default, skip_serializing_if = "Vec::is_empty")]
    pub exclude_food_modifier: Vec<CodeableConcept>,
    #[serde(rename = "oralDiet", default, skip_serializing_if = "Option::is_none")]
    pub oral_diet: Option<OralDiet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub supplement: Vec<SupplementOrder>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub note: Vec<Annotation>,
}

impl FhirNutritionOrder {
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("order serializes")
    }

    /// Canonical bytes: sorted keys, two-space indent, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        crate::canonical_json(self)
    }

    pub fn priority_code(&self) -> Option<&str> {
        self.extension
            .iter()
            .find(|e| e.url == PRIORITY_EXTENSION_URL)
            .and_then(|e| e.value_codeable_concept.coding.first())
            .map(|c| c.code.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FhirOptions {
    pub date_time: String,
    /// Top-ranked normalized urgency at or above which the order is urgent.
    pub urgent_threshold: f64,
    #[serde(default)]
    pub manifest_id: Option<String>,
}

impl Default for FhirOptions {
    fn default() -> Self {
        FhirOptions {
            date_time: "2025-01-01T00:00:00Z".into(),
            urgent_threshold: 0.7,
            manifest_id: None,
        }
    }
}

fn slug(s: &str) -> String {
    normalize_term(s).replace(' ', "-")
}

fn coding_from(row: &MappingRow, derived_code: &str, display: &str) -> Coding {
    Coding {
        system: row.system.clone(),
        code: if row.code.is_empty() { derived_code.to_string() } else { row.code.clone() },
        display: if row.display.is_empty() { display.to_string() } else { row.display.clone() },
    }
}

fn ucum_code(unit: &str) -> Option<&'static str> {
    match fold(unit).replace(' ', "").as_str() {
        "mg/d" | "mg/day" | "mgperday" => Some("mg/d"),
        "g/d" | "g/day" | "gperday" => Some("g/d"),
        "kcal/d" | "kcal/day" => Some("kcal/d"),
        "mcg/d" | "ug/d" | "\u{b5}g/d" | "mcg/day" | "ug/day" => Some("ug/d"),
        "mmol/d" | "mmol/day" => Some("mmol/d"),
        _ => None,
    }
}

/// Parses a monitoring frequency phrase into `(frequency, period, unit)`.
pub fn parse_frequency(phrase: &str) -> Option<(u32, f64, &'static str)> {
    static EVERY: OnceLock<Regex> = OnceLock::new();
    static TIMES: OnceLock<Regex> = OnceLock::new();
    let every = EVERY.get_or_init(|| {
        Regex::new(r"^every (\d+) (day|week|month|year)s?$").expect("static regex")
    });
    let times = TIMES.get_or_init(|| {
        Regex::new(r"^(\d+) times (?:a|per) (day|week|month|year)$").expect("static regex")
    });
    let unit = |u: &str| match u {
        "day" => "d",
        "week" => "wk",
        "month" => "mo",
        _ => "a",
    };
    let f = fold(phrase);
    let fixed = match f.as_str() {
        "daily" | "once daily" | "every day" | "once a day" | "per day" => Some((1, 1.0, "d")),
        "twice daily" | "twice a day" => Some((2, 1.0, "d")),
        "weekly" | "once weekly" | "every week" | "once a week" => Some((1, 1.0, "wk")),
        "twice weekly" | "twice a week" => Some((2, 1.0, "wk")),
        "biweekly" | "every other week" => Some((1, 2.0, "wk")),
        "monthly" | "every month" | "once a month" => Some((1, 1.0, "mo")),
        "quarterly" => Some((1, 3.0, "mo")),
        "yearly" | "annually" | "every year" => Some((1, 1.0, "a")),
        _ => None,
    };
    if fixed.is_some() {
        return fixed;
    }
    if let Some(c) = every.captures(&f) {
        let n: f64 = c[1].parse().ok()?;
        return (n > 0.0).then(|| (1, n, unit(&c[2])));
    }
    if let Some(c) = times.captures(&f) {
        let n: u32 = c[1].parse().ok()?;
        return (n > 0).then(|| (n, 1.0, unit(&c[2])));
    }
    None
}

/// Deterministic plan-to-order projection. Also returns the mapping-table
/// fields that were exercised, in first-use order.
pub fn map_to_fhir_with_trace(
    plan: &AdimePlan,
    table: &CodeMappingTable,
    opts: &FhirOptions,
) -> Result<(FhirNutritionOrder, Vec<String>), AdimeError> {
    let mut used: Vec<String> = Vec::new();
    let mut touch = |field: &str| {
        if !used.iter().any(|u| u == field) {
            used.push(field.to_string());
        }
    };
    let mut oral = OralDiet::default();

    for (tag, value) in &plan.assessment.diet_patterns {
        let row = table.require(tag, value)?;
        touch(tag);
        oral.diet_type.push(CodeableConcept {
            coding: vec![coding_from(row, &slug(value), value)],
            text: Some(value.clone()),
        });
    }

    for limit in &plan.diagnosis.nutrient_limits {
        let field = format!("nutrient_flags.{}", limit.nutrient.replace(' ', "_"));
        let modifier_row = table.require(&field, "")?;
        touch(&field);
        let amount_row = table.require("nutrient_flags.limit_val", "")?;
        touch("nutrient_flags.limit_val");
        let code = ucum_code(&limit.unit).ok_or_else(|| {
            AdimeError::Mapping(format!("unit `{}` has no UCUM mapping", limit.unit))
        })?;
        oral.nutrient.push(NutrientModifier {
            modifier: CodeableConcept {
                coding: vec![coding_from(modifier_row, &slug(&limit.nutrient), &limit.nutrient)],
                text: Some(limit.nutrient.clone()),
            },
            amount: Quantity {
                value: limit.max_amount,
                unit: limit.unit.clone(),
                system: amount_row.system.clone(),
                code: code.to_string(),
            },
        });
    }

    for m in &plan.monitoring {
        table.require("monitoring.frequency", &m.frequency)?;
        touch("monitoring.frequency");
        let (frequency, period, unit) = parse_frequency(&m.frequency).ok_or_else(|| {
            AdimeError::Mapping(format!("frequency `{}` for `{}` is not a schedule", m.frequency, m.metric))
        })?;
        oral.schedule.push(Timing {
            repeat: TimingRepeat { frequency, period, period_unit: unit.to_string() },
            code: CodeableConcept { coding: vec![], text: Some(m.metric.clone()) },
        });
    }

    let food_concept = |row: &MappingRow, food: &str| CodeableConcept {
        coding: vec![coding_from(row, &slug(food), food)],
        text: Some(food.to_string()),
    };
    let mut preference = Vec::new();
    let mut exclude = Vec::new();
    for item in &plan.intervention.items {
        let add_row = table.require("intervention.add", &item.food)?;
        touch("intervention.add");
        if item.action == Action::Replace {
            let old = item.replacement_for.as_deref().unwrap_or_default();
            let row = table.require("intervention.replace", old)?;
            touch("intervention.replace");
            exclude.push(food_concept(row, old));
        }
        preference.push(food_concept(add_row, &item.food));
    }

    let mut supplement = Vec::new();
    for s in &plan.intervention.supplements {
        let row = table.require("medication.supplement", &s.name)?;
        touch("medication.supplement");
        supplement.push(SupplementOrder {
            supplement_type: food_concept(row, &s.name),
            product_name: s.name.clone(),
            instruction: (!s.reason.is_empty()).then(|| s.reason.clone()),
        });
    }

    let priority = match plan.diagnosis.issues.first() {
        Some(top) if top.sigma.urgency >= opts.urgent_threshold => "urgent",
        _ => "routine",
    };
    let row = table.require("health_priority.rank", priority)?;
    touch("health_priority.rank");
    let extension = vec![Extension {
        url: PRIORITY_EXTENSION_URL.into(),
        value_codeable_concept: CodeableConcept {
            coding: vec![coding_from(row, priority, priority)],
            text: None,
        },
    }];

    let order = FhirNutritionOrder {
        resource_type: "NutritionOrder".into(),
        id: plan.plan_id.clone(),
        meta: opts.manifest_id.as_ref().map(|m| Meta {
            tag: vec![Coding { system: MANIFEST_TAG_SYSTEM.into(), code: m.clone(), display: String::new() }],
        }),
        extension,
        status: "draft".into(),
        intent: "proposal".into(),
        patient: Reference { reference: format!("Patient/{}", plan.patient_id) },
        date_time: opts.date_time.clone(),
        food_preference_modifier: preference,
        exclude_food_modifier: exclude,
        oral_diet: (!oral.is_empty()).then_some(oral),
        supplement,
        note: plan.evaluation.iter().map(|t| Annotation { text: t.clone() }).collect(),
    };
    Ok((order, used))
}

pub fn map_to_fhir(
    plan: &AdimePlan,
    table: &CodeMappingTable,
    opts: &FhirOptions,
) -> Result<FhirNutritionOrder, AdimeError> {
    map_to_fhir_with_trace(plan, table, opts).map(|(o, _)| o)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationFailure {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub failures: Vec<ValidationFailure>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.failures.push(ValidationFailure { path: path.into(), message: message.into() });
    }
}

pub fn validate_fhir(order: &FhirNutritionOrder) -> ValidationReport {
    validate_fhir_value(&order.to_value())
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn non_empty_str(v: Option<&Value>) -> bool {
    v.and_then(Value::as_str).is_some_and(|s| !s.trim().is_empty())
}

fn check_code(report: &mut ValidationReport, root: &Value, key: &str, allowed: &[&str]) {
    match root.get(key).and_then(Value::as_str) {
        Some(s) if allowed.contains(&s) => {}
        Some(s) => report.fail(key, format!("`{s}` is not a legal {key} code")),
        None => report.fail(key, "required"),
    }
}

fn walk_codings(report: &mut ValidationReport, v: &Value, path: &str) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let p = join(path, k);
                if k == "coding" {
                    let Some(items) = child.as_array() else {
                        report.fail(p, "coding must be an array");
                        continue;
                    };
                    for (i, c) in items.iter().enumerate() {
                        for field in ["system", "code"] {
                            if !non_empty_str(c.get(field)) {
                                report.fail(format!("{p}[{i}].{field}"), "required");
                            }
                        }
                    }
                } else {
                    walk_codings(report, child, &p);
                }
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                walk_codings(report, child, &format!("{path}[{i}]"));
            }
        }
        _ => {}
    }
}

/// Structural conformance checks over a serialized order. Every failing path
/// is reported; nothing short-circuits.
pub fn validate_fhir_value(v: &Value) -> ValidationReport {
    static DATE_TIME: OnceLock<Regex> = OnceLock::new();
    let date_time = DATE_TIME.get_or_init(|| {
        Regex::new(r"^\d{4}(-\d{2}(-\d{2}(T\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:\d{2}))?)?)?$")
            .expect("static regex")
    });
    let mut report = ValidationReport::default();
    if !v.is_object() {
        report.fail("$", "resource must be a JSON object");
        return report;
    }
    match v.get("resourceType").and_then(Value::as_str) {
        Some("NutritionOrder") => {}
        Some(other) => report.fail("resourceType", format!("expected `NutritionOrder`, found `{other}`")),
        None => report.fail("resourceType", "required"),
    }
    check_code(&mut report, v, "status", &STATUS_CODES);
    check_code(&mut report, v, "intent", &INTENT_CODES);
    if !non_empty_str(v.pointer("/patient/reference")) {
        report.fail("patient.reference", "required");
    }
    match v.get("dateTime").and_then(Value::as_str) {
        Some(s) if date_time.is_match(s) => {}
        Some(s) => report.fail("dateTime", format!("`{s}` is not a FHIR dateTime")),
        None => report.fail("dateTime", "required"),
    }

    if let Some(exts) = v.get("extension").and_then(Value::as_array) {
        for (i, e) in exts.iter().enumerate() {
            if !non_empty_str(e.get("url")) {
                report.fail(format!("extension[{i}].url"), "required");
            }
            if e.get("url").and_then(Value::as_str) == Some(PRIORITY_EXTENSION_URL) {
                let code = e.pointer("/valueCodeableConcept/coding/0/code").and_then(Value::as_str);
                if let Some(c) = code {
                    if !PRIORITY_CODES.contains(&c) {
                        report.fail(
                            format!("extension[{i}].valueCodeableConcept.coding[0].code"),
                            format!("`{c}` is not a request priority"),
                        );
                    }
                }
            }
        }
    }

    if let Some(nutrients) = v.pointer("/oralDiet/nutrient").and_then(Value::as_array) {
        for (i, n) in nutrients.iter().enumerate() {
            let p = format!("oralDiet.nutrient[{i}]");
            if n.get("modifier").is_none() {
                report.fail(format!("{p}.modifier"), "required");
            }
            match n.get("amount") {
                Some(a) => {
                    if !a.get("value").is_some_and(Value::is_number) {
                        report.fail(format!("{p}.amount.value"), "numeric value required");
                    }
                    if !non_empty_str(a.get("unit")) {
                        report.fail(format!("{p}.amount.unit"), "required");
                    }
                }
                None => report.fail(format!("{p}.amount"), "required"),
            }
        }
    }

    if let Some(schedule) = v.pointer("/oralDiet/schedule").and_then(Value::as_array) {
        for (i, t) in schedule.iter().enumerate() {
            let p = format!("oralDiet.schedule[{i}].repeat");
            let Some(r) = t.get("repeat") else {
                report.fail(p, "required");
                continue;
            };
            if !r.get("frequency").and_then(Value::as_u64).is_some_and(|f| f > 0) {
                report.fail(format!("{p}.frequency"), "positive integer required");
            }
            if !r.get("period").and_then(Value::as_f64).is_some_and(|f| f > 0.0) {
                report.fail(format!("{p}.period"), "positive number required");
            }
            match r.get("periodUnit").and_then(Value::as_str) {
                Some(u) if PERIOD_UNITS.contains(&u) => {}
                _ => report.fail(format!("{p}.periodUnit"), "must be one of s|min|h|d|wk|mo|a"),
            }
        }
    }

    walk_codings(&mut report, v, "");
    let mut seen = BTreeSet::new();
    report.failures.retain(|f| seen.insert((f.path.clone(), f.message.clone())));
    report
}
