//! Seeded synthetic cohorts for smoke and scale tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::profile::{parse_profile, PatientProfile};

const MEDICATIONS: [&str; 10] = [
    "Warfarin 5 mg",
    "Spironolactone 25 mg",
    "Amiloride 5 mg",
    "Atorvastatin 20 mg",
    "Simvastatin 40 mg",
    "Lisinopril 10 mg",
    "Metformin 500 mg",
    "Amlodipine 5 mg",
    "Losartan 50 mg",
    "Levothyroxine 50 mcg",
];

const FOODS: [&str; 22] = [
    "white bread",
    "white rice",
    "soda",
    "potato chips",
    "bacon",
    "fried chicken",
    "canned soup",
    "butter",
    "ice cream",
    "sweetened cereal",
    "french fries",
    "oatmeal",
    "salmon",
    "apple",
    "banana",
    "spinach",
    "black beans",
    "broccoli",
    "eggs",
    "carrots",
    "orange",
    "kale",
];

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// One synthetic profile drawn from `rng`.
pub fn synthetic_profile(rng: &mut impl Rng, patient_id: &str) -> PatientProfile {
    let height = round1(rng.gen_range(150.0..195.0)) / 100.0;
    let weight = round1(rng.gen_range(50.0..120.0));
    let n_meds = rng.gen_range(0..=3);
    let meds: Vec<&str> = MEDICATIONS.choose_multiple(rng, n_meds).copied().collect();
    let n_foods = rng.gen_range(3..=7);
    let foods: Vec<serde_json::Value> = FOODS
        .choose_multiple(rng, n_foods)
        .map(|f| json!({ "description": f }))
        .collect();
    let hba1c = rng.gen_bool(0.8).then(|| round1(rng.gen_range(4.8..10.5)));
    let doc = json!({
        "patient_id": patient_id,
        "anthropometrics": { "height_m": height, "weight_kg": weight },
        "biomarkers": {
            "systolic_bp": round1(rng.gen_range(100.0..185.0)),
            "glucose": round1(rng.gen_range(70.0..220.0)),
            "hba1c": hba1c,
            "total_cholesterol": round1(rng.gen_range(140.0..290.0)),
        },
        "medications": meds,
        "dietary_history": { "items": foods },
        "sociodemographics": {
            "age": rng.gen_range(30..=85).to_string(),
            "sex": if rng.gen_bool(0.5) { "female" } else { "male" },
        },
    });
    parse_profile(&doc.to_string()).expect("synthetic profiles are valid by construction")
}

/// `n` profiles with ids `S0001`, `S0002`, ... The same seed always yields
/// the same cohort.
pub fn synthetic_cohort(n: usize, seed: u64) -> Vec<PatientProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (1..=n).map(|i| synthetic_profile(&mut rng, &format!("S{i:04}"))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_valid() {
        let a = synthetic_cohort(20, 3);
        assert_eq!(a, synthetic_cohort(20, 3));
        assert_ne!(a, synthetic_cohort(20, 4));
        assert!(a.iter().all(|p| p.anthropometrics.bmi.is_some() && !p.dietary_history.items.is_empty()));
    }
}
