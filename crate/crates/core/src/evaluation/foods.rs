use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvaluationError;
use crate::profile::{FoodItem, NutrientVector};
use crate::text::{normalize_term, term_tokens};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodRecord {
    pub food_code: String,
    pub name: String,
    pub nutrients: NutrientVector,
}

#[derive(Deserialize)]
struct NutrientRow {
    food_code: String,
    name: String,
    energy_kcal: f64,
    sodium_mg: f64,
    sugars_g: f64,
    fat_g: f64,
    potassium_mg: f64,
    fiber_g: f64,
}

/// Per-100 g nutrient vectors keyed by food code, with a normalized-name
/// index for resolving free-text foods.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NutrientDB {
    foods: BTreeMap<String, FoodRecord>,
    name_index: BTreeMap<String, String>,
}

impl NutrientDB {
    pub fn new(records: impl IntoIterator<Item = FoodRecord>) -> Result<Self, EvaluationError> {
        let mut db = NutrientDB::default();
        for r in records {
            let v = r.nutrients;
            let values = [v.energy_kcal, v.sodium_mg, v.sugars_g, v.fat_g, v.potassium_mg, v.fiber_g];
            if values.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(EvaluationError::Table(format!("food {}: nutrient values must be non-negative", r.food_code)));
            }
            if db.foods.contains_key(&r.food_code) {
                return Err(EvaluationError::Table(format!("duplicate food code {}", r.food_code)));
            }
            db.name_index.entry(normalize_term(&r.name)).or_insert_with(|| r.food_code.clone());
            db.foods.insert(r.food_code.clone(), r);
        }
        Ok(db)
    }

    /// Header: `food_code,name,energy_kcal,sodium_mg,sugars_g,fat_g,potassium_mg,fiber_g`.
    pub fn from_csv(raw: &str) -> Result<Self, EvaluationError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(raw.as_bytes());
        let rows = rdr
            .deserialize::<NutrientRow>()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| EvaluationError::Table(format!("nutrient table: {e}")))?;
        Self::new(rows.into_iter().map(|r| FoodRecord {
            food_code: r.food_code,
            name: r.name,
            nutrients: NutrientVector {
                energy_kcal: r.energy_kcal,
                sodium_mg: r.sodium_mg,
                sugars_g: r.sugars_g,
                fat_g: r.fat_g,
                potassium_mg: r.potassium_mg,
                fiber_g: r.fiber_g,
            },
        }))
    }

    pub fn load(path: &Path) -> Result<Self, EvaluationError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| EvaluationError::Table(format!("{}: {e}", path.display())))?;
        Self::from_csv(&raw)
    }

    pub fn len(&self) -> usize {
        self.foods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.foods.is_empty()
    }

    pub fn by_code(&self, code: &str) -> Option<&FoodRecord> {
        self.foods.get(code)
    }

    /// Exact normalized-name match, else the longest indexed name whose
    /// tokens are a leading run of the food's tokens.
    pub fn resolve(&self, food: &str) -> Option<&FoodRecord> {
        let tokens = term_tokens(food);
        (1..=tokens.len())
            .rev()
            .find_map(|n| self.name_index.get(&tokens[..n].join(" ")))
            .and_then(|code| self.foods.get(code))
    }

    /// Nutrients for a diet-record item: its own vector, then its code, then
    /// its description.
    pub fn resolve_item(&self, item: &FoodItem) -> Option<NutrientVector> {
        item.nutrients
            .or_else(|| item.food_code.as_deref().and_then(|c| self.by_code(c)).map(|r| r.nutrients))
            .or_else(|| self.resolve(&item.description).map(|r| r.nutrients))
    }
}

#[derive(Deserialize)]
struct QualityRow {
    food_code: String,
    score: f64,
}

/// Food code to a 0–100 quality score.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FoodQualityTable {
    scores: BTreeMap<String, f64>,
}

impl FoodQualityTable {
    pub fn new(scores: impl IntoIterator<Item = (String, f64)>) -> Result<Self, EvaluationError> {
        let mut t = FoodQualityTable::default();
        for (code, s) in scores {
            if !(0.0..=100.0).contains(&s) {
                return Err(EvaluationError::Table(format!("food {code}: score {s} outside [0, 100]")));
            }
            if t.scores.insert(code.clone(), s).is_some() {
                return Err(EvaluationError::Table(format!("duplicate food code {code}")));
            }
        }
        Ok(t)
    }

    /// Header: `food_code,score`.
    pub fn from_csv(raw: &str) -> Result<Self, EvaluationError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(raw.as_bytes());
        let rows = rdr
            .deserialize::<QualityRow>()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| EvaluationError::Table(format!("quality table: {e}")))?;
        Self::new(rows.into_iter().map(|r| (r.food_code, r.score)))
    }

    pub fn load(path: &Path) -> Result<Self, EvaluationError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| EvaluationError::Table(format!("{}: {e}", path.display())))?;
        Self::from_csv(&raw)
    }

    pub fn score(&self, code: &str) -> Option<f64> {
        self.scores.get(code).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DB: &str = "food_code,name,energy_kcal,sodium_mg,sugars_g,fat_g,potassium_mg,fiber_g\n\
        1,salmon,200,60,0,12,380,0\n\
        2,steel cut oats,380,5,1,6,360,10\n";

    #[test]
    fn resolves_exact_and_prefix() {
        let db = NutrientDB::from_csv(DB).unwrap();
        assert_eq!(db.resolve("Salmon").unwrap().food_code, "1");
        assert_eq!(db.resolve("salmon fillets with dill").unwrap().food_code, "1");
        assert_eq!(db.resolve("steel-cut oats").unwrap().food_code, "2");
        assert!(db.resolve("grilled salmon").is_none());
    }

    #[test]
    fn rejects_bad_tables() {
        let dup = format!("{DB}1,other,1,1,1,1,1,1\n");
        assert!(NutrientDB::from_csv(&dup).is_err());
        let neg = "food_code,name,energy_kcal,sodium_mg,sugars_g,fat_g,potassium_mg,fiber_g\n1,x,-1,0,0,0,0,0\n";
        assert!(NutrientDB::from_csv(neg).is_err());
        assert!(FoodQualityTable::from_csv("food_code,score\n1,101\n").is_err());
        assert_eq!(FoodQualityTable::from_csv("food_code,score\n1,64.5\n").unwrap().score("1"), Some(64.5));
    }
}
