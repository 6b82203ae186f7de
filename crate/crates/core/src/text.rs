//! Small text helpers shared by the safety gate, the specificity lexicon and
//! the food-name resolver: case folding, plural stripping and token-sequence
//! matching, plus content hashing.

use sha2::{Digest, Sha256};

/// Lowercases, trims and collapses internal whitespace.
pub fn fold(s: &str) -> String {
    s.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Strips a regular English plural suffix from a single lowercase word.
///
/// Handles `-ies`, `-oes`, sibilant `-es` and plain `-s`. Words ending in
/// `ss`, `us` or `is` are left alone (`swiss`, `hummus`, `asparagus`), as
/// are a few words that only look plural.
pub fn singularize(word: &str) -> String {
    const INVARIANT: [&str; 3] = ["brussels", "series", "species"];
    let w = word;
    if w.len() <= 3 || INVARIANT.contains(&w) {
        return w.to_string();
    }
    if let Some(stem) = w.strip_suffix("ies") {
        return format!("{stem}y");
    }
    if let Some(stem) = w.strip_suffix("oes") {
        return format!("{stem}o");
    }
    for sib in ["ches", "shes", "sses", "xes", "zes"] {
        if w.ends_with(sib) {
            return w[..w.len() - 2].to_string();
        }
    }
    if w.ends_with("ss") || w.ends_with("us") || w.ends_with("is") {
        return w.to_string();
    }
    if let Some(stem) = w.strip_suffix('s') {
        return stem.to_string();
    }
    w.to_string()
}

/// Splits on anything that is not alphanumeric, lowercases and singularizes
/// every token.
pub fn term_tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| singularize(&t.to_lowercase()))
        .collect()
}

/// Canonical lexicon form of a food or nutrient term: singular tokens joined
/// by single spaces.
pub fn normalize_term(s: &str) -> String {
    term_tokens(s).join(" ")
}

/// True when `needle` occurs as a contiguous run inside `haystack`.
pub fn contains_token_run(haystack: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || needle.len() > haystack.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}
