//! Severity / urgency / modifiability scoring of health issues.
//!
//! Each raw component is mapped to `[0, 1]` by a linear clamp over a clinical
//! band, and the issue score is the weighted sum of the three normalized
//! components. Issues are then ranked by score, ties broken by id.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PriorityError {
    #[error("degenerate band for `{metric}`: lower {lower} must be < upper {upper}")]
    DegenerateBand { metric: String, lower: f64, upper: f64 },
    #[error("normalized component {0} outside [0, 1]")]
    Domain(f64),
    #[error("invalid weights: {0}")]
    Weights(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthIssue {
    pub issue_id: String,
    pub domain_tag: String,
    pub raw_severity: f64,
    pub raw_urgency: f64,
    pub raw_modifiability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdBand {
    pub metric: String,
    pub lower: f64,
    pub upper: f64,
}

impl ThresholdBand {
    pub fn new(metric: impl Into<String>, lower: f64, upper: f64) -> Result<Self, PriorityError> {
        let band = ThresholdBand {
            metric: metric.into(),
            lower,
            upper,
        };
        band.validate()?;
        Ok(band)
    }

    pub fn validate(&self) -> Result<(), PriorityError> {
        if self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper {
            Ok(())
        } else {
            Err(PriorityError::DegenerateBand {
                metric: self.metric.clone(),
                lower: self.lower,
                upper: self.upper,
            })
        }
    }

    /// The 0–10 ordinal scale used for urgency and modifiability.
    pub fn ordinal() -> Self {
        ThresholdBand {
            metric: "ordinal_0_10".into(),
            lower: 0.0,
            upper: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub severity: f64,
    pub urgency: f64,
    pub modifiability: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            severity: 1.0 / 3.0,
            urgency: 1.0 / 3.0,
            modifiability: 1.0 / 3.0,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<(), PriorityError> {
        let ws = [self.severity, self.urgency, self.modifiability];
        if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(PriorityError::Weights("weights must be finite and non-negative".into()));
        }
        if ws.iter().sum::<f64>() <= 0.0 {
            return Err(PriorityError::Weights("weights must have a positive sum".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Weights {
        Weights {
            severity: self.severity * c,
            urgency: self.urgency * c,
            modifiability: self.modifiability * c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigma {
    pub severity: f64,
    pub urgency: f64,
    pub modifiability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredIssue {
    pub issue: HealthIssue,
    pub sigma: Sigma,
    pub score: f64,
}

pub fn normalize_component(raw: f64, band: &ThresholdBand) -> Result<f64, PriorityError> {
    band.validate()?;
    Ok(((raw - band.lower) / (band.upper - band.lower)).clamp(0.0, 1.0))
}

pub fn score_issue(sigma: &Sigma, w: &Weights) -> Result<f64, PriorityError> {
    for s in [sigma.severity, sigma.urgency, sigma.modifiability] {
        if !(0.0..=1.0).contains(&s) {
            return Err(PriorityError::Domain(s));
        }
    }
    Ok(w.severity * sigma.severity + w.urgency * sigma.urgency + w.modifiability * sigma.modifiability)
}

/// Non-increasing score, ties by ascending issue id.
pub fn rank_issues(mut issues: Vec<ScoredIssue>) -> Vec<ScoredIssue> {
    issues.sort_by(|a, b| match b.score.total_cmp(&a.score) {
        Ordering::Equal => a.issue.issue_id.cmp(&b.issue.issue_id),
        o => o,
    });
    issues
}

/// Weights plus per-domain severity bands. Domains without a band use
/// `default_severity_band`; urgency and modifiability always use the 0–10
/// ordinal band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityConfig {
    pub weights: Weights,
    #[serde(default)]
    pub severity_bands: BTreeMap<String, ThresholdBand>,
    #[serde(default = "ThresholdBand::ordinal")]
    pub default_severity_band: ThresholdBand,
}

impl Default for PriorityConfig {
    fn default() -> Self {
        let bands = [
            ("hypertension", "systolic_bp", 120.0, 180.0),
            ("diabetes", "hba1c", 5.7, 10.0),
            ("dyslipidemia", "total_cholesterol", 200.0, 300.0),
            ("obesity", "bmi", 25.0, 40.0),
        ];
        PriorityConfig {
            weights: Weights::default(),
            severity_bands: bands
                .into_iter()
                .map(|(d, m, lo, hi)| (d.to_string(), ThresholdBand { metric: m.into(), lower: lo, upper: hi }))
                .collect(),
            default_severity_band: ThresholdBand::ordinal(),
        }
    }
}

impl PriorityConfig {
    pub fn validate(&self) -> Result<(), PriorityError> {
        self.weights.validate()?;
        self.default_severity_band.validate()?;
        self.severity_bands.values().try_for_each(ThresholdBand::validate)
    }

    pub fn score(&self, issue: &HealthIssue) -> Result<ScoredIssue, PriorityError> {
        let sev_band = self
            .severity_bands
            .get(&issue.domain_tag)
            .unwrap_or(&self.default_severity_band);
        let ordinal = ThresholdBand::ordinal();
        let sigma = Sigma {
            severity: normalize_component(issue.raw_severity, sev_band)?,
            urgency: normalize_component(issue.raw_urgency, &ordinal)?,
            modifiability: normalize_component(issue.raw_modifiability, &ordinal)?,
        };
        Ok(ScoredIssue {
            issue: issue.clone(),
            score: score_issue(&sigma, &self.weights)?,
            sigma,
        })
    }

    pub fn score_and_rank(&self, issues: &[HealthIssue]) -> Result<Vec<ScoredIssue>, PriorityError> {
        let scored = issues.iter().map(|i| self.score(i)).collect::<Result<Vec<_>, _>>()?;
        Ok(rank_issues(scored))
    }
}
