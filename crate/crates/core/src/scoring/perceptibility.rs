use serde::{Deserialize, Serialize};

use super::ScoringError;
use crate::designspace::AnalogyStrategy;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Perceptibility {
    Pass,
    Fail { reason: String },
}

impl Perceptibility {
    pub fn passed(&self) -> bool {
        matches!(self, Perceptibility::Pass)
    }
}

/// Thresholds for humanly graspable multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceptibilityRules {
    /// Inclusive range accepted for comparisons.
    pub comparison_min: f64,
    pub comparison_max: f64,
    /// Simple fractions also accepted for comparisons.
    pub comparison_fractions: Vec<f64>,
    /// Relative tolerance when matching a fraction.
    pub fraction_tolerance: f64,
    /// Unitization multipliers must be strictly greater than this.
    pub unitization_min: f64,
    /// Smallest rounded count of originals for accumulation.
    pub accumulation_min: f64,
    /// Allowed relative deviation of an achieved ratio from its target.
    pub proportion_tolerance: f64,
}

impl Default for PerceptibilityRules {
    fn default() -> Self {
        Self {
            comparison_min: 1.0,
            comparison_max: 10.0,
            comparison_fractions: vec![1.0 / 2.0, 1.0 / 3.0, 1.0 / 4.0],
            fraction_tolerance: 0.02,
            unitization_min: 1000.0,
            accumulation_min: 2.0,
            proportion_tolerance: 0.25,
        }
    }
}

impl PerceptibilityRules {
    /// Returns the simple fraction `multiplier` stands for, if any.
    pub fn matching_fraction(&self, multiplier: f64) -> Option<f64> {
        self.comparison_fractions
            .iter()
            .copied()
            .find(|f| ((multiplier - f) / f).abs() <= self.fraction_tolerance)
    }
}

/// Verdict for one multiplier. For `Proportion`, `multiplier` is the achieved
/// ratio divided by the target ratio.
pub fn perceptibility_check(
    strategy: AnalogyStrategy,
    multiplier: f64,
    rules: &PerceptibilityRules,
) -> Result<Perceptibility, ScoringError> {
    if !(multiplier.is_finite() && multiplier > 0.0) {
        return Err(ScoringError::Argument(format!(
            "multiplier must be positive, got {multiplier}"
        )));
    }
    let fail = |reason: String| Ok(Perceptibility::Fail { reason });
    match strategy {
        AnalogyStrategy::Comparison => {
            if (rules.comparison_min..=rules.comparison_max).contains(&multiplier)
                || rules.matching_fraction(multiplier).is_some()
            {
                Ok(Perceptibility::Pass)
            } else {
                fail(format!(
                    "multiplier must be within [{}, {}] or a simple fraction",
                    rules.comparison_min, rules.comparison_max
                ))
            }
        }
        AnalogyStrategy::Unitization => {
            if multiplier > rules.unitization_min {
                Ok(Perceptibility::Pass)
            } else {
                fail(format!("multiplier must exceed {}", rules.unitization_min))
            }
        }
        AnalogyStrategy::Accumulation => {
            if multiplier.round() >= rules.accumulation_min {
                Ok(Perceptibility::Pass)
            } else {
                fail(format!(
                    "accumulation needs at least {} originals",
                    rules.accumulation_min
                ))
            }
        }
        AnalogyStrategy::Proportion => {
            let deviation = (multiplier - 1.0).abs();
            if deviation <= rules.proportion_tolerance {
                Ok(Perceptibility::Pass)
            } else {
                fail(format!(
                    "achieved ratio deviates {:.1}% from target (limit {:.1}%)",
                    deviation * 100.0,
                    rules.proportion_tolerance * 100.0
                ))
            }
        }
    }
}
