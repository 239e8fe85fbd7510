//! Similarity, familiarity and concreteness factors, perceptibility rules and
//! the weighted ranking built on them.

mod factors;
mod normalize;
mod perceptibility;
mod rank;

use serde::{Deserialize, Serialize};

pub use factors::{
    concreteness_scores, factor_scores, familiarity_scores, similarity_scores, structure_ratio, FactorScores,
    FactorValue, Term,
};
pub use normalize::normalize;
pub use perceptibility::{perceptibility_check, Perceptibility, PerceptibilityRules};
pub use rank::{composite, rank_candidates, rerank, RankInput, ScoredCandidate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoringError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid weights: {0}")]
    Configuration(String),
}

/// Outer weights combining the three factors into one composite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorWeights {
    pub similarity: f64,
    pub familiarity: f64,
    pub concreteness: f64,
}

impl Default for FactorWeights {
    fn default() -> Self {
        Self {
            similarity: 1.0,
            familiarity: 1.0,
            concreteness: 1.0,
        }
    }
}

impl std::str::FromStr for FactorWeights {
    type Err = String;

    /// Parses `wS,wF,wC`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number")))
            .collect::<Result<Vec<_>, _>>()?;
        match parts.as_slice() {
            [s, f, c] => Ok(Self {
                similarity: *s,
                familiarity: *f,
                concreteness: *c,
            }),
            _ => Err(format!("expected three comma-separated weights, got {}", parts.len())),
        }
    }
}

/// Inner weights (w1..w6) pairing the raw terms of each factor, plus the outer
/// factor weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    /// Path term of similarity.
    pub w1: f64,
    /// Relatedness term of similarity.
    pub w2: f64,
    /// Sense-count term of familiarity.
    pub w3: f64,
    /// Frequency term of familiarity.
    pub w4: f64,
    /// Taxonomy-structure term of concreteness.
    pub w5: f64,
    /// Human-rating term of concreteness.
    pub w6: f64,
    pub factors: FactorWeights,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            w1: 1.0,
            w2: 1.0,
            w3: 1.0,
            w4: 1.0,
            w5: 1.0,
            w6: 1.0,
            factors: FactorWeights::default(),
        }
    }
}

impl WeightConfig {
    pub fn with_factors(factors: FactorWeights) -> Self {
        Self {
            factors,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        factors::validate_pairs(self)?;
        let f = &self.factors;
        let all = [f.similarity, f.familiarity, f.concreteness];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) || all.iter().sum::<f64>() <= 0.0 {
            return Err(ScoringError::Configuration(format!(
                "factor weights must be non-negative with a positive sum (got {}, {}, {})",
                f.similarity, f.familiarity, f.concreteness
            )));
        }
        Ok(())
    }
}
