use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{factor_scores, perceptibility_check, FactorScores, FactorWeights, Perceptibility, PerceptibilityRules, ScoringError, WeightConfig};
use crate::designspace::AnalogyStrategy;
use crate::lexicon::Lexicon;

/// What the ranker needs to know about a candidate besides the candidate itself.
#[derive(Debug, Clone)]
pub struct RankInput<C> {
    pub candidate: C,
    /// Lexicon key for the analog object.
    pub lemma: String,
    pub strategy: AnalogyStrategy,
    /// Backend-computed multiplier reported with the candidate.
    pub multiplier: f64,
    /// Value judged for perceptibility; differs from `multiplier` only for proportions.
    pub check_value: f64,
}

impl<C> RankInput<C> {
    pub fn new(candidate: C, lemma: impl Into<String>, strategy: AnalogyStrategy, multiplier: f64) -> Self {
        Self {
            candidate,
            lemma: lemma.into(),
            strategy,
            multiplier,
            check_value: multiplier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate<C> {
    pub candidate: C,
    pub factors: FactorScores,
    pub composite: f64,
    pub multiplier: f64,
    pub perceptibility: Perceptibility,
    /// Position in the original candidate list; final tie-breaker.
    pub position: usize,
}

/// Weighted mean of the three factor scores.
pub fn composite(similarity: f64, familiarity: f64, concreteness: f64, weights: &FactorWeights) -> f64 {
    let total = weights.similarity + weights.familiarity + weights.concreteness;
    ((weights.similarity * similarity + weights.familiarity * familiarity + weights.concreteness * concreteness) / total)
        .clamp(0.0, 1.0)
}

fn factor_sum(f: &FactorScores) -> f64 {
    f.similarity + f.familiarity + f.concreteness
}

/// Passing before failing, then composite descending. Equal composites fall back
/// to the factor sum (so a dominating candidate never trails the one it
/// dominates under zero weights) and finally to input order.
fn order<C>(a: &ScoredCandidate<C>, b: &ScoredCandidate<C>) -> Ordering {
    b.perceptibility
        .passed()
        .cmp(&a.perceptibility.passed())
        .then_with(|| b.composite.total_cmp(&a.composite))
        .then_with(|| factor_sum(&b.factors).total_cmp(&factor_sum(&a.factors)))
        .then_with(|| a.position.cmp(&b.position))
}

/// Scores every candidate against the statement lemma `x` and sorts them.
pub fn rank_candidates<C>(
    x: &str,
    inputs: Vec<RankInput<C>>,
    weights: &WeightConfig,
    lexicon: &Lexicon,
    rules: &PerceptibilityRules,
) -> Result<Vec<ScoredCandidate<C>>, ScoringError> {
    weights.validate()?;
    if inputs.is_empty() {
        return Err(ScoringError::Argument("no candidates to rank".into()));
    }
    let lemmas: Vec<String> = inputs.iter().map(|i| i.lemma.clone()).collect();
    let factors = factor_scores(x, &lemmas, lexicon, weights)?;
    let mut scored = inputs
        .into_iter()
        .zip(factors)
        .enumerate()
        .map(|(position, (input, factors))| {
            Ok(ScoredCandidate {
                composite: composite(factors.similarity, factors.familiarity, factors.concreteness, &weights.factors),
                perceptibility: perceptibility_check(input.strategy, input.check_value, rules)?,
                multiplier: input.multiplier,
                candidate: input.candidate,
                factors,
                position,
            })
        })
        .collect::<Result<Vec<_>, ScoringError>>()?;
    scored.sort_by(order);
    Ok(scored)
}

/// Re-applies weights to already scored candidates. Only factor scores,
/// composites and order change.
pub fn rerank<C>(scored: &mut [ScoredCandidate<C>], weights: &WeightConfig) -> Result<(), ScoringError> {
    weights.validate()?;
    for s in scored.iter_mut() {
        s.factors.reweigh(weights);
        s.composite = composite(
            s.factors.similarity,
            s.factors.familiarity,
            s.factors.concreteness,
            &weights.factors,
        );
    }
    scored.sort_by(order);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::Term;
    use proptest::prelude::*;

    fn term(norm: f64) -> Term {
        Term {
            raw: norm,
            norm,
            missing: false,
        }
    }

    fn scored(position: usize, s: f64, f: f64, c: f64, pass: bool) -> ScoredCandidate<usize> {
        ScoredCandidate {
            candidate: position,
            factors: FactorScores {
                similarity: s,
                familiarity: f,
                concreteness: c,
                path: term(s),
                relatedness: term(s),
                synsets: term(f),
                frequency: term(f),
                structure: term(c),
                rating: term(c),
            },
            composite: 0.0,
            multiplier: 1.0,
            perceptibility: if pass {
                Perceptibility::Pass
            } else {
                Perceptibility::Fail { reason: "x".into() }
            },
            position,
        }
    }

    fn with_factors(s: f64, f: f64, c: f64) -> WeightConfig {
        WeightConfig {
            factors: FactorWeights {
                similarity: s,
                familiarity: f,
                concreteness: c,
            },
            ..WeightConfig::default()
        }
    }

    #[test]
    fn hand_computed_three_candidate_order() {
        // (S, F, C) and weights (2, 1, 1):
        //   A = (0.25, 1.0, 0.5)    -> (0.5 + 1.0 + 0.5) / 4     = 0.5
        //   B = (0.875, 0.125, 0.25) -> (1.75 + 0.125 + 0.25) / 4 = 0.53125
        //   C = (0.5, 0.5, 0.5)     -> 0.5, ties A; A has the larger factor sum
        let mut rows = vec![
            scored(0, 0.25, 1.0, 0.5, true),
            scored(1, 0.875, 0.125, 0.25, true),
            scored(2, 0.5, 0.5, 0.5, true),
        ];
        rerank(&mut rows, &with_factors(2.0, 1.0, 1.0)).unwrap();
        let order: Vec<usize> = rows.iter().map(|r| r.candidate).collect();
        assert_eq!(order, vec![1, 0, 2]);
        assert_eq!(rows[0].composite, 0.53125);
        assert_eq!(rows[1].composite, rows[2].composite);
    }

    #[test]
    fn failing_candidates_sort_last() {
        let mut rows = vec![scored(0, 1.0, 1.0, 1.0, false), scored(1, 0.0, 0.0, 0.0, true)];
        rerank(&mut rows, &WeightConfig::default()).unwrap();
        assert_eq!(rows[0].candidate, 1);
    }

    #[test]
    fn invalid_weights_rejected() {
        let mut rows = vec![scored(0, 1.0, 1.0, 1.0, true)];
        assert!(rerank(&mut rows, &with_factors(0.0, 0.0, 0.0)).is_err());
    }

    proptest! {
        #[test]
        fn scaling_factor_weights_keeps_order(
            table in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0), 1..12),
            w in (0.01f64..5.0, 0.0f64..5.0, 0.0f64..5.0),
            k in 0.1f64..100.0,
        ) {
            let rows: Vec<_> = table.iter().enumerate().map(|(i, (s, f, c))| scored(i, *s, *f, *c, true)).collect();
            let mut a = rows.clone();
            let mut b = rows;
            rerank(&mut a, &with_factors(w.0, w.1, w.2)).unwrap();
            rerank(&mut b, &with_factors(w.0 * k, w.1 * k, w.2 * k)).unwrap();
            a.sort_by_key(|r| r.candidate);
            b.sort_by_key(|r| r.candidate);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.composite - y.composite).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&x.composite));
            }
        }
    }
}
