//! The three user-weighted factors. Each combines two raw lexical terms, each
//! min-max normalized across the candidate list, into a weighted mean.

use serde::{Deserialize, Serialize};

use super::{normalize, ScoringError, WeightConfig};
use crate::lexicon::Lexicon;

/// One raw lexical measurement and its normalized value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub raw: f64,
    pub norm: f64,
    /// The lexicon had no entry; `raw` was defaulted to 0.
    pub missing: bool,
}

/// A factor score together with the two terms it was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorValue {
    pub score: f64,
    pub first: Term,
    pub second: Term,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorScores {
    pub similarity: f64,
    pub familiarity: f64,
    pub concreteness: f64,
    /// 1/(1+hops) in the hypernym graph.
    pub path: Term,
    pub relatedness: Term,
    /// Number of senses.
    pub synsets: Term,
    pub frequency: Term,
    /// (hypernyms+1)/(hyponyms+1) over the closure.
    pub structure: Term,
    /// Human concreteness rating.
    pub rating: Term,
}

impl FactorScores {
    /// Names of the terms whose lookups failed.
    pub fn flags(&self) -> Vec<&'static str> {
        [
            ("path", self.path.missing),
            ("relatedness", self.relatedness.missing),
            ("synsets", self.synsets.missing),
            ("frequency", self.frequency.missing),
            ("structure", self.structure.missing),
            ("rating", self.rating.missing),
        ]
        .into_iter()
        .filter_map(|(name, missing)| missing.then_some(name))
        .collect()
    }

    /// Recomputes the three factors from the stored normalized terms.
    pub fn reweigh(&mut self, weights: &WeightConfig) {
        self.similarity = mix(weights.w1, self.path.norm, weights.w2, self.relatedness.norm);
        self.familiarity = mix(weights.w3, self.synsets.norm, weights.w4, self.frequency.norm);
        self.concreteness = mix(weights.w5, self.structure.norm, weights.w6, self.rating.norm);
    }
}

fn mix(wa: f64, a: f64, wb: f64, b: f64) -> f64 {
    ((wa * a + wb * b) / (wa + wb)).clamp(0.0, 1.0)
}

fn check_pair(wa: f64, wb: f64, names: &str) -> Result<(), ScoringError> {
    if !(wa.is_finite() && wb.is_finite() && wa >= 0.0 && wb >= 0.0 && wa + wb > 0.0) {
        return Err(ScoringError::Configuration(format!(
            "weights {names} must be non-negative with a positive sum (got {wa}, {wb})"
        )));
    }
    Ok(())
}

fn terms(raw: Vec<(f64, bool)>) -> Result<Vec<Term>, ScoringError> {
    let values: Vec<f64> = raw.iter().map(|(v, _)| *v).collect();
    let norms = normalize(&values)?;
    Ok(raw
        .into_iter()
        .zip(norms)
        .map(|((raw, missing), norm)| Term { raw, norm, missing })
        .collect())
}

fn combine(
    first: Vec<(f64, bool)>,
    second: Vec<(f64, bool)>,
    wa: f64,
    wb: f64,
) -> Result<Vec<FactorValue>, ScoringError> {
    let first = terms(first)?;
    let second = terms(second)?;
    Ok(first
        .into_iter()
        .zip(second)
        .map(|(a, b)| FactorValue {
            score: mix(wa, a.norm, wb, b.norm),
            first: a,
            second: b,
        })
        .collect())
}

fn present(value: Option<f64>) -> (f64, bool) {
    match value {
        Some(v) => (v, false),
        None => (0.0, true),
    }
}

/// Similarity of each candidate lemma to the statement's object lemma `x`.
pub fn similarity_scores(
    x: &str,
    ys: &[String],
    lexicon: &Lexicon,
    w1: f64,
    w2: f64,
) -> Result<Vec<FactorValue>, ScoringError> {
    check_pair(w1, w2, "w1/w2")?;
    if ys.is_empty() {
        return Err(ScoringError::Argument("no candidates".into()));
    }
    let path = ys
        .iter()
        .map(|y| {
            present(
                lexicon
                    .graph
                    .shortest_path_length(x, y)
                    .map(|hops| 1.0 / (1.0 + f64::from(hops))),
            )
        })
        .collect();
    let related = ys.iter().map(|y| present(lexicon.relatedness(x, y))).collect();
    combine(path, related, w1, w2)
}

pub fn familiarity_scores(
    ys: &[String],
    lexicon: &Lexicon,
    w3: f64,
    w4: f64,
) -> Result<Vec<FactorValue>, ScoringError> {
    check_pair(w3, w4, "w3/w4")?;
    if ys.is_empty() {
        return Err(ScoringError::Argument("no candidates".into()));
    }
    let synsets = ys
        .iter()
        .map(|y| match lexicon.graph.synset_count(y) {
            0 => (0.0, true),
            n => (n as f64, false),
        })
        .collect();
    let freq = ys.iter().map(|y| present(lexicon.frequency.get(y))).collect();
    combine(synsets, freq, w3, w4)
}

pub fn concreteness_scores(
    ys: &[String],
    lexicon: &Lexicon,
    w5: f64,
    w6: f64,
) -> Result<Vec<FactorValue>, ScoringError> {
    check_pair(w5, w6, "w5/w6")?;
    if ys.is_empty() {
        return Err(ScoringError::Argument("no candidates".into()));
    }
    let structure = ys
        .iter()
        .map(|y| {
            if lexicon.graph.contains(y) {
                (structure_ratio(lexicon.graph.hypernym_count(y), lexicon.graph.hyponym_count(y)), false)
            } else {
                (0.0, true)
            }
        })
        .collect();
    let rating = ys.iter().map(|y| present(lexicon.concreteness.get(y))).collect();
    combine(structure, rating, w5, w6)
}

/// Smoothed hypernym/hyponym ratio; finite at leaves.
pub fn structure_ratio(hypernyms: usize, hyponyms: usize) -> f64 {
    (hypernyms as f64 + 1.0) / (hyponyms as f64 + 1.0)
}

/// All three factors for every candidate, in input order.
pub fn factor_scores(
    x: &str,
    ys: &[String],
    lexicon: &Lexicon,
    weights: &WeightConfig,
) -> Result<Vec<FactorScores>, ScoringError> {
    weights.validate()?;
    let s = similarity_scores(x, ys, lexicon, weights.w1, weights.w2)?;
    let f = familiarity_scores(ys, lexicon, weights.w3, weights.w4)?;
    let c = concreteness_scores(ys, lexicon, weights.w5, weights.w6)?;
    Ok(s.into_iter()
        .zip(f)
        .zip(c)
        .map(|((s, f), c)| FactorScores {
            similarity: s.score,
            familiarity: f.score,
            concreteness: c.score,
            path: s.first,
            relatedness: s.second,
            synsets: f.first,
            frequency: f.second,
            structure: c.first,
            rating: c.second,
        })
        .collect())
}

pub(crate) fn validate_pairs(w: &WeightConfig) -> Result<(), ScoringError> {
    check_pair(w.w1, w.w2, "w1/w2")?;
    check_pair(w.w3, w.w4, "w3/w4")?;
    check_pair(w.w5, w.w6, "w5/w6")
}
