use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::time::Duration;

use tracing::warn;

use super::graph::normalize_lemma;
use super::LexiconError;

/// Source of a relatedness score in [-1, 1] between two lemmas.
pub trait Relatedness: Send + Sync {
    fn relatedness(&self, a: &str, b: &str) -> Option<f64>;
}

/// Dense vectors, one per lemma, all of the same dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn load(source: &Path) -> Result<Self, LexiconError> {
        let text = fs::read_to_string(source).map_err(|e| LexiconError::io(source, e))?;
        Self::parse(&text)
    }

    /// Parses `lemma v1 ... vd` rows with an optional `count dim` header line.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut table = EmbeddingTable::default();
        let mut declared_dim = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let tokens: Vec<&str> = raw.split_whitespace().collect();
            if tokens.is_empty() || tokens[0].starts_with('#') {
                continue;
            }
            if table.vectors.is_empty() && declared_dim.is_none() && tokens.len() == 2 {
                if let (Ok(_count), Ok(dim)) = (tokens[0].parse::<usize>(), tokens[1].parse::<usize>()) {
                    declared_dim = Some(dim);
                    continue;
                }
            }
            if tokens.len() < 2 {
                return Err(LexiconError::Malformed {
                    line,
                    message: "row has a lemma but no vector components".into(),
                });
            }
            let vector = tokens[1..]
                .iter()
                .map(|t| {
                    t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                        LexiconError::Malformed {
                            line,
                            message: format!("non-numeric component `{t}`"),
                        }
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            let expected = declared_dim.unwrap_or(if table.vectors.is_empty() {
                vector.len()
            } else {
                table.dim
            });
            if vector.len() != expected {
                return Err(LexiconError::Dimension {
                    line,
                    expected,
                    found: vector.len(),
                });
            }
            if vector.iter().all(|v| *v == 0.0) {
                return Err(LexiconError::Malformed {
                    line,
                    message: "zero-length vector".into(),
                });
            }
            table.dim = expected;
            let lemma = normalize_lemma(tokens[0]);
            if table.vectors.insert(lemma.clone(), vector).is_some() {
                warn!(line, lemma = %lemma, "duplicate embedding, keeping the later entry");
            }
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, lemma: &str) -> Option<&[f64]> {
        self.vectors.get(&normalize_lemma(lemma)).map(Vec::as_slice)
    }
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

impl Relatedness for EmbeddingTable {
    fn relatedness(&self, a: &str, b: &str) -> Option<f64> {
        Some(cosine(self.get(a)?, self.get(b)?))
    }
}

/// Queries a remote relatedness service exposing
/// `GET {base}/relatedness?node1=/c/en/{a}&node2=/c/en/{b}` → `{"value": f}`.
pub struct RemoteRelatedness {
    base_url: String,
    client: reqwest::blocking::Client,
}

impl RemoteRelatedness {
    pub fn new(base_url: impl Into<String>, timeout: Duration) -> Result<Self, LexiconError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LexiconError::Remote(e.to_string()))?;
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            client,
        })
    }

    fn node(lemma: &str) -> String {
        format!("/c/en/{}", normalize_lemma(lemma).replace(' ', "_"))
    }
}

impl Relatedness for RemoteRelatedness {
    fn relatedness(&self, a: &str, b: &str) -> Option<f64> {
        #[derive(serde::Deserialize)]
        struct Reply {
            value: f64,
        }
        let url = format!("{}/relatedness", self.base_url);
        let reply = self
            .client
            .get(url)
            .query(&[("node1", Self::node(a)), ("node2", Self::node(b))])
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json::<Reply>());
        match reply {
            Ok(r) if r.value.is_finite() => Some(r.value.clamp(-1.0, 1.0)),
            Ok(_) => None,
            Err(e) => {
                warn!(error = %e, a, b, "relatedness lookup failed");
                None
            }
        }
    }
}
