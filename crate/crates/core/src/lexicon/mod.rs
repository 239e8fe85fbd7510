//! Lexical resources behind the similarity, familiarity and concreteness factors.
//!
//! Everything here is immutable once loaded and may be shared freely across threads.

mod embedding;
mod graph;
mod head;
mod tables;
mod wordnet;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use embedding::{EmbeddingTable, Relatedness, RemoteRelatedness};
pub use graph::{GraphFormat, LexicalGraph};
pub use head::head_lemma;
pub use tables::{ConcretenessTable, FrequencyTable};

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("line {line}: vector has dimension {found}, expected {expected}")]
    Dimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("no alphabetic token in `{0}`")]
    Extraction(String),
    #[error("relatedness service: {0}")]
    Remote(String),
}

impl LexiconError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// File locations for the lexical resources. Missing entries load as empty resources.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LexiconPaths {
    pub graph: Option<PathBuf>,
    pub graph_format: Option<GraphFormat>,
    pub frequency: Option<PathBuf>,
    pub concreteness: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Base URL of a remote relatedness service; overrides `embeddings` when set.
    pub relatedness_url: Option<String>,
}

/// Handles to all four resources used by the scoring factors.
#[derive(Clone)]
pub struct Lexicon {
    pub graph: Arc<LexicalGraph>,
    pub frequency: Arc<FrequencyTable>,
    pub concreteness: Arc<ConcretenessTable>,
    pub relatedness: Arc<dyn Relatedness>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self {
            graph: Arc::default(),
            frequency: Arc::default(),
            concreteness: Arc::default(),
            relatedness: Arc::new(EmbeddingTable::default()),
        }
    }
}

impl std::fmt::Debug for Lexicon {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Lexicon")
            .field("synsets", &self.graph.synset_total())
            .field("frequency", &self.frequency.len())
            .field("concreteness", &self.concreteness.len())
            .finish_non_exhaustive()
    }
}

impl Lexicon {
    pub fn new(
        graph: LexicalGraph,
        frequency: FrequencyTable,
        concreteness: ConcretenessTable,
        relatedness: Arc<dyn Relatedness>,
    ) -> Self {
        Self {
            graph: Arc::new(graph),
            frequency: Arc::new(frequency),
            concreteness: Arc::new(concreteness),
            relatedness,
        }
    }

    pub fn load(paths: &LexiconPaths) -> Result<Self, LexiconError> {
        let graph = match &paths.graph {
            Some(p) => {
                let format = paths.graph_format.unwrap_or(if p.is_dir() {
                    GraphFormat::StandardDb
                } else {
                    GraphFormat::FixtureTsv
                });
                LexicalGraph::load(p, format)?
            }
            None => LexicalGraph::default(),
        };
        let frequency = match &paths.frequency {
            Some(p) => FrequencyTable::load(p)?,
            None => FrequencyTable::default(),
        };
        let concreteness = match &paths.concreteness {
            Some(p) => ConcretenessTable::load(p)?,
            None => ConcretenessTable::default(),
        };
        let relatedness: Arc<dyn Relatedness> = match (&paths.relatedness_url, &paths.embeddings) {
            (Some(url), _) => Arc::new(RemoteRelatedness::new(
                url.clone(),
                std::time::Duration::from_secs(10),
            )?),
            (None, Some(p)) => Arc::new(EmbeddingTable::load(p)?),
            (None, None) => Arc::new(EmbeddingTable::default()),
        };
        Ok(Self::new(graph, frequency, concreteness, relatedness))
    }

    /// Relatedness between two lemmas, symmetric by construction.
    pub fn relatedness(&self, a: &str, b: &str) -> Option<f64> {
        self.relatedness.relatedness(a, b)
    }
}
