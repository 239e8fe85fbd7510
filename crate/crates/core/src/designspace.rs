//! Taxonomy of data analogies, the labeled case corpus, and few-shot selection.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const CORPUS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalogyStrategy {
    Comparison,
    Unitization,
    Accumulation,
    Proportion,
}

impl AnalogyStrategy {
    pub const ALL: [AnalogyStrategy; 4] = [
        AnalogyStrategy::Comparison,
        AnalogyStrategy::Unitization,
        AnalogyStrategy::Accumulation,
        AnalogyStrategy::Proportion,
    ];

    /// Strategies tried when the user leaves a simple statement unclassified.
    pub const SIMPLE: [AnalogyStrategy; 3] = [
        AnalogyStrategy::Comparison,
        AnalogyStrategy::Unitization,
        AnalogyStrategy::Accumulation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AnalogyStrategy::Comparison => "comparison",
            AnalogyStrategy::Unitization => "unitization",
            AnalogyStrategy::Accumulation => "accumulation",
            AnalogyStrategy::Proportion => "proportion",
        }
    }
}

impl fmt::Display for AnalogyStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AnalogyStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown analogy strategy `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataBindingType {
    Length,
    Area,
    Volume,
    Quantity,
    Temperature,
    Time,
    AbstractConcept,
}

impl DataBindingType {
    pub const ALL: [DataBindingType; 7] = [
        DataBindingType::Length,
        DataBindingType::Area,
        DataBindingType::Volume,
        DataBindingType::Quantity,
        DataBindingType::Temperature,
        DataBindingType::Time,
        DataBindingType::AbstractConcept,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DataBindingType::Length => "length",
            DataBindingType::Area => "area",
            DataBindingType::Volume => "volume",
            DataBindingType::Quantity => "quantity",
            DataBindingType::Temperature => "temperature",
            DataBindingType::Time => "time",
            DataBindingType::AbstractConcept => "abstract_concept",
        }
    }
}

impl fmt::Display for DataBindingType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DataBindingType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_lowercase().replace([' ', '-'], "_");
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == wanted)
            .ok_or_else(|| format!("unknown quantity kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Juxtaposition,
    Fusion,
    TextOnly,
}

impl Layout {
    pub const ALL: [Layout; 3] = [Layout::Juxtaposition, Layout::Fusion, Layout::TextOnly];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresentationForm {
    Static,
    Dynamic,
}

impl PresentationForm {
    pub const ALL: [PresentationForm; 2] = [PresentationForm::Static, PresentationForm::Dynamic];
}

/// One labeled analogy from the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalogyCase {
    pub id: String,
    pub source_text: String,
    pub original_object: String,
    pub original_value: f64,
    pub original_unit: String,
    pub analog_object: String,
    pub analog_value: f64,
    pub analog_unit: String,
    pub strategy: AnalogyStrategy,
    pub measurement_transformed: bool,
    pub original_binding: DataBindingType,
    pub analog_binding: DataBindingType,
    pub layout: Layout,
    pub form: PresentationForm,
    #[serde(default)]
    pub topic: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub version: u32,
    pub cases: Vec<AnalogyCase>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("reading corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus is not a valid document: {0}")]
    Syntax(String),
    #[error("case `{case}`, field `{field}`: {message}")]
    Validation {
        case: String,
        field: String,
        message: String,
    },
    #[error("{0}")]
    Argument(String),
}

fn invalid(case: &str, field: &str, message: impl Into<String>) -> CorpusError {
    CorpusError::Validation {
        case: case.to_string(),
        field: field.to_string(),
        message: message.into(),
    }
}

pub fn load_corpus(source: &Path) -> Result<Vec<AnalogyCase>, CorpusError> {
    parse_corpus(&fs::read_to_string(source)?)
}

/// Parses and validates a corpus document. Each case is decoded on its own so
/// schema errors can name the offending case and field.
pub fn parse_corpus(text: &str) -> Result<Vec<AnalogyCase>, CorpusError> {
    let doc: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CorpusError::Syntax(e.to_string()))?;
    let version = doc
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| CorpusError::Syntax("missing numeric `version`".into()))?;
    if version != u64::from(CORPUS_VERSION) {
        return Err(CorpusError::Syntax(format!(
            "unsupported corpus version {version}"
        )));
    }
    let raw_cases = doc
        .get("cases")
        .and_then(serde_json::Value::as_array)
        .ok_or_else(|| CorpusError::Syntax("missing `cases` array".into()))?;

    let mut seen = HashSet::new();
    let mut cases = Vec::with_capacity(raw_cases.len());
    for (i, raw) in raw_cases.iter().enumerate() {
        let label = raw
            .get("id")
            .and_then(serde_json::Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| format!("#{}", i + 1));
        let case: AnalogyCase = serde_path_to_error::deserialize(raw).map_err(|e| {
            let field = e.path().to_string();
            invalid(&label, &field, e.into_inner().to_string())
        })?;
        validate_case(&case)?;
        if !seen.insert(case.id.clone()) {
            return Err(invalid(&case.id, "id", "duplicate id"));
        }
        cases.push(case);
    }
    Ok(cases)
}

fn validate_case(case: &AnalogyCase) -> Result<(), CorpusError> {
    if case.id.trim().is_empty() {
        return Err(invalid("<empty>", "id", "id must be non-empty"));
    }
    for (field, value) in [
        ("original_value", case.original_value),
        ("analog_value", case.analog_value),
    ] {
        if !(value.is_finite() && value > 0.0) {
            return Err(invalid(&case.id, field, format!("must be positive, got {value}")));
        }
    }
    for (field, text) in [
        ("original_object", &case.original_object),
        ("analog_object", &case.analog_object),
    ] {
        if text.trim().is_empty() {
            return Err(invalid(&case.id, field, "must be non-empty"));
        }
    }
    Ok(())
}

pub fn to_document(cases: &[AnalogyCase]) -> CorpusDocument {
    CorpusDocument {
        version: CORPUS_VERSION,
        cases: cases.to_vec(),
    }
}

pub fn serialize_corpus(cases: &[AnalogyCase]) -> String {
    let mut out = serde_json::to_string_pretty(&to_document(cases)).expect("corpus serializes");
    out.push('\n');
    out
}

/// Count and share of cases in one category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Share {
    pub count: usize,
    pub percent: f64,
}

/// Category distributions across the corpus. Keys are the serialized category names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub strategy: BTreeMap<String, Share>,
    pub original_binding: BTreeMap<String, Share>,
    pub analog_binding: BTreeMap<String, Share>,
    pub layout: BTreeMap<String, Share>,
    pub form: BTreeMap<String, Share>,
    pub measurement_transformed: BTreeMap<String, Share>,
}

fn key_of<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

fn distribution<T, I>(cases: &[AnalogyCase], universe: I, pick: impl Fn(&AnalogyCase) -> T) -> BTreeMap<String, Share>
where
    T: Serialize + PartialEq,
    I: IntoIterator<Item = T>,
{
    let total = cases.len() as f64;
    universe
        .into_iter()
        .map(|category| {
            let count = cases.iter().filter(|c| pick(c) == category).count();
            (
                key_of(&category),
                Share {
                    count,
                    percent: count as f64 * 100.0 / total,
                },
            )
        })
        .collect()
}

pub fn corpus_stats(cases: &[AnalogyCase]) -> Result<CorpusStats, CorpusError> {
    if cases.is_empty() {
        return Err(CorpusError::Argument("corpus is empty".into()));
    }
    Ok(CorpusStats {
        total: cases.len(),
        strategy: distribution(cases, AnalogyStrategy::ALL, |c| c.strategy),
        original_binding: distribution(cases, DataBindingType::ALL, |c| c.original_binding),
        analog_binding: distribution(cases, DataBindingType::ALL, |c| c.analog_binding),
        layout: distribution(cases, Layout::ALL, |c| c.layout),
        form: distribution(cases, PresentationForm::ALL, |c| c.form),
        measurement_transformed: distribution(cases, [true, false], |c| c.measurement_transformed),
    })
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cases: {}", self.total)?;
        let sections = [
            ("strategy", &self.strategy),
            ("original binding", &self.original_binding),
            ("analog binding", &self.analog_binding),
            ("layout", &self.layout),
            ("presentation form", &self.form),
            ("measurement transformed", &self.measurement_transformed),
        ];
        for (title, shares) in sections {
            writeln!(f, "\n{title}:")?;
            for (name, share) in shares {
                writeln!(f, "  {name:<18} {:>5}  {:>6.1}%", share.count, share.percent)?;
            }
        }
        Ok(())
    }
}

/// Seeded uniform sample of up to `k` cases using `strategy`, optionally restricted
/// to a topic tag. Selected cases keep their corpus order.
pub fn select_fewshot(
    cases: &[AnalogyCase],
    strategy: AnalogyStrategy,
    k: usize,
    seed: u64,
    topic: Option<&str>,
) -> Vec<AnalogyCase> {
    let pool: Vec<&AnalogyCase> = cases
        .iter()
        .filter(|c| c.strategy == strategy)
        .filter(|c| topic.is_none_or(|t| c.topic.eq_ignore_ascii_case(t)))
        .collect();
    if pool.len() <= k {
        return pool.into_iter().cloned().collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, pool.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| pool[i].clone()).collect()
}
