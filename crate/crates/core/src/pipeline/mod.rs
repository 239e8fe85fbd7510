//! The two-stage generation flow: statement → candidates → correction →
//! backend arithmetic → ranked sentences, then illustration design and materials.

mod calc;
mod correct;
mod design;
mod generate;
mod materials;
mod sentence;
mod stage1;
mod statement;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::designspace::{AnalogyStrategy, DataBindingType};
use crate::genai::{GenAiError, ProviderError};
use crate::lexicon::LexiconError;
use crate::scoring::ScoringError;
use crate::units::UnitError;

pub use calc::{compute_multiplier, derive_larger_value, Calculation};
pub use correct::{correct_candidates, correction_line, parse_correction_reply, CorrectionLine};
pub use design::{design_illustration, parse_keywords, parse_scheme, IllustrationScheme, Palette, VisualAttributes};
pub use generate::{fewshot_block, generate_candidates, parse_candidate_lines, Generated};
pub use materials::{
    generate_materials, slug, write_materials, MaterialImage, MaterialItem, MaterialOptions, MaterialRole, MaterialSet,
};
pub use sentence::{
    compose_sentence, format_measure, numbers_in, polish_sentence, render_multiplier, AnalogySentence, Polished,
    Rounding, RoundingRule,
};
pub use stage1::{run_stage1, Analogy, PipelineOptions, Stage1Context, Stage1Report, Stage1Request, STAGE1_SCHEMA};
pub use statement::{parse_statement, DataStatement, StatementKind};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("cannot parse statement: {0}")]
    Parse(String),
    #[error("candidate generation: {0}")]
    Generation(String),
    #[error(transparent)]
    Unit(#[from] UnitError),
    #[error("configuration: {0}")]
    Configuration(String),
    #[error("illustration design: {0}")]
    Design(String),
    #[error("materials: {0}")]
    Materials(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Template(GenAiError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("writing {path}: {message}")]
    Io { path: String, message: String },
}

impl From<GenAiError> for PipelineError {
    fn from(e: GenAiError) -> Self {
        match e {
            GenAiError::Provider(p) => PipelineError::Provider(p),
            other => PipelineError::Template(other),
        }
    }
}

impl PipelineError {
    pub fn is_provider(&self) -> bool {
        matches!(self, PipelineError::Provider(_))
    }

    pub fn at(self, stage: &'static str) -> StageError {
        StageError { stage, source: self }
    }
}

/// A pipeline failure tagged with the step that produced it, e.g. `stage1.generate`.
#[derive(Debug, thiserror::Error)]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: PipelineError,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Generated,
    Corrected,
    UserEdited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    pub value: f64,
    pub unit: String,
}

/// Smaller object of a proportion pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterpart {
    pub object: String,
    pub value: f64,
    pub unit: String,
}

/// One recorded change to a candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Revision {
    pub step: String,
    pub field: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogyCandidate {
    pub id: String,
    pub object: String,
    pub value: f64,
    pub unit: String,
    pub quantity_kind: DataBindingType,
    pub strategy: AnalogyStrategy,
    pub measurement_transformed: bool,
    pub provenance: Provenance,
    /// One statement item expressed in the analog's dimension (e.g. height per bottle).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_item: Option<Measure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterpart: Option<Counterpart>,
    /// True when `value` was computed by the backend rather than proposed.
    #[serde(default)]
    pub derived_value: bool,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub history: Vec<Revision>,
}

impl AnalogyCandidate {
    pub(crate) fn revise(&mut self, step: &str, field: &str, from: String, to: String) {
        self.history.push(Revision {
            step: step.into(),
            field: field.into(),
            from,
            to,
        });
    }
}

/// Collects non-fatal problems. Each one is also logged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Warnings(pub Vec<String>);

impl Warnings {
    pub fn push(&mut self, message: impl Into<String>) {
        let message = message.into();
        tracing::warn!("{message}");
        self.0.push(message);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &String> {
        self.0.iter()
    }
}
