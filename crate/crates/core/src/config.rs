//! Shared configuration file and the engine assembled from it.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::designspace::{load_corpus, AnalogyCase};
use crate::genai::{
    ImageGenProvider, MockImageProvider, MockTextProvider, PromptSet, RemoteImageProvider, RemoteTextProvider,
    RetryPolicy, TextGenProvider,
};
use crate::lexicon::{Lexicon, LexiconPaths};
use crate::pipeline::{
    design_illustration, generate_materials, run_stage1, IllustrationScheme, MaterialOptions, MaterialSet,
    PipelineError, PipelineOptions, Stage1Context, Stage1Report, Stage1Request, StageError,
};
use crate::units::UnitRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    #[default]
    Mock,
    Remote,
}

impl std::str::FromStr for ProviderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "mock" => Ok(ProviderMode::Mock),
            "remote" => Ok(ProviderMode::Remote),
            _ => Err(format!("unknown provider mode `{s}` (expected mock or remote)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteSettings {
    pub retries: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
}

impl Default for RemoteSettings {
    fn default() -> Self {
        Self {
            retries: 2,
            backoff_ms: 250,
            timeout_secs: 60,
            max_in_flight: 4,
        }
    }
}

impl RemoteSettings {
    pub fn policy(&self) -> RetryPolicy {
        RetryPolicy {
            retries: self.retries,
            base_delay: Duration::from_millis(self.backoff_ms),
            timeout: Duration::from_secs(self.timeout_secs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: String,
    pub data_dir: PathBuf,
    pub provider: ProviderMode,
    /// Mock text script; required in mock mode.
    pub mock_script: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub prompts_dir: Option<PathBuf>,
    pub units_file: Option<PathBuf>,
    /// Upper bound on one pipeline call made by the server.
    pub request_timeout_secs: u64,
    pub design_retries: u32,
    pub lexicon: LexiconPaths,
    pub pipeline: PipelineOptions,
    pub materials: MaterialOptions,
    pub remote: RemoteSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("data"),
            provider: ProviderMode::Mock,
            mock_script: None,
            corpus: None,
            prompts_dir: None,
            units_file: None,
            request_timeout_secs: 300,
            design_retries: 1,
            lexicon: LexiconPaths::default(),
            pipeline: PipelineOptions::default(),
            materials: MaterialOptions::default(),
            remote: RemoteSettings::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config {path}: {message}")]
    File { path: String, message: String },
    #[error("config: {0}")]
    Invalid(String),
    #[error("loading resources: {0}")]
    Resource(String),
    #[error("provider setup: {0}")]
    Provider(String),
}

pub const ENV_LISTEN: &str = "ANALOGIST_LISTEN";
pub const ENV_DATA_DIR: &str = "ANALOGIST_DATA_DIR";
pub const ENV_PROVIDER: &str = "ANALOGIST_PROVIDER";
pub const ENV_MOCK_SCRIPT: &str = "ANALOGIST_MOCK_SCRIPT";
pub const ENV_CORPUS: &str = "ANALOGIST_CORPUS";

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn rebase_opt(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(p) = p {
        rebase(base, p);
    }
}

impl Config {
    /// Reads a TOML file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let err = |message: String| ConfigError::File {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let mut config: Config = toml::from_str(&text).map_err(|e| err(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        config.rebase(&base);
        Ok(config)
    }

    pub fn rebase(&mut self, base: &Path) {
        rebase(base, &mut self.data_dir);
        rebase_opt(base, &mut self.mock_script);
        rebase_opt(base, &mut self.corpus);
        rebase_opt(base, &mut self.prompts_dir);
        rebase_opt(base, &mut self.units_file);
        let l = &mut self.lexicon;
        rebase_opt(base, &mut l.graph);
        rebase_opt(base, &mut l.frequency);
        rebase_opt(base, &mut l.concreteness);
        rebase_opt(base, &mut l.embeddings);
    }

    /// Applies `ANALOGIST_*` overrides from `lookup` (normally the process environment).
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = lookup(ENV_LISTEN) {
            self.listen = v;
        }
        if let Some(v) = lookup(ENV_DATA_DIR) {
            self.data_dir = v.into();
        }
        if let Some(v) = lookup(ENV_PROVIDER) {
            self.provider = v.parse().map_err(ConfigError::Invalid)?;
        }
        if let Some(v) = lookup(ENV_MOCK_SCRIPT) {
            self.mock_script = Some(v.into());
        }
        if let Some(v) = lookup(ENV_CORPUS) {
            self.corpus = Some(v.into());
        }
        Ok(())
    }

    pub fn from_env_and_file(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        Ok(config)
    }
}

/// Loaded resources and providers; cheap to share behind an `Arc`.
pub struct Engine {
    pub text: Arc<dyn TextGenProvider>,
    pub image: Arc<dyn ImageGenProvider>,
    pub lexicon: Lexicon,
    pub registry: UnitRegistry,
    pub prompts: PromptSet,
    pub corpus: Vec<AnalogyCase>,
    pub options: PipelineOptions,
    pub materials: MaterialOptions,
    pub design_retries: u32,
}

impl Engine {
    pub fn from_config(config: &Config) -> Result<Self, ConfigError> {
        let res = |e: &dyn std::fmt::Display| ConfigError::Resource(e.to_string());
        let lexicon = Lexicon::load(&config.lexicon).map_err(|e| res(&e))?;
        let mut registry = UnitRegistry::builtin();
        if let Some(p) = &config.units_file {
            registry.extend_from_file(p).map_err(|e| res(&e))?;
        }
        let prompts = match &config.prompts_dir {
            Some(dir) => PromptSet::with_overrides(dir).map_err(|e| res(&e))?,
            None => PromptSet::builtin(),
        };
        let corpus = match &config.corpus {
            Some(p) => load_corpus(p).map_err(|e| res(&e))?,
            None => Vec::new(),
        };
        let (text, image): (Arc<dyn TextGenProvider>, Arc<dyn ImageGenProvider>) = match config.provider {
            ProviderMode::Mock => {
                let script = config
                    .mock_script
                    .as_ref()
                    .ok_or_else(|| ConfigError::Invalid("mock provider needs a mock script".into()))?;
                let text = MockTextProvider::load(script).map_err(|e| ConfigError::Provider(e.to_string()))?;
                (Arc::new(text), Arc::new(MockImageProvider::new()))
            }
            ProviderMode::Remote => {
                let s = &config.remote;
                let text = RemoteTextProvider::from_env(s.policy(), s.max_in_flight)
                    .map_err(|e| ConfigError::Provider(e.to_string()))?;
                let image = RemoteImageProvider::from_env(s.policy(), s.max_in_flight)
                    .map_err(|e| ConfigError::Provider(e.to_string()))?;
                (Arc::new(text), Arc::new(image))
            }
        };
        Ok(Self {
            text,
            image,
            lexicon,
            registry,
            prompts,
            corpus,
            options: config.pipeline.clone(),
            materials: config.materials.clone(),
            design_retries: config.design_retries,
        })
    }

    pub fn stage1(&self, request: &Stage1Request) -> Result<Stage1Report, StageError> {
        let ctx = Stage1Context {
            text: self.text.as_ref(),
            lexicon: &self.lexicon,
            registry: &self.registry,
            prompts: &self.prompts,
            corpus: &self.corpus,
            options: &self.options,
        };
        run_stage1(request, &ctx)
    }

    pub fn design(&self, sentence: &str) -> Result<IllustrationScheme, StageError> {
        design_illustration(sentence, self.text.as_ref(), &self.prompts, &self.options.decoding, self.design_retries)
            .map_err(|e| e.at("stage2.design"))
    }

    pub fn materials(&self, scheme: &IllustrationScheme, selected: &[String]) -> Result<MaterialSet, StageError> {
        generate_materials(scheme, selected, self.image.as_ref(), &self.materials).map_err(|e: PipelineError| e.at("stage2.materials"))
    }
}
