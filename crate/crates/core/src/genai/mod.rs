//! Text and image generation providers, prompt templates, and deterministic mocks.
//!
//! Nothing in this module does arithmetic on analogy values.

mod mock;
mod remote;
mod template;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use mock::{MockImageProvider, MockScript, MockTextProvider, ScriptEntry};
pub use remote::{InFlightLimit, RemoteImageProvider, RemoteTextProvider, RetryPolicy};
pub use template::{slots, PromptSet, PromptTemplate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenAiError {
    #[error("template `{template}` is missing slot `{slot}`")]
    MissingSlot { template: String, slot: String },
    #[error("prompt asset: {0}")]
    Asset(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("unscripted prompt (sha256 {hash})")]
    Unscripted { hash: String },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("provider returned an empty completion")]
    Empty,
    #[error("provider refused the request: {0}")]
    Refused(String),
    #[error("invalid request: {0}")]
    Argument(String),
    #[error("unparseable output after {attempts} attempt(s): {message}")]
    Unparseable { attempts: u32, message: String },
    #[error("provider configuration: {0}")]
    Configuration(String),
}

/// Decoding settings passed through to the language model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default)]
    pub stop: Vec<String>,
}

impl Default for DecodingParams {
    fn default() -> Self {
        Self {
            temperature: 0.7,
            max_tokens: 800,
            stop: Vec::new(),
        }
    }
}

pub trait TextGenProvider: Send + Sync {
    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRequest {
    pub prompt: String,
    pub negative_prompt: String,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    pub count: u32,
}

/// One generated image. `seed` is the per-image seed (request seed + index).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBlob {
    pub bytes: Vec<u8>,
    pub mime: String,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
}

impl ImageBlob {
    pub fn extension(&self) -> &'static str {
        match self.mime.as_str() {
            "image/jpeg" => "jpg",
            "image/webp" => "webp",
            _ => "png",
        }
    }
}

pub trait ImageGenProvider: Send + Sync {
    fn generate(&self, request: &ImageRequest) -> Result<Vec<ImageBlob>, ProviderError>;
}

pub const MIN_SIDE: u32 = 64;
pub const MAX_SIDE: u32 = 2048;
pub const MAX_COUNT: u32 = 8;

/// Hex SHA-256 of a prompt; the key mock scripts are indexed by.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Calls `provider`, trimming the reply and rejecting empty prompts and completions.
pub fn complete(provider: &dyn TextGenProvider, prompt: &str, params: &DecodingParams) -> Result<String, ProviderError> {
    if prompt.trim().is_empty() {
        return Err(ProviderError::Argument("prompt is empty".into()));
    }
    let text = provider.complete(prompt, params)?;
    let text = text.trim();
    if text.is_empty() {
        return Err(ProviderError::Empty);
    }
    Ok(text.to_string())
}

/// Completes and parses structured output, re-asking up to `retries` extra times
/// when the reply does not parse.
pub fn complete_parsed<T>(
    provider: &dyn TextGenProvider,
    prompt: &str,
    params: &DecodingParams,
    retries: u32,
    mut parse: impl FnMut(&str) -> Result<T, String>,
) -> Result<T, ProviderError> {
    let mut last = String::new();
    for attempt in 0..=retries {
        let text = complete(provider, prompt, params)?;
        match parse(&text) {
            Ok(v) => return Ok(v),
            Err(e) => {
                tracing::warn!(attempt = attempt + 1, error = %e, "structured output did not parse");
                last = e;
            }
        }
    }
    Err(ProviderError::Unparseable {
        attempts: retries + 1,
        message: last,
    })
}

pub fn validate_image_request(request: &ImageRequest) -> Result<(), ProviderError> {
    if request.count == 0 || request.count > MAX_COUNT {
        return Err(ProviderError::Argument(format!(
            "count must be within 1..={MAX_COUNT}, got {}",
            request.count
        )));
    }
    for (name, side) in [("width", request.width), ("height", request.height)] {
        if !(MIN_SIDE..=MAX_SIDE).contains(&side) || side % 8 != 0 {
            return Err(ProviderError::Argument(format!(
                "{name} must be a multiple of 8 within {MIN_SIDE}..={MAX_SIDE}, got {side}"
            )));
        }
    }
    if request.prompt.trim().is_empty() {
        return Err(ProviderError::Argument("image prompt is empty".into()));
    }
    Ok(())
}

/// Validates the request, then asks the provider for `count` images.
pub fn generate_image(provider: &dyn ImageGenProvider, request: &ImageRequest) -> Result<Vec<ImageBlob>, ProviderError> {
    validate_image_request(request)?;
    let blobs = provider.generate(request)?;
    if blobs.len() != request.count as usize {
        return Err(ProviderError::Refused(format!(
            "asked for {} image(s), received {}",
            request.count,
            blobs.len()
        )));
    }
    Ok(blobs)
}
