//! HTTP providers. Credentials and endpoints come from environment variables only.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use base64::Engine as _;
use serde::Deserialize;
use serde_json::json;

use super::{DecodingParams, ImageBlob, ImageGenProvider, ImageRequest, ProviderError, TextGenProvider};

pub const ENV_LLM_BASE_URL: &str = "ANALOGIST_LLM_BASE_URL";
pub const ENV_LLM_API_KEY: &str = "ANALOGIST_LLM_API_KEY";
pub const ENV_LLM_MODEL: &str = "ANALOGIST_LLM_MODEL";
pub const ENV_IMAGE_BASE_URL: &str = "ANALOGIST_IMAGE_BASE_URL";
pub const ENV_IMAGE_API_KEY: &str = "ANALOGIST_IMAGE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Extra attempts after the first.
    pub retries: u32,
    pub base_delay: Duration,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 2,
            base_delay: Duration::from_millis(250),
            timeout: Duration::from_secs(60),
        }
    }
}

/// Counting semaphore bounding concurrent requests to one provider.
#[derive(Debug)]
pub struct InFlightLimit {
    max: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

pub struct InFlightPermit<'a>(&'a InFlightLimit);

impl InFlightLimit {
    pub fn new(max: usize) -> Self {
        Self {
            max: max.max(1),
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> InFlightPermit<'_> {
        let mut active = self.active.lock().unwrap_or_else(|e| e.into_inner());
        while *active >= self.max {
            active = self.freed.wait(active).unwrap_or_else(|e| e.into_inner());
        }
        *active += 1;
        InFlightPermit(self)
    }
}

impl Drop for InFlightPermit<'_> {
    fn drop(&mut self) {
        let mut active = self.0.active.lock().unwrap_or_else(|e| e.into_inner());
        *active -= 1;
        self.0.freed.notify_one();
    }
}

enum Attempt<T> {
    Done(T),
    Retry(ProviderError),
    Fatal(ProviderError),
}

fn with_retries<T>(policy: &RetryPolicy, mut call: impl FnMut(u32) -> Attempt<T>) -> Result<T, ProviderError> {
    let mut last = ProviderError::Transport {
        attempts: 0,
        message: "no attempt made".into(),
    };
    for attempt in 0..=policy.retries {
        if attempt > 0 {
            thread::sleep(policy.base_delay * 2u32.pow(attempt - 1));
        }
        match call(attempt + 1) {
            Attempt::Done(v) => return Ok(v),
            Attempt::Fatal(e) => return Err(e),
            Attempt::Retry(e) => last = e,
        }
    }
    Err(last)
}

fn classify(err: reqwest::Error, attempts: u32) -> ProviderError {
    if err.is_timeout() {
        ProviderError::Timeout { attempts }
    } else {
        ProviderError::Transport {
            attempts,
            message: err.to_string(),
        }
    }
}

fn env_required(name: &str) -> Result<String, ProviderError> {
    std::env::var(name).map_err(|_| ProviderError::Configuration(format!("environment variable {name} is not set")))
}

/// Chat-completions style endpoint: `POST {base}/chat/completions`.
pub struct RemoteTextProvider {
    base_url: String,
    api_key: Option<String>,
    model: String,
    policy: RetryPolicy,
    limit: InFlightLimit,
    client: reqwest::blocking::Client,
}

impl RemoteTextProvider {
    pub fn new(
        base_url: impl Into<String>,
        api_key: Option<String>,
        model: impl Into<String>,
        policy: RetryPolicy,
        max_in_flight: usize,
    ) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(policy.timeout)
            .build()
            .map_err(|e| ProviderError::Configuration(e.to_string()))?;
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            model: model.into(),
            policy,
            limit: InFlightLimit::new(max_in_flight),
            client,
        })
    }

    /// Reads `ANALOGIST_LLM_API_KEY` (required), `ANALOGIST_LLM_BASE_URL` and `ANALOGIST_LLM_MODEL`.
    pub fn from_env(policy: RetryPolicy, max_in_flight: usize) -> Result<Self, ProviderError> {
        let key = env_required(ENV_LLM_API_KEY)?;
        let base = std::env::var(ENV_LLM_BASE_URL).unwrap_or_else(|_| "https://api.openai.com/v1".into());
        let model = std::env::var(ENV_LLM_MODEL).unwrap_or_else(|_| "gpt-3.5-turbo".into());
        Self::new(base, Some(key), model, policy, max_in_flight)
    }
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

impl TextGenProvider for RemoteTextProvider {
    fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, ProviderError> {
        let _permit = self.limit.acquire();
        let mut body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        if !params.stop.is_empty() {
            body["stop"] = json!(params.stop);
        }
        let url = format!("{}/chat/completions", self.base_url);
        with_retries(&self.policy, |attempt| {
            let mut req = self.client.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp = match req.send() {
                Ok(r) => r,
                Err(e) => return Attempt::Retry(classify(e, attempt)),
            };
            let status = resp.status();
            if status.is_client_error() && status.as_u16() != 429 {
                let text = resp.text().unwrap_or_default();
                return Attempt::Fatal(ProviderError::Refused(format!("{status}: {text}")));
            }
            if !status.is_success() {
                return Attempt::Retry(ProviderError::Transport {
                    attempts: attempt,
                    message: format!("status {status}"),
                });
            }
            match resp.json::<ChatReply>() {
                Ok(reply) => {
                    let text = reply
                        .choices
                        .into_iter()
                        .next()
                        .and_then(|c| c.message.content)
                        .unwrap_or_default();
                    let text = text.trim();
                    if text.is_empty() {
                        Attempt::Fatal(ProviderError::Empty)
                    } else {
                        Attempt::Done(text.to_string())
                    }
                }
                Err(e) => Attempt::Retry(classify(e, attempt)),
            }
        })
    }
}

/// txt2img endpoint in the common `POST {base}/sdapi/v1/txt2img` shape,
/// replying `{"images": [base64, ...]}`.
pub struct RemoteImageProvider {
    base_url: String,
    api_key: Option<String>,
    policy: RetryPolicy,
    limit: InFlightLimit,
    client: reqwest::blocking::Client,
}

impl RemoteImageProvider {
    pub fn new(
        base_url: impl Into<String>,
        api_key: Option<String>,
        policy: RetryPolicy,
        max_in_flight: usize,
    ) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(policy.timeout)
            .build()
            .map_err(|e| ProviderError::Configuration(e.to_string()))?;
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            policy,
            limit: InFlightLimit::new(max_in_flight),
            client,
        })
    }

    /// Reads `ANALOGIST_IMAGE_BASE_URL` (required) and `ANALOGIST_IMAGE_API_KEY`.
    pub fn from_env(policy: RetryPolicy, max_in_flight: usize) -> Result<Self, ProviderError> {
        let base = env_required(ENV_IMAGE_BASE_URL)?;
        Self::new(base, std::env::var(ENV_IMAGE_API_KEY).ok(), policy, max_in_flight)
    }
}

#[derive(Deserialize)]
struct Txt2ImgReply {
    images: Vec<String>,
}

fn sniff_mime(bytes: &[u8]) -> &'static str {
    match bytes {
        [0x89, b'P', b'N', b'G', ..] => "image/png",
        [0xFF, 0xD8, ..] => "image/jpeg",
        [b'R', b'I', b'F', b'F', _, _, _, _, b'W', b'E', b'B', b'P', ..] => "image/webp",
        _ => "application/octet-stream",
    }
}

impl ImageGenProvider for RemoteImageProvider {
    fn generate(&self, request: &ImageRequest) -> Result<Vec<ImageBlob>, ProviderError> {
        let _permit = self.limit.acquire();
        let body = json!({
            "prompt": request.prompt,
            "negative_prompt": request.negative_prompt,
            "width": request.width,
            "height": request.height,
            "seed": request.seed,
            "batch_size": request.count,
        });
        let url = format!("{}/sdapi/v1/txt2img", self.base_url);
        let encoded = with_retries(&self.policy, |attempt| {
            let mut req = self.client.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp = match req.send() {
                Ok(r) => r,
                Err(e) => return Attempt::Retry(classify(e, attempt)),
            };
            let status = resp.status();
            if status.is_client_error() && status.as_u16() != 429 {
                return Attempt::Fatal(ProviderError::Refused(format!("status {status}")));
            }
            if !status.is_success() {
                return Attempt::Retry(ProviderError::Transport {
                    attempts: attempt,
                    message: format!("status {status}"),
                });
            }
            match resp.json::<Txt2ImgReply>() {
                Ok(r) => Attempt::Done(r.images),
                Err(e) => Attempt::Retry(classify(e, attempt)),
            }
        })?;
        encoded
            .iter()
            .enumerate()
            .map(|(i, b64)| {
                // Some servers prefix a data URL header.
                let payload = b64.rsplit_once(',').map_or(b64.as_str(), |(_, p)| p);
                let bytes = base64::engine::general_purpose::STANDARD
                    .decode(payload)
                    .map_err(|e| ProviderError::Refused(format!("image {i} is not base64: {e}")))?;
                Ok(ImageBlob {
                    mime: sniff_mime(&bytes).to_string(),
                    bytes,
                    seed: request.seed + i as u64,
                    width: request.width,
                    height: request.height,
                })
            })
            .collect()
    }
}
