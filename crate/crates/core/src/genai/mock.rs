use std::collections::HashMap;
use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{prompt_hash, DecodingParams, GenAiError, ImageBlob, ImageGenProvider, ImageRequest, ProviderError, TextGenProvider};

/// One canned reply. Entries are keyed by `sha256`; `prompt` may be given
/// instead and is hashed at load time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    /// Free-form label, ignored by the mock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub response: String,
}

/// Mock script file: `{"version": 1, "responses": [...]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    pub version: u32,
    pub responses: Vec<ScriptEntry>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, GenAiError> {
        let text = fs::read_to_string(path).map_err(|e| GenAiError::Asset(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| GenAiError::Asset(format!("{}: {e}", path.display())))
    }

    pub fn push(&mut self, prompt: &str, response: impl Into<String>, note: Option<&str>) {
        self.responses.push(ScriptEntry {
            sha256: Some(prompt_hash(prompt)),
            prompt: None,
            note: note.map(str::to_string),
            response: response.into(),
        });
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("script serializes");
        out.push('\n');
        out
    }
}

/// Replays canned completions keyed by prompt hash. Decoding params do not
/// affect the reply, so the mock is a pure function of the prompt.
#[derive(Debug, Clone, Default)]
pub struct MockTextProvider {
    responses: HashMap<String, String>,
}

impl MockTextProvider {
    pub fn from_script(script: &MockScript) -> Result<Self, GenAiError> {
        let mut responses = HashMap::new();
        for entry in &script.responses {
            let key = match (&entry.sha256, &entry.prompt) {
                (Some(h), _) => h.to_lowercase(),
                (None, Some(p)) => prompt_hash(p),
                (None, None) => {
                    return Err(GenAiError::Asset("script entry needs `sha256` or `prompt`".into()));
                }
            };
            responses.insert(key, entry.response.clone());
        }
        Ok(Self { responses })
    }

    pub fn load(path: &Path) -> Result<Self, GenAiError> {
        Self::from_script(&MockScript::load(path)?)
    }

    /// Scripts a reply for an exact prompt.
    pub fn with(mut self, prompt: &str, response: impl Into<String>) -> Self {
        self.responses.insert(prompt_hash(prompt), response.into());
        self
    }
}

impl TextGenProvider for MockTextProvider {
    fn complete(&self, prompt: &str, _params: &DecodingParams) -> Result<String, ProviderError> {
        let hash = prompt_hash(prompt);
        self.responses
            .get(&hash)
            .cloned()
            .ok_or(ProviderError::Unscripted { hash })
    }
}

/// Produces deterministic PNG placeholders derived from the prompt and seed.
#[derive(Debug, Clone, Default)]
pub struct MockImageProvider {
    refuse: Vec<String>,
}

impl MockImageProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// Refuses any prompt containing `needle`.
    pub fn refusing(mut self, needle: impl Into<String>) -> Self {
        self.refuse.push(needle.into());
        self
    }

    fn render(prompt: &str, seed: u64, width: u32, height: u32) -> Vec<u8> {
        let digest = Sha256::new()
            .chain_update(prompt.as_bytes())
            .chain_update(seed.to_le_bytes())
            .finalize();
        let base = Rgb([digest[0], digest[1], digest[2]]);
        let accent = Rgb([digest[3], digest[4], digest[5]]);
        let band = u32::from(digest[6] % 8) + 4;
        let img = RgbImage::from_fn(width, height, |x, y| {
            if ((x + y) / (width.max(height) / band).max(1)).is_multiple_of(2) {
                base
            } else {
                accent
            }
        });
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png).expect("png encoding to memory");
        out.into_inner()
    }
}

impl ImageGenProvider for MockImageProvider {
    fn generate(&self, request: &ImageRequest) -> Result<Vec<ImageBlob>, ProviderError> {
        if let Some(needle) = self.refuse.iter().find(|n| request.prompt.contains(n.as_str())) {
            return Err(ProviderError::Refused(format!("prompt mentions `{needle}`")));
        }
        Ok((0..u64::from(request.count))
            .map(|i| {
                let seed = request.seed + i;
                ImageBlob {
                    bytes: Self::render(&request.prompt, seed, request.width, request.height),
                    mime: "image/png".into(),
                    seed,
                    width: request.width,
                    height: request.height,
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genai::{complete, generate_image};

    #[test]
    fn scripted_prompt_replays() {
        let mut script = MockScript {
            version: 1,
            ..Default::default()
        };
        script.push("p1", "A", Some("first"));
        let mock = MockTextProvider::from_script(&script).unwrap();
        let params = DecodingParams::default();
        assert_eq!(complete(&mock, "p1", &params).unwrap(), "A");
        assert_eq!(complete(&mock, "p1", &params).unwrap(), "A");
        assert!(matches!(complete(&mock, "p2", &params), Err(ProviderError::Unscripted { .. })));
    }

    #[test]
    fn prompt_keyed_entries_are_hashed() {
        let script: MockScript =
            serde_json::from_str(r#"{"version":1,"responses":[{"prompt":"hi","response":"there"}]}"#).unwrap();
        let mock = MockTextProvider::from_script(&script).unwrap();
        assert_eq!(mock.complete("hi", &DecodingParams::default()).unwrap(), "there");
    }

    #[test]
    fn images_are_deterministic_and_sized() {
        let provider = MockImageProvider::new();
        let req = ImageRequest {
            prompt: "plastic bottle".into(),
            negative_prompt: String::new(),
            width: 512,
            height: 512,
            seed: 7,
            count: 2,
        };
        let a = generate_image(&provider, &req).unwrap();
        let b = generate_image(&provider, &req).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a, b);
        assert_ne!(a[0].bytes, a[1].bytes);
        assert_eq!((a[1].seed, a[1].width), (8, 512));
        let decoded = image::load_from_memory(&a[0].bytes).unwrap();
        assert_eq!((decoded.width(), decoded.height()), (512, 512));
    }

    #[test]
    fn zero_count_rejected_before_provider() {
        let req = ImageRequest {
            prompt: "x".into(),
            negative_prompt: String::new(),
            width: 512,
            height: 512,
            seed: 1,
            count: 0,
        };
        assert!(matches!(generate_image(&MockImageProvider::new(), &req), Err(ProviderError::Argument(_))));
    }

    #[test]
    fn refusal() {
        let req = ImageRequest {
            prompt: "a forbidden thing".into(),
            negative_prompt: String::new(),
            width: 64,
            height: 64,
            seed: 1,
            count: 1,
        };
        let p = MockImageProvider::new().refusing("forbidden");
        assert!(matches!(p.generate(&req), Err(ProviderError::Refused(_))));
    }
}
