use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{IllustrationScheme, PipelineError};
use crate::genai::{generate_image, ImageBlob, ImageGenProvider, ImageRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaterialRole {
    Object,
    Background,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialOptions {
    pub count: u32,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    pub negative_prompt: String,
    pub max_in_flight: usize,
}

impl Default for MaterialOptions {
    fn default() -> Self {
        Self {
            count: 1,
            width: 512,
            height: 512,
            seed: 42,
            negative_prompt: "text, watermark, signature".into(),
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialImage {
    /// File name relative to the session's material directory.
    pub file: String,
    pub seed: u64,
    pub mime: String,
    pub width: u32,
    pub height: u32,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialItem {
    pub keyword: String,
    pub role: MaterialRole,
    pub prompt: String,
    pub seed: u64,
    pub images: Vec<MaterialImage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Generated materials in keyword order. `blobs` pairs file names with image bytes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MaterialSet {
    pub prefix: String,
    pub items: Vec<MaterialItem>,
    #[serde(skip)]
    pub blobs: Vec<(String, Vec<u8>)>,
}

/// Lowercase ASCII slug: `"Eiffel Tower"` → `"eiffel-tower"`.
pub fn slug(keyword: &str) -> String {
    let mut out = String::new();
    for c in keyword.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    let out = out.trim_end_matches('-').to_string();
    if out.is_empty() {
        "keyword".into()
    } else {
        out
    }
}

type JobResult = Result<Vec<ImageBlob>, String>;

fn role_of(scheme: &IllustrationScheme, keyword: &str) -> Option<MaterialRole> {
    if scheme.objects.iter().any(|o| o == keyword) {
        Some(MaterialRole::Object)
    } else if scheme.background.iter().any(|b| b == keyword) {
        Some(MaterialRole::Background)
    } else {
        None
    }
}

/// One image request per selected keyword, each prompt being the scheme's
/// visual-attribute prefix followed by the keyword. Requests run concurrently up
/// to `max_in_flight`; results keep selection order.
pub fn generate_materials(
    scheme: &IllustrationScheme,
    selected: &[String],
    provider: &dyn ImageGenProvider,
    options: &MaterialOptions,
) -> Result<MaterialSet, PipelineError> {
    if selected.is_empty() {
        return Err(PipelineError::Argument("select at least one object or background keyword".into()));
    }
    let prefix = scheme.visual_prefix();
    let mut jobs = Vec::with_capacity(selected.len());
    for (i, keyword) in selected.iter().enumerate() {
        let role = role_of(scheme, keyword)
            .ok_or_else(|| PipelineError::Argument(format!("`{keyword}` is not an object or background keyword of the scheme")))?;
        let request = ImageRequest {
            prompt: format!("{prefix}, {keyword}"),
            negative_prompt: options.negative_prompt.clone(),
            width: options.width,
            height: options.height,
            seed: options.seed + i as u64 * u64::from(options.count),
            count: options.count,
        };
        jobs.push((keyword.clone(), role, request));
    }

    let results: Mutex<Vec<Option<JobResult>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let workers = options.max_in_flight.clamp(1, jobs.len());
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((_, _, request)) = jobs.get(i) else {
                    break;
                };
                let out = generate_image(provider, request).map_err(|e| e.to_string());
                results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(out);
            });
        }
    });

    let mut set = MaterialSet {
        prefix,
        ..Default::default()
    };
    let results = results.into_inner().unwrap_or_else(|e| e.into_inner());
    for ((keyword, role, request), result) in jobs.into_iter().zip(results) {
        let mut item = MaterialItem {
            keyword: keyword.clone(),
            role,
            prompt: request.prompt,
            seed: request.seed,
            images: Vec::new(),
            error: None,
        };
        match result.expect("every job ran") {
            Ok(blobs) => {
                for blob in blobs {
                    let file = format!("{}-{}.{}", slug(&keyword), blob.seed, blob.extension());
                    item.images.push(MaterialImage {
                        file: file.clone(),
                        seed: blob.seed,
                        mime: blob.mime.clone(),
                        width: blob.width,
                        height: blob.height,
                        sha256: hex::encode(Sha256::digest(&blob.bytes)),
                    });
                    set.blobs.push((file, blob.bytes));
                }
            }
            Err(e) => {
                tracing::warn!(keyword = %keyword, error = %e, "material request failed");
                item.error = Some(e);
            }
        }
        set.items.push(item);
    }
    if set.items.iter().all(|i| i.error.is_some()) {
        let reasons: Vec<String> = set
            .items
            .iter()
            .map(|i| format!("{}: {}", i.keyword, i.error.as_deref().unwrap_or_default()))
            .collect();
        return Err(PipelineError::Materials(format!("every request failed ({})", reasons.join("; "))));
    }
    Ok(set)
}

#[derive(Serialize)]
struct Sidecar<'a> {
    keyword: &'a str,
    role: MaterialRole,
    prompt: &'a str,
    #[serde(flatten)]
    image: &'a MaterialImage,
}

/// Writes every image as `<dir>/<file>` with a `.json` sidecar next to it.
pub fn write_materials(dir: &Path, set: &MaterialSet) -> Result<(), PipelineError> {
    let io = |path: &Path, e: std::io::Error| PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    for item in &set.items {
        for image in &item.images {
            let bytes = set
                .blobs
                .iter()
                .find(|(name, _)| *name == image.file)
                .map(|(_, b)| b)
                .ok_or_else(|| PipelineError::Materials(format!("no bytes for {}", image.file)))?;
            let path = dir.join(&image.file);
            fs::write(&path, bytes).map_err(|e| io(&path, e))?;
            let sidecar = Sidecar {
                keyword: &item.keyword,
                role: item.role,
                prompt: &item.prompt,
                image,
            };
            let meta = path.with_extension("json");
            let mut text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
            text.push('\n');
            fs::write(&meta, text).map_err(|e| io(&meta, e))?;
        }
    }
    Ok(())
}
