use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::genai::{complete, complete_parsed, slots, DecodingParams, PromptSet, ProviderError, TextGenProvider};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    pub color_temperature: Vec<String>,
    pub brightness: Vec<String>,
    pub contrast: Vec<String>,
    pub base_hues: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualAttributes {
    pub emotion: Vec<String>,
    pub style: Vec<String>,
    pub palette: Palette,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IllustrationScheme {
    pub theme: String,
    pub visual_attributes: VisualAttributes,
    pub objects: Vec<String>,
    pub background: Vec<String>,
}

impl IllustrationScheme {
    fn groups(&self) -> [(&'static str, &Vec<String>); 8] {
        let v = &self.visual_attributes;
        [
            ("emotion", &v.emotion),
            ("style", &v.style),
            ("color_temperature", &v.palette.color_temperature),
            ("brightness", &v.palette.brightness),
            ("contrast", &v.palette.contrast),
            ("base_hues", &v.palette.base_hues),
            ("objects", &self.objects),
            ("background", &self.background),
        ]
    }

    /// Every group must be non-empty and every keyword must have text.
    pub fn validate(&self) -> Result<(), String> {
        for (name, words) in self.groups() {
            if words.is_empty() {
                return Err(format!("group `{name}` is empty"));
            }
            if words.iter().any(|w| w.trim().is_empty()) {
                return Err(format!("group `{name}` has an empty keyword"));
            }
        }
        Ok(())
    }

    /// Replaces the object keywords and re-validates.
    pub fn with_objects(mut self, objects: Vec<String>) -> Result<Self, PipelineError> {
        self.objects = objects.into_iter().map(|o| o.trim().to_string()).collect();
        self.validate().map_err(PipelineError::Design)?;
        Ok(self)
    }

    pub fn with_background(mut self, background: Vec<String>) -> Result<Self, PipelineError> {
        self.background = background.into_iter().map(|o| o.trim().to_string()).collect();
        self.validate().map_err(PipelineError::Design)?;
        Ok(self)
    }

    /// The keyword block shared by every material prompt of this scheme.
    pub fn visual_prefix(&self) -> String {
        let v = &self.visual_attributes;
        let p = &v.palette;
        let mut parts: Vec<String> = Vec::new();
        parts.extend(v.style.iter().cloned());
        parts.extend(v.emotion.iter().map(|e| format!("{e} mood")));
        parts.extend(p.color_temperature.iter().map(|t| format!("{t} color temperature")));
        parts.extend(p.brightness.iter().map(|b| format!("{b} brightness")));
        parts.extend(p.contrast.iter().map(|c| format!("{c} contrast")));
        parts.extend(p.base_hues.iter().map(|h| format!("{h} hues")));
        parts.join(", ")
    }
}

/// Splits a comma-separated keyword list, trimming and dropping empties and repeats.
pub fn parse_keywords(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for k in text.split([',', ';']) {
        let k = k.trim().trim_matches(['"', '\'', '.']).trim();
        if !k.is_empty() && !out.iter().any(|o| o.eq_ignore_ascii_case(k)) {
            out.push(k.to_string());
        }
    }
    out
}

/// Parses the keyword reply into a scheme. Labels are case-insensitive and may be
/// bulleted or bolded; unknown labels are ignored.
pub fn parse_scheme(theme: &str, reply: &str) -> Result<IllustrationScheme, String> {
    let mut scheme = IllustrationScheme {
        theme: theme.to_string(),
        ..Default::default()
    };
    for line in reply.lines() {
        let line = line.trim().trim_start_matches(['-', '*', '•']).trim();
        let Some((label, rest)) = line.split_once(':') else {
            continue;
        };
        let label = label.trim().trim_matches('*').trim().to_lowercase().replace([' ', '-'], "_");
        let slot = match label.as_str() {
            "emotion" => &mut scheme.visual_attributes.emotion,
            "style" => &mut scheme.visual_attributes.style,
            "color_temperature" => &mut scheme.visual_attributes.palette.color_temperature,
            "brightness" => &mut scheme.visual_attributes.palette.brightness,
            "contrast" | "color_contrast" => &mut scheme.visual_attributes.palette.contrast,
            "base_hues" | "hues" => &mut scheme.visual_attributes.palette.base_hues,
            "objects" => &mut scheme.objects,
            "background" | "backgrounds" => &mut scheme.background,
            _ => continue,
        };
        for k in parse_keywords(rest.trim_start_matches('*')) {
            if !slot.contains(&k) {
                slot.push(k);
            }
        }
    }
    scheme.validate()?;
    Ok(scheme)
}

/// Two chained calls: a theme interpretation, then keywords conditioned on it.
/// An incomplete keyword reply is re-requested up to `retries` times.
pub fn design_illustration(
    sentence: &str,
    provider: &dyn TextGenProvider,
    prompts: &PromptSet,
    params: &DecodingParams,
    retries: u32,
) -> Result<IllustrationScheme, PipelineError> {
    if sentence.trim().is_empty() {
        return Err(PipelineError::Argument("sentence is empty".into()));
    }
    let theme_prompt = prompts.render("design_theme", &slots([("sentence", sentence.to_string())]))?;
    let theme = complete(provider, &theme_prompt, params)?;
    let keyword_prompt = prompts.render(
        "design_keywords",
        &slots([("sentence", sentence.to_string()), ("theme", theme.clone())]),
    )?;
    complete_parsed(provider, &keyword_prompt, params, retries, |reply| parse_scheme(&theme, reply)).map_err(|e| match e {
        ProviderError::Unparseable { attempts, message } => {
            PipelineError::Design(format!("keywords unusable after {attempts} attempt(s): {message}"))
        }
        other => PipelineError::Provider(other),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genai::MockTextProvider;
    use std::sync::atomic::{AtomicU32, Ordering};

    const SENTENCE: &str = "Every day, 1.3 billion plastic bottles are sold around the world, stacking up to the height of half the Eiffel Tower.";
    const REPLY: &str = "emotion: urgency\nstyle: flat illustration\ncolor_temperature: cool\nbrightness: low\n\
        contrast: high\nbase_hues: blue-green\nobjects: plastic bottle, Eiffel Tower\nbackground: city skyline";

    fn scripted(reply: &str) -> MockTextProvider {
        let prompts = PromptSet::builtin();
        let theme_prompt = prompts.render("design_theme", &slots([("sentence", SENTENCE.into())])).unwrap();
        let kw_prompt = prompts
            .render("design_keywords", &slots([("sentence", SENTENCE.into()), ("theme", "plastic waste".into())]))
            .unwrap();
        MockTextProvider::default().with(&theme_prompt, "plastic waste").with(&kw_prompt, reply)
    }

    #[test]
    fn bottles_scheme() {
        let s = design_illustration(SENTENCE, &scripted(REPLY), &PromptSet::builtin(), &DecodingParams::default(), 1).unwrap();
        assert_eq!(s.visual_attributes.emotion, vec!["urgency"]);
        assert_eq!(s.visual_attributes.style, vec!["flat illustration"]);
        assert_eq!(s.visual_attributes.palette.base_hues, vec!["blue-green"]);
        assert_eq!(s.objects, vec!["plastic bottle", "Eiffel Tower"]);
        assert_eq!(s.background, vec!["city skyline"]);
        assert_eq!(
            s.visual_prefix(),
            "flat illustration, urgency mood, cool color temperature, low brightness, high contrast, blue-green hues"
        );
    }

    struct Counting(MockTextProvider, AtomicU32);

    impl TextGenProvider for Counting {
        fn complete(&self, prompt: &str, params: &DecodingParams) -> Result<String, ProviderError> {
            self.1.fetch_add(1, Ordering::SeqCst);
            self.0.complete(prompt, params)
        }
    }

    #[test]
    fn missing_background_retries_once_then_fails() {
        let reply = REPLY.replace("\nbackground: city skyline", "");
        let p = Counting(scripted(&reply), AtomicU32::new(0));
        let err = design_illustration(SENTENCE, &p, &PromptSet::builtin(), &DecodingParams::default(), 1).unwrap_err();
        assert!(matches!(err, PipelineError::Design(ref m) if m.contains("background")), "{err}");
        assert_eq!(p.1.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn edited_objects_revalidated() {
        let s = parse_scheme("t", REPLY).unwrap();
        let s2 = s.clone().with_objects(vec!["glass bottle".into()]).unwrap();
        assert_eq!(s2.objects, vec!["glass bottle"]);
        assert!(s.with_objects(vec![" ".into()]).is_err());
    }

    #[test]
    fn bold_labels() {
        let reply = REPLY.replace("emotion:", "**Emotion:**").replace("base_hues:", "- Base hues:");
        assert!(parse_scheme("t", &reply).is_ok());
    }
}
