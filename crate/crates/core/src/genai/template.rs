use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use regex::{Captures, Regex};
use tracing::warn;

use super::GenAiError;

static SLOT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\{\{|\}\}|\{([a-z_][a-z0-9_]*)\}").expect("slot pattern compiles"));

/// Text with `{slot}` markers. `{{` and `}}` are literal braces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: String,
    pub body: String,
}

impl PromptTemplate {
    pub fn new(id: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            body: body.into(),
        }
    }

    /// Slot names appearing in the body, sorted.
    pub fn required_slots(&self) -> BTreeSet<String> {
        SLOT.captures_iter(&self.body)
            .filter_map(|c| c.get(1).map(|m| m.as_str().to_string()))
            .collect()
    }

    /// Substitutes the given slots and leaves the rest (and escaped braces) untouched.
    pub fn fill(&self, slots: &BTreeMap<String, String>) -> PromptTemplate {
        let body = SLOT.replace_all(&self.body, |c: &Captures| match c.get(1) {
            Some(name) => slots
                .get(name.as_str())
                .cloned()
                .unwrap_or_else(|| c[0].to_string()),
            None => c[0].to_string(),
        });
        PromptTemplate::new(self.id.clone(), body.into_owned())
    }

    /// Renders the final text. Every slot must be supplied; extra slots are ignored.
    pub fn render(&self, slots: &BTreeMap<String, String>) -> Result<String, GenAiError> {
        let required = self.required_slots();
        if let Some(missing) = required.iter().find(|s| !slots.contains_key(*s)) {
            return Err(GenAiError::MissingSlot {
                template: self.id.clone(),
                slot: missing.clone(),
            });
        }
        for extra in slots.keys().filter(|k| !required.contains(*k)) {
            warn!(template = %self.id, slot = %extra, "unused template slot");
        }
        let out = SLOT.replace_all(&self.body, |c: &Captures| match c.get(1) {
            Some(name) => slots[name.as_str()].clone(),
            None => c[0][..1].to_string(),
        });
        Ok(out.into_owned())
    }
}

/// Convenience for building slot maps from literal pairs.
pub fn slots<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

macro_rules! builtin {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../prompts/", $name, ".txt")))),*]
    };
}

const BUILTIN: &[(&str, &str)] = builtin!(
    "parse_statement",
    "generate",
    "guideline_comparison",
    "guideline_unitization",
    "guideline_accumulation",
    "guideline_proportion",
    "correct_values",
    "correct_names",
    "polish",
    "design_theme",
    "design_keywords",
    "sentence_comparison",
    "sentence_comparison_fraction",
    "sentence_unitization",
    "sentence_accumulation",
    "sentence_proportion",
);

/// Named templates, one per pipeline step, loaded from `prompts/<step>.txt`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    templates: HashMap<String, PromptTemplate>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptSet {
    pub fn builtin() -> Self {
        let templates = BUILTIN
            .iter()
            .map(|(name, body)| (name.to_string(), PromptTemplate::new(*name, body.trim_end_matches('\n'))))
            .collect();
        Self { templates }
    }

    /// Built-in templates overridden by any `<step>.txt` found in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, GenAiError> {
        let mut set = Self::builtin();
        let entries = fs::read_dir(dir).map_err(|e| GenAiError::Asset(format!("{}: {e}", dir.display())))?;
        for entry in entries {
            let path = entry.map_err(|e| GenAiError::Asset(e.to_string()))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let Some(name) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let body = fs::read_to_string(&path).map_err(|e| GenAiError::Asset(format!("{}: {e}", path.display())))?;
            set.templates
                .insert(name.to_string(), PromptTemplate::new(name, body.trim_end_matches('\n')));
        }
        Ok(set)
    }

    pub fn get(&self, name: &str) -> Result<&PromptTemplate, GenAiError> {
        self.templates
            .get(name)
            .ok_or_else(|| GenAiError::Asset(format!("no template named `{name}`")))
    }

    pub fn remove(&mut self, name: &str) -> Option<PromptTemplate> {
        self.templates.remove(name)
    }

    pub fn render(&self, name: &str, slots: &BTreeMap<String, String>) -> Result<String, GenAiError> {
        self.get(name)?.render(slots)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn substitution() {
        let t = PromptTemplate::new("t", "Compare {value} {unit}");
        let out = t
            .render(&slots([("value", "1.3 billion".into()), ("unit", "bottles".into())]))
            .unwrap();
        assert_eq!(out, "Compare 1.3 billion bottles");
    }

    #[test]
    fn missing_slot_is_named() {
        let t = PromptTemplate::new("t", "Compare {value} {unit}");
        match t.render(&slots([("value", "3".into())])) {
            Err(GenAiError::MissingSlot { slot, .. }) => assert_eq!(slot, "unit"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn slotless_body_unchanged() {
        let t = PromptTemplate::new("t", "No slots here.");
        assert_eq!(t.render(&BTreeMap::new()).unwrap(), "No slots here.");
    }

    #[test]
    fn escaped_braces_and_extra_slots() {
        let t = PromptTemplate::new("t", "{{\"x\": {v}}}");
        let out = t.render(&slots([("v", "1".into()), ("unused", "2".into())])).unwrap();
        assert_eq!(out, "{\"x\": 1}");
    }

    #[test]
    fn substituted_text_is_not_rescanned() {
        let t = PromptTemplate::new("t", "{a}");
        assert_eq!(t.render(&slots([("a", "{b}".into())])).unwrap(), "{b}");
    }

    #[test]
    fn builtin_assets_present() {
        let set = PromptSet::builtin();
        for (name, _) in BUILTIN {
            assert!(set.get(name).is_ok());
        }
        assert!(set.get("nope").is_err());
    }

    #[test]
    fn directory_overrides() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("polish.txt"), "Rewrite: {draft}\n").unwrap();
        let set = PromptSet::with_overrides(dir.path()).unwrap();
        assert_eq!(set.get("polish").unwrap().body, "Rewrite: {draft}");
        assert_eq!(set.get("generate").unwrap(), PromptSet::builtin().get("generate").unwrap());
    }

    proptest! {
        #[test]
        fn two_disjoint_fills_equal_one_render(
            a in "[a-z ]{0,12}", b in "[a-z ]{0,12}", c in "[a-z ]{0,12}",
        ) {
            let t = PromptTemplate::new("t", "<{x}|{y}|{z}|{x}>");
            let first = slots([("x", a.clone())]);
            let rest = slots([("y", b.clone()), ("z", c.clone())]);
            let union = slots([("x", a), ("y", b), ("z", c)]);
            let twice = t.fill(&first).render(&rest).unwrap();
            prop_assert_eq!(twice, t.render(&union).unwrap());
        }
    }
}
