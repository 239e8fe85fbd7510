//! Session documents shared by the CLI and the server, with their state machine.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::pipeline::{IllustrationScheme, MaterialItem, MaterialSet, Provenance, Stage1Report, Stage1Request};
use crate::scoring::WeightConfig;

pub const SESSION_SCHEMA: &str = "analogist.session/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionState {
    Created,
    Generated,
    Chosen,
    Designed,
    Materialized,
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SessionState::Created => "created",
            SessionState::Generated => "generated",
            SessionState::Chosen => "chosen",
            SessionState::Designed => "designed",
            SessionState::Materialized => "materialized",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("invalid session: {0}")]
    Invalid(String),
    #[error("session storage {path}: {message}")]
    Storage { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub candidate_id: String,
    pub sentence: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub at: String,
    pub event: String,
}

/// Stored material metadata; image bytes live next to the session document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialRecord {
    pub prefix: String,
    pub items: Vec<MaterialItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub schema: String,
    pub id: String,
    pub created: String,
    pub state: SessionState,
    pub request: Stage1Request,
    pub stage1: Option<Stage1Report>,
    pub chosen: Option<Choice>,
    pub scheme: Option<IllustrationScheme>,
    pub materials: Option<MaterialRecord>,
    pub trace: Vec<TraceEntry>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Session ids are lowercase hex; anything else is rejected before touching disk.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_hexdigit() || c == '-')
}

impl Session {
    pub fn new(request: Stage1Request) -> Self {
        Self::with_id(uuid::Uuid::new_v4().simple().to_string(), request)
    }

    pub fn with_id(id: String, request: Stage1Request) -> Self {
        let mut s = Self {
            schema: SESSION_SCHEMA.into(),
            id,
            created: now(),
            state: SessionState::Created,
            request,
            stage1: None,
            chosen: None,
            scheme: None,
            materials: None,
            trace: Vec::new(),
        };
        s.log("created");
        s
    }

    pub fn created_at(&self) -> Option<DateTime<Utc>> {
        DateTime::parse_from_rfc3339(&self.created).ok().map(|d| d.with_timezone(&Utc))
    }

    fn log(&mut self, event: impl Into<String>) {
        self.trace.push(TraceEntry {
            at: now(),
            event: event.into(),
        });
    }

    fn require(&self, state: SessionState, step: &str) -> Result<(), SessionError> {
        if self.state < state {
            Err(SessionError::Conflict(format!("{step} required")))
        } else {
            Ok(())
        }
    }

    /// Stores a fresh stage-1 report and clears everything downstream of it.
    pub fn set_generated(&mut self, report: Stage1Report) {
        self.log(format!("generated {} analogies", report.analogies.len()));
        self.request.weights = report.weights;
        self.stage1 = Some(report);
        self.chosen = None;
        self.scheme = None;
        self.materials = None;
        self.state = SessionState::Generated;
    }

    pub fn report(&self) -> Result<&Stage1Report, SessionError> {
        self.stage1.as_ref().ok_or_else(|| SessionError::Conflict("generate required".into()))
    }

    /// Re-orders stored analogies; generation output is untouched.
    pub fn rerank(&mut self, weights: &WeightConfig) -> Result<(), SessionError> {
        self.require(SessionState::Generated, "generate")?;
        let report = self.stage1.as_mut().expect("generated sessions have a report");
        report.rerank(weights).map_err(|e| SessionError::Invalid(e.to_string()))?;
        self.request.weights = *weights;
        let f = &weights.factors;
        self.log(format!("reranked with weights {},{},{}", f.similarity, f.familiarity, f.concreteness));
        Ok(())
    }

    /// Picks a candidate, optionally replacing its sentence with user text.
    pub fn choose(&mut self, candidate_id: &str, edited: Option<String>) -> Result<&Choice, SessionError> {
        self.require(SessionState::Generated, "generate")?;
        let analogy = self
            .report()?
            .find(candidate_id)
            .ok_or_else(|| SessionError::NotFound(format!("candidate `{candidate_id}`")))?;
        let polished = analogy.candidate.sentence.polished.clone();
        let (sentence, provenance) = match edited.map(|e| e.trim().to_string()).filter(|e| !e.is_empty()) {
            Some(text) if text != polished => (text, Provenance::UserEdited),
            _ => (polished, analogy.candidate.candidate.provenance),
        };
        self.log(format!("chose {candidate_id}{}", if provenance == Provenance::UserEdited { " (edited)" } else { "" }));
        self.chosen = Some(Choice {
            candidate_id: candidate_id.to_string(),
            sentence,
            provenance,
        });
        self.scheme = None;
        self.materials = None;
        self.state = SessionState::Chosen;
        Ok(self.chosen.as_ref().expect("just set"))
    }

    pub fn chosen_sentence(&self) -> Result<&str, SessionError> {
        self.require(SessionState::Chosen, "choose_and_edit")?;
        Ok(&self.chosen.as_ref().expect("chosen sessions have a choice").sentence)
    }

    pub fn set_scheme(&mut self, scheme: IllustrationScheme) -> Result<(), SessionError> {
        self.require(SessionState::Chosen, "choose_and_edit")?;
        self.log(format!(
            "designed scheme with {} object and {} background keyword(s)",
            scheme.objects.len(),
            scheme.background.len()
        ));
        self.scheme = Some(scheme);
        self.materials = None;
        self.state = SessionState::Designed;
        Ok(())
    }

    pub fn scheme(&self) -> Result<&IllustrationScheme, SessionError> {
        self.require(SessionState::Designed, "design")?;
        Ok(self.scheme.as_ref().expect("designed sessions have a scheme"))
    }

    pub fn set_materials(&mut self, set: &MaterialSet) -> Result<(), SessionError> {
        self.require(SessionState::Designed, "design")?;
        let images: usize = set.items.iter().map(|i| i.images.len()).sum();
        let failed = set.items.iter().filter(|i| i.error.is_some()).count();
        self.log(format!("generated {images} material image(s), {failed} failed request(s)"));
        let mut record = MaterialRecord {
            prefix: set.prefix.clone(),
            items: set.items.clone(),
        };
        if let Some(previous) = self.materials.take() {
            let mut items = previous.items;
            items.retain(|old| !record.items.iter().any(|n| n.keyword == old.keyword));
            items.append(&mut record.items);
            record.items = items;
        }
        self.materials = Some(record);
        self.state = SessionState::Materialized;
        Ok(())
    }

    pub fn material_files(&self) -> impl Iterator<Item = &str> {
        self.materials
            .iter()
            .flat_map(|m| m.items.iter())
            .flat_map(|i| i.images.iter())
            .map(|img| img.file.as_str())
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("session serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, SessionError> {
        let s: Session = serde_json::from_str(text).map_err(|e| SessionError::Invalid(e.to_string()))?;
        if s.schema != SESSION_SCHEMA {
            return Err(SessionError::Invalid(format!("unsupported schema `{}`", s.schema)));
        }
        if let (Some(choice), Some(report)) = (&s.chosen, &s.stage1) {
            if report.find(&choice.candidate_id).is_none() {
                return Err(SessionError::Invalid(format!("chosen candidate `{}` is not in the list", choice.candidate_id)));
            }
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, SessionError> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => SessionError::NotFound(path.display().to_string()),
            _ => storage(path, e),
        })?;
        Self::from_json(&text)
    }

    /// Writes the document through a temporary file in the same directory and renames it into place.
    pub fn save(&self, path: &Path) -> Result<(), SessionError> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&dir).map_err(|e| storage(&dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| storage(&dir, e))?;
        tmp.write_all(self.to_json().as_bytes()).map_err(|e| storage(path, e))?;
        tmp.as_file().sync_all().map_err(|e| storage(path, e))?;
        tmp.persist(path).map_err(|e| storage(path, e.error))?;
        Ok(())
    }
}

fn storage(path: &Path, e: std::io::Error) -> SessionError {
    SessionError::Storage {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// One `<id>.json` document per session under `root`, with materials in `<id>/`.
#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

impl SessionStore {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self, SessionError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| storage(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn checked(&self, id: &str) -> Result<(), SessionError> {
        if valid_id(id) {
            Ok(())
        } else {
            Err(SessionError::NotFound(format!("session `{id}`")))
        }
    }

    pub fn document_path(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}.json"))
    }

    pub fn materials_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn save(&self, session: &Session) -> Result<(), SessionError> {
        self.checked(&session.id)?;
        session.save(&self.document_path(&session.id))
    }

    pub fn load(&self, id: &str) -> Result<Session, SessionError> {
        self.checked(id)?;
        Session::load(&self.document_path(id)).map_err(|e| match e {
            SessionError::NotFound(_) => SessionError::NotFound(format!("session `{id}`")),
            other => other,
        })
    }

    /// Ids of stored sessions, sorted.
    pub fn list(&self) -> Result<Vec<String>, SessionError> {
        let mut ids: Vec<String> = fs::read_dir(&self.root)
            .map_err(|e| storage(&self.root, e))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                let id = name.strip_suffix(".json")?;
                valid_id(id).then(|| id.to_string())
            })
            .collect();
        ids.sort();
        Ok(ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request() -> Stage1Request {
        Stage1Request {
            statement: "1.2 billion liters".into(),
            kind: Default::default(),
            strategy: None,
            weights: Default::default(),
            theme_hint: String::new(),
        }
    }

    #[test]
    fn order_is_enforced() {
        let mut s = Session::new(request());
        assert!(matches!(s.choose("c1", None), Err(SessionError::Conflict(m)) if m == "generate required"));
        assert!(matches!(s.chosen_sentence(), Err(SessionError::Conflict(m)) if m == "choose_and_edit required"));
        assert!(matches!(s.scheme(), Err(SessionError::Conflict(m)) if m == "design required"));
        assert!(matches!(s.rerank(&Default::default()), Err(SessionError::Conflict(_))));
    }

    #[test]
    fn ids_are_url_safe() {
        let s = Session::new(request());
        assert!(valid_id(&s.id));
        assert!(!valid_id("../etc/passwd"));
        assert!(!valid_id(""));
    }

    #[test]
    fn store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::new(dir.path()).unwrap();
        let s = Session::new(request());
        store.save(&s).unwrap();
        assert_eq!(store.load(&s.id).unwrap(), s);
        assert_eq!(store.list().unwrap(), vec![s.id.clone()]);
        assert!(matches!(store.load("abc"), Err(SessionError::NotFound(_))));
        assert!(matches!(store.load("../x"), Err(SessionError::NotFound(_))));
        assert!(s.created_at().is_some());
    }
}
