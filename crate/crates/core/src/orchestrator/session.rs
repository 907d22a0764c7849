//! Conversation records and their append-only on-disk store.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::validator::CompileReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    User,
    Assistant,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub text: String,
    #[serde(default)]
    pub model_label: Option<String>,
    #[serde(default)]
    pub compile_report: Option<CompileReport>,
    pub timestamp_ms: u64,
    #[serde(default)]
    pub liked: bool,
}

impl ChatTurn {
    pub fn user(text: &str, timestamp_ms: u64) -> Self {
        Self {
            role: Role::User,
            text: text.to_string(),
            model_label: None,
            compile_report: None,
            timestamp_ms,
            liked: false,
        }
    }

    pub fn assistant(label: &str, text: &str, report: Option<CompileReport>, timestamp_ms: u64) -> Self {
        Self {
            role: Role::Assistant,
            text: text.to_string(),
            model_label: Some(label.to_string()),
            compile_report: report,
            timestamp_ms,
            liked: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSettings {
    pub expansion: bool,
    /// Skips compilation entirely.
    pub draft_mode: bool,
    pub compile_enabled: bool,
}

impl Default for SessionSettings {
    fn default() -> Self {
        Self {
            expansion: false,
            draft_mode: false,
            compile_enabled: true,
        }
    }
}

impl SessionSettings {
    pub fn compiles(&self) -> bool {
        self.compile_enabled && !self.draft_mode
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatSession {
    pub id: String,
    pub turns: Vec<ChatTurn>,
    pub selected_model: Option<String>,
    pub settings: SessionSettings,
}

impl ChatSession {
    pub fn new(id: &str, settings: SessionSettings) -> Self {
        Self {
            id: id.to_string(),
            turns: Vec::new(),
            selected_model: None,
            settings,
        }
    }
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or_default()
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown session `{0}`")]
    NotFound(String),
    #[error("session `{0}` already has an active turn")]
    Busy(String),
    #[error("invalid session id `{0}`")]
    InvalidId(String),
    #[error("turn {0} does not exist")]
    NoSuchTurn(usize),
    #[error("session file is corrupt at line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("session I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Record {
    Create { id: String, settings: SessionSettings },
    Turn { turn: ChatTurn },
    Select { label: Option<String> },
    Settings { settings: SessionSettings },
    Like { index: usize, liked: bool },
}

fn apply(session: &mut ChatSession, record: Record) -> Result<(), String> {
    match record {
        Record::Create { .. } => return Err("second create record".into()),
        Record::Turn { turn } => session.turns.push(turn),
        Record::Select { label } => session.selected_model = label,
        Record::Settings { settings } => session.settings = settings,
        Record::Like { index, liked } => {
            let t = session.turns.get_mut(index).ok_or("like for a missing turn")?;
            t.liked = liked;
        }
    }
    Ok(())
}

/// Held while a turn is being answered; released on drop.
pub struct SessionGuard {
    flag: Arc<AtomicBool>,
}

impl Drop for SessionGuard {
    fn drop(&mut self) {
        self.flag.store(false, Ordering::Release);
    }
}

/// One JSON-lines file per session under a data directory.
pub struct SessionStore {
    dir: PathBuf,
    active: Mutex<HashMap<String, Arc<AtomicBool>>>,
    write: Mutex<()>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl SessionStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, SessionError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            active: Mutex::new(HashMap::new()),
            write: Mutex::new(()),
        })
    }

    fn path(&self, id: &str) -> Result<PathBuf, SessionError> {
        if !valid_id(id) {
            return Err(SessionError::InvalidId(id.to_string()));
        }
        Ok(self.dir.join(format!("{id}.jsonl")))
    }

    fn append(&self, id: &str, record: &Record) -> Result<(), SessionError> {
        let path = self.path(id)?;
        if !path.exists() {
            return Err(SessionError::NotFound(id.to_string()));
        }
        let _w = self.write.lock().expect("session write lock");
        let mut f = OpenOptions::new().append(true).open(path)?;
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(f, "{line}")?;
        Ok(())
    }

    pub fn create(&self, settings: SessionSettings) -> Result<ChatSession, SessionError> {
        let id = format!("{:032x}", rand::random::<u128>());
        self.create_with_id(&id, settings)
    }

    pub fn create_with_id(&self, id: &str, settings: SessionSettings) -> Result<ChatSession, SessionError> {
        let path = self.path(id)?;
        let _w = self.write.lock().expect("session write lock");
        let mut f = OpenOptions::new().write(true).create_new(true).open(path)?;
        let rec = Record::Create {
            id: id.to_string(),
            settings,
        };
        writeln!(f, "{}", serde_json::to_string(&rec).expect("record serializes"))?;
        Ok(ChatSession::new(id, settings))
    }

    pub fn exists(&self, id: &str) -> bool {
        self.path(id).map(|p| p.exists()).unwrap_or(false)
    }

    pub fn load(&self, id: &str) -> Result<ChatSession, SessionError> {
        let path = self.path(id)?;
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(SessionError::NotFound(id.to_string())),
            Err(e) => return Err(e.into()),
        };
        let mut session: Option<ChatSession> = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let corrupt = |message: String| SessionError::Corrupt { line: i + 1, message };
            let rec: Record = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
            match (&mut session, rec) {
                (None, Record::Create { id, settings }) => session = Some(ChatSession::new(&id, settings)),
                (None, _) => return Err(corrupt("missing create record".into())),
                (Some(s), rec) => apply(s, rec).map_err(corrupt)?,
            }
        }
        session.ok_or_else(|| SessionError::Corrupt {
            line: 0,
            message: "empty session file".into(),
        })
    }

    pub fn append_turn(&self, id: &str, turn: &ChatTurn) -> Result<(), SessionError> {
        self.append(id, &Record::Turn { turn: turn.clone() })
    }

    pub fn select_model(&self, id: &str, label: Option<&str>) -> Result<(), SessionError> {
        self.append(
            id,
            &Record::Select {
                label: label.map(str::to_string),
            },
        )
    }

    pub fn update_settings(&self, id: &str, settings: SessionSettings) -> Result<(), SessionError> {
        self.append(id, &Record::Settings { settings })
    }

    pub fn set_liked(&self, id: &str, index: usize, liked: bool) -> Result<(), SessionError> {
        let session = self.load(id)?;
        if index >= session.turns.len() {
            return Err(SessionError::NoSuchTurn(index));
        }
        self.append(id, &Record::Like { index, liked })
    }

    /// Claims the single-writer slot of a session.
    pub fn begin_turn(&self, id: &str) -> Result<SessionGuard, SessionError> {
        if !self.exists(id) {
            return Err(SessionError::NotFound(id.to_string()));
        }
        let flag = self
            .active
            .lock()
            .expect("session registry lock")
            .entry(id.to_string())
            .or_default()
            .clone();
        if flag.swap(true, Ordering::AcqRel) {
            return Err(SessionError::Busy(id.to_string()));
        }
        Ok(SessionGuard { flag })
    }

    pub fn list(&self) -> Result<Vec<String>, SessionError> {
        let mut ids: Vec<String> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                e.file_name()
                    .to_str()
                    .and_then(|n| n.strip_suffix(".jsonl"))
                    .map(str::to_string)
            })
            .collect();
        ids.sort();
        Ok(ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let s = store.create(SessionSettings::default()).unwrap();
        store.append_turn(&s.id, &ChatTurn::user("hello", 1)).unwrap();
        store
            .append_turn(&s.id, &ChatTurn::assistant("stub", "hi", None, 2))
            .unwrap();
        store.select_model(&s.id, Some("stub")).unwrap();
        store.set_liked(&s.id, 1, true).unwrap();
        let settings = SessionSettings {
            expansion: true,
            draft_mode: true,
            compile_enabled: false,
        };
        store.update_settings(&s.id, settings).unwrap();

        let reopened = SessionStore::open(dir.path()).unwrap();
        let back = reopened.load(&s.id).unwrap();
        assert_eq!(back.turns.len(), 2);
        assert!(back.turns[1].liked);
        assert_eq!(back.selected_model.as_deref(), Some("stub"));
        assert_eq!(back.settings, settings);
        assert_eq!(reopened.list().unwrap(), vec![s.id.clone()]);
    }

    #[test]
    fn single_writer_guard() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let s = store.create(SessionSettings::default()).unwrap();
        let g = store.begin_turn(&s.id).unwrap();
        assert!(matches!(store.begin_turn(&s.id), Err(SessionError::Busy(_))));
        drop(g);
        assert!(store.begin_turn(&s.id).is_ok());
    }

    #[test]
    fn rejects_bad_ids_and_unknown_sessions() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        assert!(matches!(store.load("../etc"), Err(SessionError::InvalidId(_))));
        assert!(matches!(store.load("nope"), Err(SessionError::NotFound(_))));
        assert!(matches!(store.begin_turn("nope"), Err(SessionError::NotFound(_))));
    }
}
