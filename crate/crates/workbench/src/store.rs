//! Directory-backed store for elicitation sessions and solve results.
//!
//! Layout: `<root>/sessions/<ulid>.json` and `<root>/results/<ulid>.json`.
//! Files are replaced atomically; mutations of one session are serialized.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use opa_core::elicitation::ElicitationSession;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use ulid::Ulid;

use crate::document::{from_value, parse_json, to_canonical_json, ResultDocument, SCHEMA_VERSION};
use crate::error::{Result, WorkbenchError};
use crate::models::SessionSource;

pub const DATA_DIR_ENV: &str = "OPA_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "opa-data";

/// Persisted form of a session; also the input of `elicit --replay`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionFile {
    pub schema_version: u32,
    pub id: String,
    pub session: ElicitationSession,
}

pub struct SessionStore {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

fn parse_id(id: &str) -> Result<Ulid> {
    Ulid::from_string(id).map_err(|_| WorkbenchError::NotFound(format!("no record with id `{id}`")))
}

impl SessionStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(root.join("sessions"))?;
        std::fs::create_dir_all(root.join("results"))?;
        Ok(SessionStore { root, locks: Mutex::new(HashMap::new()) })
    }

    /// Opens the directory named by `OPA_DATA_DIR`, or `./opa-data`.
    pub fn from_env() -> Result<Self> {
        let dir = std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from(DEFAULT_DATA_DIR), PathBuf::from);
        Self::open(dir)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, kind: &str, id: &Ulid) -> PathBuf {
        self.root.join(kind).join(format!("{id}.json"))
    }

    fn lock_for(&self, id: &str) -> Arc<Mutex<()>> {
        let mut map = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(id.to_string()).or_default().clone()
    }

    fn write_atomic(&self, path: &Path, text: &str) -> Result<()> {
        let dir = path.parent().unwrap_or(&self.root);
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(text.as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| WorkbenchError::Io(e.error))?;
        Ok(())
    }

    fn read<T: DeserializeOwned>(&self, kind: &str, id: &str) -> Result<T> {
        let ulid = parse_id(id)?;
        let text = match std::fs::read_to_string(self.path(kind, &ulid)) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(WorkbenchError::NotFound(format!("no record with id `{id}`")))
            }
            Err(e) => return Err(e.into()),
        };
        from_value(parse_json(&text)?)
    }

    fn save_session(&self, id: &Ulid, session: &ElicitationSession) -> Result<()> {
        let file = SessionFile { schema_version: SCHEMA_VERSION, id: id.to_string(), session: session.clone() };
        self.write_atomic(&self.path("sessions", id), &to_canonical_json(&file)?)
    }

    pub fn create_session(&self, session: &ElicitationSession) -> Result<String> {
        let id = Ulid::new();
        self.save_session(&id, session)?;
        Ok(id.to_string())
    }

    pub fn session_file(&self, id: &str) -> Result<SessionFile> {
        self.read("sessions", id)
    }

    /// Applies `f` under the session's lock and persists the result when `f` succeeds.
    pub fn update_session<T>(&self, id: &str, f: impl FnOnce(&mut ElicitationSession) -> Result<T>) -> Result<T> {
        let ulid = parse_id(id)?;
        let lock = self.lock_for(id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut session = self.session_file(id)?.session;
        let before = session.clone();
        let out = f(&mut session)?;
        if session != before {
            self.save_session(&ulid, &session)?;
        }
        Ok(out)
    }

    pub fn save_result(&self, doc: &ResultDocument) -> Result<String> {
        let id = Ulid::new();
        self.write_atomic(&self.path("results", &id), &to_canonical_json(doc)?)?;
        Ok(id.to_string())
    }

    pub fn load_result(&self, id: &str) -> Result<ResultDocument> {
        self.read("results", id)
    }
}

impl SessionSource for SessionStore {
    fn load_session(&self, id: &str) -> Result<ElicitationSession> {
        Ok(self.session_file(id)?.session)
    }
}
