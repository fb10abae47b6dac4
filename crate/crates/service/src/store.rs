//! One JSON file per session, replaced atomically on every save.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use thiserror::Error;
use uuid::Uuid;

use crate::session::Session;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no session {0}")]
    NotFound(Uuid),
    #[error("session {0} already exists")]
    Exists(Uuid),
    #[error("session {id} is unreadable: {message}")]
    Corrupt { id: Uuid, message: String },
    #[error("session store i/o: {0}")]
    Io(String),
}

fn io(context: &Path, e: impl std::fmt::Display) -> StoreError {
    StoreError::Io(format!("{}: {e}", context.display()))
}

pub struct SessionStore {
    dir: PathBuf,
    locks: Mutex<HashMap<Uuid, Arc<Mutex<()>>>>,
}

/// A loaded session whose per-session lock is held by the caller.
pub struct Locked<'a> {
    store: &'a SessionStore,
    pub session: Session,
}

impl Locked<'_> {
    pub fn save(&self) -> Result<(), StoreError> {
        self.store.write(&self.session)
    }
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        Ok(Self {
            dir,
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: Uuid) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    fn write(&self, session: &Session) -> Result<(), StoreError> {
        let json = serde_json::to_vec_pretty(session).map_err(|e| io(&self.dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(|e| io(&self.dir, e))?;
        tmp.write_all(&json).map_err(|e| io(tmp.path(), e))?;
        tmp.as_file().sync_all().map_err(|e| io(tmp.path(), e))?;
        let path = self.path(session.id);
        tmp.persist(&path).map_err(|e| io(&path, e))?;
        Ok(())
    }

    pub fn insert(&self, session: &Session) -> Result<(), StoreError> {
        let lock = self.lock_for(session.id);
        let _held = lock.lock().unwrap_or_else(|p| p.into_inner());
        if self.path(session.id).exists() {
            return Err(StoreError::Exists(session.id));
        }
        self.write(session)
    }

    pub fn load(&self, id: Uuid) -> Result<Session, StoreError> {
        let path = self.path(id);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(StoreError::NotFound(id)),
            Err(e) => return Err(io(&path, e)),
        };
        serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt {
            id,
            message: e.to_string(),
        })
    }

    fn lock_for(&self, id: Uuid) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|p| p.into_inner());
        locks.entry(id).or_default().clone()
    }

    /// Runs `f` on the stored session while no other caller can touch it.
    pub fn with_session<T, E>(&self, id: Uuid, f: impl FnOnce(&mut Locked<'_>) -> Result<T, E>) -> Result<T, E>
    where
        E: From<StoreError>,
    {
        let lock = self.lock_for(id);
        let _held = lock.lock().unwrap_or_else(|p| p.into_inner());
        let session = self.load(id)?;
        f(&mut Locked { store: self, session })
    }
}
