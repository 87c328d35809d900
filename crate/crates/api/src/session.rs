use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use casemix_core::io::UfConfig;
use casemix_core::{SolveOutcome, SolveRequest};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

pub const DEFAULT_SESSION: &str = "default";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub index: usize,
    pub uf_config: UfConfig,
    pub request: SolveRequest,
    pub outcome: SolveOutcome,
}

/// A planner's what-if state: the current utility configuration and every
/// solve made so far, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub uf_config: UfConfig,
    pub history: Vec<HistoryEntry>,
}

pub(crate) struct Slot {
    pub session: Mutex<Session>,
    busy: AtomicBool,
}

/// Held while a session solves; a second solve on the same session is refused.
pub struct BusyGuard(Arc<Slot>);

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.0.busy.store(false, Ordering::Release);
    }
}

pub(crate) struct Store {
    slots: Mutex<HashMap<String, Arc<Slot>>>,
    dir: Option<PathBuf>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Store {
    /// Opens the store, loading any sessions persisted under `dir`.
    pub fn open(dir: Option<PathBuf>, default_config: UfConfig) -> std::io::Result<Store> {
        let store = Store {
            slots: Mutex::new(HashMap::new()),
            dir,
        };
        if let Some(dir) = &store.dir {
            std::fs::create_dir_all(dir)?;
            for entry in std::fs::read_dir(dir)? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "json") {
                    match load(&path) {
                        Ok(s) => store.insert(s),
                        Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping session file"),
                    }
                }
            }
        }
        if store.get(DEFAULT_SESSION).is_none() {
            store.insert(Session {
                id: DEFAULT_SESSION.into(),
                uf_config: default_config,
                history: Vec::new(),
            });
        }
        Ok(store)
    }

    fn insert(&self, s: Session) {
        let id = s.id.clone();
        let slot = Arc::new(Slot {
            session: Mutex::new(s),
            busy: AtomicBool::new(false),
        });
        self.slots.lock().unwrap().insert(id, slot);
    }

    pub fn get(&self, id: &str) -> Option<Arc<Slot>> {
        self.slots.lock().unwrap().get(id).cloned()
    }

    pub fn require(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.get(id)
            .ok_or_else(|| ApiError::not_found(format!("no session {id}")))
    }

    pub fn create(&self, config: UfConfig) -> Result<Session, ApiError> {
        let s = Session {
            id: uuid::Uuid::new_v4().simple().to_string(),
            uf_config: config,
            history: Vec::new(),
        };
        self.insert(s.clone());
        self.persist(&s)?;
        Ok(s)
    }

    /// Replaces the configuration, creating the session if needed.
    pub fn put_config(&self, id: &str, config: UfConfig) -> Result<Session, ApiError> {
        if !valid_id(id) {
            return Err(ApiError::bad_request("/id", "session ids are 1-64 of [A-Za-z0-9_-]"));
        }
        let slot = {
            let mut slots = self.slots.lock().unwrap();
            slots
                .entry(id.to_string())
                .or_insert_with(|| {
                    Arc::new(Slot {
                        session: Mutex::new(Session {
                            id: id.to_string(),
                            uf_config: config.clone(),
                            history: Vec::new(),
                        }),
                        busy: AtomicBool::new(false),
                    })
                })
                .clone()
        };
        let snapshot = {
            let mut s = slot.session.lock().unwrap();
            s.uf_config = config;
            s.clone()
        };
        self.persist(&snapshot)?;
        Ok(snapshot)
    }

    pub fn begin_solve(&self, id: &str) -> Result<BusyGuard, ApiError> {
        let slot = self.require(id)?;
        slot.busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .map_err(|_| ApiError::busy(id))?;
        Ok(BusyGuard(slot))
    }

    pub fn record(
        &self,
        id: &str,
        uf_config: UfConfig,
        request: SolveRequest,
        outcome: SolveOutcome,
    ) -> Result<usize, ApiError> {
        let slot = self.require(id)?;
        let snapshot = {
            let mut s = slot.session.lock().unwrap();
            let index = s.history.len();
            s.history.push(HistoryEntry {
                index,
                uf_config,
                request,
                outcome,
            });
            s.clone()
        };
        self.persist(&snapshot)?;
        Ok(snapshot.history.len() - 1)
    }

    fn persist(&self, s: &Session) -> Result<(), ApiError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(format!("{}.json", s.id));
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string(s).expect("session serializes");
        std::fs::write(&tmp, text)
            .and_then(|_| std::fs::rename(&tmp, &path))
            .map_err(|e| {
                ApiError::new(
                    axum::http::StatusCode::INTERNAL_SERVER_ERROR,
                    "internal",
                    format!("{}: {e}", path.display()),
                )
            })
    }
}

fn load(path: &Path) -> Result<Session, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}
