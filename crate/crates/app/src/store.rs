//! Services persisted as one canonical `<id>.svcspec.json` file each.
//!
//! Writes go to a temporary file that is renamed over the target, so a crash
//! leaves either the old or the new file, never a torn one. Leftover
//! temporaries are ignored on load.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::RwLock;

use searchsvc_core::codec::{self, FormatError, ImportReport, SPEC_FILE_EXTENSION};
use searchsvc_core::{validate_spec, ServiceSpec};
use thiserror::Error;

const TMP_SUFFIX: &str = ".tmp";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no service with id {0:?}")]
    NotFound(String),
    #[error("{0}")]
    Invalid(String),
    #[error("bad id {0:?}")]
    BadId(String),
    #[error("{file}: {error}")]
    Format { file: String, error: FormatError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("simulated crash before rename")]
    InjectedCrash,
}

/// A file skipped while opening the store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadProblem {
    pub file: PathBuf,
    pub message: String,
}

pub struct SpecStore {
    root: PathBuf,
    specs: RwLock<BTreeMap<String, ServiceSpec>>,
    problems: Vec<LoadProblem>,
    crash_before_rename: AtomicBool,
}

/// Ids become file names, so they are restricted to a portable alphabet.
pub fn is_storable_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.len() <= 128
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl SpecStore {
    /// Opens (creating if needed) the store at `root` and loads every spec.
    /// Unreadable files are reported through [`SpecStore::problems`].
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let mut specs = BTreeMap::new();
        let mut problems = Vec::new();
        let mut entries: Vec<PathBuf> = fs::read_dir(&root)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.ends_with(SPEC_FILE_EXTENSION))
            })
            .collect();
        entries.sort();
        for path in entries {
            let loaded = fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|text| codec::deserialize(&text).map_err(|e| e.to_string()));
            match loaded {
                Ok(spec) => {
                    specs.insert(spec.id.clone(), spec);
                }
                Err(message) => problems.push(LoadProblem { file: path, message }),
            }
        }
        Ok(Self {
            root,
            specs: RwLock::new(specs),
            problems,
            crash_before_rename: AtomicBool::new(false),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn problems(&self) -> &[LoadProblem] {
        &self.problems
    }

    /// Makes subsequent saves stop after writing the temporary file.
    pub fn inject_crash_before_rename(&self, on: bool) {
        self.crash_before_rename.store(on, Ordering::SeqCst);
    }

    pub fn path_of(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}{SPEC_FILE_EXTENSION}"))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.specs.read().expect("store lock").contains_key(id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.specs.read().expect("store lock").keys().cloned().collect()
    }

    /// All services ordered by id.
    pub fn list(&self) -> Vec<ServiceSpec> {
        self.specs.read().expect("store lock").values().cloned().collect()
    }

    pub fn get(&self, id: &str) -> Result<ServiceSpec, StoreError> {
        self.specs
            .read()
            .expect("store lock")
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    /// Validates and writes `spec`, replacing any service with the same id.
    pub fn save(&self, spec: &ServiceSpec) -> Result<(), StoreError> {
        if !is_storable_id(&spec.id) {
            return Err(StoreError::BadId(spec.id.clone()));
        }
        let report = validate_spec(spec);
        if !report.is_valid() {
            return Err(StoreError::Invalid(report.summary()));
        }
        let target = self.path_of(&spec.id);
        let tmp = self.root.join(format!("{}{SPEC_FILE_EXTENSION}{TMP_SUFFIX}", spec.id));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(codec::serialize(spec).as_bytes())?;
            f.sync_all()?;
        }
        if self.crash_before_rename.load(Ordering::SeqCst) {
            return Err(StoreError::InjectedCrash);
        }
        fs::rename(&tmp, &target)?;
        self.specs
            .write()
            .expect("store lock")
            .insert(spec.id.clone(), spec.clone());
        Ok(())
    }

    pub fn delete(&self, id: &str) -> Result<(), StoreError> {
        let mut specs = self.specs.write().expect("store lock");
        if specs.remove(id).is_none() {
            return Err(StoreError::NotFound(id.to_string()));
        }
        match fs::remove_file(self.path_of(id)) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e.into()),
            _ => Ok(()),
        }
    }

    /// Imports a bundle; colliding ids are renamed, invalid entries rejected.
    pub fn import_bundle(&self, text: &str) -> Result<ImportReport, StoreError> {
        let mut report = codec::import_bundle(text, &|id| self.contains(id)).map_err(|error| {
            StoreError::Format {
                file: "bundle".into(),
                error,
            }
        })?;
        // renamed ids derive from stored ones, so a failing id is the original
        let index_of = |id: &str| {
            serde_json::from_str::<serde_json::Value>(text)
                .ok()
                .and_then(|v| {
                    v.get("services")?
                        .as_array()?
                        .iter()
                        .position(|s| s.get("id").and_then(|i| i.as_str()) == Some(id))
                })
                .unwrap_or_default()
        };
        let mut saved = Vec::new();
        for spec in report.imported.drain(..) {
            match self.save(&spec) {
                Ok(()) => saved.push(spec),
                Err(e) => report.rejected.push(codec::RejectedEntry {
                    index: index_of(&spec.id),
                    id: Some(spec.id.clone()),
                    reason: e.to_string(),
                }),
            }
        }
        report.rejected.sort_by_key(|r| r.index);
        report.imported = saved;
        Ok(report)
    }

    pub fn export_bundle(&self, ids: &[String]) -> Result<String, StoreError> {
        let specs = if ids.is_empty() {
            self.list()
        } else {
            ids.iter().map(|id| self.get(id)).collect::<Result<Vec<_>, _>>()?
        };
        Ok(codec::export_bundle(&specs))
    }
}
