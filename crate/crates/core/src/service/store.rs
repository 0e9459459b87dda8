//! Plain-file persistence under a data directory:
//!
//! ```text
//! catalog.json            constraints.kbr        promotions.json
//! profiles/<id>.json      subscriptions/<id>.json usage/<id>.ndjson
//! ```
//!
//! Whole-document writes go through a temp file and a rename, so readers see
//! either the old or the new document.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::catalog::{parse_catalog, Catalog};
use crate::constraint_kb::{parse_profile, UserProfile};
use crate::context_engine::Promotions;
use crate::route_model::{valid_user_id, Subscription, UsageStore};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("invalid user id {0:?}")]
    InvalidUserId(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path} is corrupt: {reason}")]
    Corrupt { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Replaces `path` with `bytes` via a synced temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = dir.join(format!(".{name}.{}.{n}.tmp", std::process::id()));
    let result = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        // directory sync makes the rename itself durable; not every platform allows it
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn read_optional(path: &Path) -> Result<Option<String>, StoreError> {
    match fs::read_to_string(path) {
        Ok(t) => Ok(Some(t)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(path)(e)),
    }
}

/// Pretty JSON with a trailing newline, the format of every stored document.
pub fn to_document<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

#[derive(Debug)]
pub struct DataStore {
    root: PathBuf,
    usage: UsageStore,
}

impl DataStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<DataStore, StoreError> {
        let root = root.into();
        for sub in ["profiles", "subscriptions"] {
            let p = root.join(sub);
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        let usage_dir = root.join("usage");
        let usage = UsageStore::open(&usage_dir).map_err(io_err(&usage_dir))?;
        Ok(DataStore { root, usage })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn usage(&self) -> &UsageStore {
        &self.usage
    }

    pub fn catalog_path(&self) -> PathBuf {
        self.root.join("catalog.json")
    }

    pub fn rules_path(&self) -> PathBuf {
        self.root.join("constraints.kbr")
    }

    pub fn promotions_path(&self) -> PathBuf {
        self.root.join("promotions.json")
    }

    fn user_path(&self, dir: &str, user_id: &str) -> Result<PathBuf, StoreError> {
        if !valid_user_id(user_id) {
            return Err(StoreError::InvalidUserId(user_id.to_string()));
        }
        Ok(self.root.join(dir).join(format!("{user_id}.json")))
    }

    fn write(&self, path: &Path, text: &str) -> Result<(), StoreError> {
        write_atomic(path, text.as_bytes()).map_err(io_err(path))
    }

    fn load_json<T: DeserializeOwned>(&self, path: &Path) -> Result<Option<T>, StoreError> {
        let Some(text) = read_optional(path)? else { return Ok(None) };
        serde_json::from_str(&text).map(Some).map_err(|e| StoreError::Corrupt {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn load_catalog(&self) -> Result<Option<Catalog>, StoreError> {
        let path = self.catalog_path();
        let Some(text) = read_optional(&path)? else { return Ok(None) };
        parse_catalog(&text).map(Some).map_err(|e| StoreError::Corrupt { path, reason: e.to_string() })
    }

    pub fn save_catalog(&self, catalog: &Catalog) -> Result<(), StoreError> {
        self.write(&self.catalog_path(), &to_document(catalog))
    }

    /// The rules file as last uploaded, comments included.
    pub fn load_rules_text(&self) -> Result<Option<String>, StoreError> {
        read_optional(&self.rules_path())
    }

    pub fn save_rules_text(&self, text: &str) -> Result<(), StoreError> {
        self.write(&self.rules_path(), text)
    }

    pub fn load_promotions(&self) -> Result<Option<Promotions>, StoreError> {
        self.load_json(&self.promotions_path())
    }

    pub fn save_promotions(&self, promotions: &Promotions) -> Result<(), StoreError> {
        self.write(&self.promotions_path(), &to_document(promotions))
    }

    pub fn load_profile(&self, user_id: &str) -> Result<Option<UserProfile>, StoreError> {
        let path = self.user_path("profiles", user_id)?;
        let Some(text) = read_optional(&path)? else { return Ok(None) };
        parse_profile(&text).map(Some).map_err(|e| StoreError::Corrupt { path, reason: e.to_string() })
    }

    pub fn save_profile(&self, user_id: &str, profile: &UserProfile) -> Result<(), StoreError> {
        let path = self.user_path("profiles", user_id)?;
        self.write(&path, &to_document(profile))
    }

    pub fn load_subscription(&self, user_id: &str) -> Result<Option<Subscription>, StoreError> {
        let path = self.user_path("subscriptions", user_id)?;
        self.load_json(&path)
    }

    pub fn save_subscription(&self, subscription: &Subscription) -> Result<(), StoreError> {
        let path = self.user_path("subscriptions", &subscription.user_id)?;
        self.write(&path, &to_document(subscription))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::fixtures::table1_catalog;

    #[test]
    fn documents_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = DataStore::open(dir.path()).unwrap();
        assert!(store.load_catalog().unwrap().is_none());
        assert!(store.load_profile("ana").unwrap().is_none());

        store.save_catalog(&table1_catalog()).unwrap();
        assert_eq!(store.load_catalog().unwrap().unwrap(), table1_catalog());

        let p = UserProfile { budget: Some(18_000.0), ..Default::default() };
        store.save_profile("ana", &p).unwrap();
        assert_eq!(store.load_profile("ana").unwrap().unwrap(), p);

        store.save_rules_text("# none\n").unwrap();
        assert_eq!(store.load_rules_text().unwrap().as_deref(), Some("# none\n"));

        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn rejects_path_like_user_ids() {
        let dir = tempfile::tempdir().unwrap();
        let store = DataStore::open(dir.path()).unwrap();
        assert!(matches!(store.load_profile("../x"), Err(StoreError::InvalidUserId(_))));
    }

    #[test]
    fn corrupt_documents_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let store = DataStore::open(dir.path()).unwrap();
        fs::write(store.catalog_path(), "{").unwrap();
        assert!(matches!(store.load_catalog(), Err(StoreError::Corrupt { .. })));
    }
}
