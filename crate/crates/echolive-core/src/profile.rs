//! Persisted enrollment artifacts: one JSON document per user.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{PassphraseTemplate, PhonemeTemplate};

pub const PROFILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileMode {
    TextDependent,
    TextIndependent,
}

/// A user's enrolled templates plus the operating threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserProfile {
    pub version: u32,
    pub user_id: String,
    pub mode: ProfileMode,
    pub threshold: f64,
    pub passphrase_templates: BTreeMap<String, PassphraseTemplate>,
    pub phoneme_templates: BTreeMap<String, PhonemeTemplate>,
    /// ISO-8601 creation timestamp.
    pub created_at: String,
}

impl UserProfile {
    pub fn new(user_id: &str, mode: ProfileMode, threshold: f64) -> Self {
        Self {
            version: PROFILE_VERSION,
            user_id: user_id.to_string(),
            mode,
            threshold,
            passphrase_templates: BTreeMap::new(),
            phoneme_templates: BTreeMap::new(),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != PROFILE_VERSION {
            return Err(Error::Profile(format!("unsupported profile version {}", self.version)));
        }
        if !(-1.0..=1.0).contains(&self.threshold) {
            return Err(Error::Profile(format!("threshold {} outside [-1, 1]", self.threshold)));
        }
        match self.mode {
            ProfileMode::TextDependent if self.passphrase_templates.is_empty() => Err(
                Error::Profile("text-dependent profile has no passphrase templates".into()),
            ),
            ProfileMode::TextIndependent if self.phoneme_templates.is_empty() => Err(
                Error::Profile("text-independent profile has no phoneme templates".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Path of this user's profile inside a store directory.
    pub fn path_in(store: &Path, user_id: &str) -> Result<PathBuf> {
        if user_id.is_empty() || user_id.contains(['/', '\\', '.']) {
            return Err(Error::Profile(format!("invalid user id '{user_id}'")));
        }
        Ok(store.join(format!("{user_id}.json")))
    }

    /// Write atomically (temp file + rename) under an exclusive lock file,
    /// so concurrent readers always see a complete document.
    pub fn save(&self, store: &Path) -> Result<()> {
        self.validate()?;
        std::fs::create_dir_all(store)?;
        let path = Self::path_in(store, &self.user_id)?;
        let lock_path = path.with_extension("lock");
        let _lock = FileLock::acquire(&lock_path)?;
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(self)?)?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn load(store: &Path, user_id: &str) -> Result<UserProfile> {
        let path = Self::path_in(store, user_id)?;
        let text = std::fs::read_to_string(&path)?;
        let profile: UserProfile = serde_json::from_str(&text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn exists(store: &Path, user_id: &str) -> bool {
        Self::path_in(store, user_id).map(|p| p.exists()).unwrap_or(false)
    }
}

/// Exclusive advisory lock backed by an O_EXCL-created file.
struct FileLock {
    path: PathBuf,
}

impl FileLock {
    fn acquire(path: &Path) -> Result<FileLock> {
        for _ in 0..200 {
            match std::fs::OpenOptions::new().write(true).create_new(true).open(path) {
                Ok(_) => {
                    return Ok(FileLock { path: path.to_path_buf() });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    std::thread::sleep(std::time::Duration::from_millis(10));
                }
                Err(e) => return Err(e.into()),
            }
        }
        Err(Error::Profile(format!("could not lock {}", path.display())))
    }
}

impl Drop for FileLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}
