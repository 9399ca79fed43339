//! Dataset manifests: which trace files make up each session.
//!
//! A manifest is a TOML document. Paths inside it are relative to the
//! manifest's own directory.
//!
//! ```toml
//! schema_version = 1
//! dataset = "demo"
//! target_dt = 1.0
//! pooling = "mean"
//!
//! [[session]]
//! id = "c0s0"
//! source_content = "c0"
//! subjective = "traces/c0s0_subjective.csv"
//! channels = { ssim = "traces/c0s0_ssim.csv" }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::csv::load_trace;
use crate::trace::{align_session, Pooling, SessionTrace};
use crate::vqa::FrameMetric;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionEntry {
    pub id: String,
    pub source_content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subjective: Option<PathBuf>,
    #[serde(default)]
    pub channels: BTreeMap<String, PathBuf>,
}

/// Planar 8-bit luma files of one session, to be turned into channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawVideoEntry {
    pub session: String,
    pub ref_path: PathBuf,
    pub dist_path: PathBuf,
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub metrics: Vec<String>,
}

impl RawVideoEntry {
    pub fn frame_metrics(&self) -> Result<Vec<FrameMetric>> {
        self.metrics.iter().map(|m| m.parse()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub dataset: String,
    pub target_dt: f64,
    #[serde(default)]
    pub pooling: Pooling,
    #[serde(default, rename = "session")]
    pub sessions: Vec<SessionEntry>,
    #[serde(default, rename = "raw_video", skip_serializing_if = "Vec::is_empty")]
    pub raw_videos: Vec<RawVideoEntry>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn new(dataset: impl Into<String>, target_dt: f64, base_dir: impl Into<PathBuf>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dataset: dataset.into(),
            target_dt,
            pooling: Pooling::Mean,
            sessions: Vec::new(),
            raw_videos: Vec::new(),
            base_dir: base_dir.into(),
        }
    }

    /// Structural checks that need no file access.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::parse(
                "manifest",
                format!("unsupported schema_version {}", self.schema_version),
            ));
        }
        if !(self.target_dt > 0.0 && self.target_dt.is_finite()) {
            return Err(Error::invalid(format!(
                "target_dt must be > 0, got {}",
                self.target_dt
            )));
        }
        let mut ids = BTreeSet::new();
        for s in &self.sessions {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::invalid(format!("duplicate session id `{}`", s.id)));
            }
        }
        for r in &self.raw_videos {
            if !ids.contains(r.session.as_str()) {
                return Err(Error::invalid(format!(
                    "raw video for unknown session `{}`",
                    r.session
                )));
            }
            if !(r.fps > 0.0) {
                return Err(Error::invalid(format!(
                    "fps must be > 0 for session `{}`",
                    r.session
                )));
            }
            r.frame_metrics()?;
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.base_dir.join(path)
    }

    fn referenced_paths(&self) -> impl Iterator<Item = &PathBuf> {
        self.sessions
            .iter()
            .flat_map(|s| s.subjective.iter().chain(s.channels.values()))
            .chain(
                self.raw_videos
                    .iter()
                    .flat_map(|r| [&r.ref_path, &r.dist_path]),
            )
    }

    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut m: Manifest = toml::from_str(text).map_err(|e| Error::parse("manifest", e))?;
        m.base_dir = base_dir.into();
        m.validate()?;
        Ok(m)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::parse("manifest", e))
    }

    /// Reads and validates a manifest; every referenced file must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = Self::from_toml_str(&text, base)?;
        for p in m.referenced_paths() {
            let full = m.resolve(p);
            if !full.is_file() {
                return Err(Error::io(
                    full,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "referenced file not found"),
                ));
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?).map_err(|e| Error::io(path, e))
    }

    /// Channel names shared by every session.
    pub fn channel_names(&self) -> Result<Vec<String>> {
        let first = self.sessions.first().ok_or(Error::Empty)?;
        let names: Vec<String> = first.channels.keys().cloned().collect();
        for s in &self.sessions[1..] {
            if s.channels.keys().ne(first.channels.keys()) {
                return Err(Error::invalid(format!(
                    "session `{}` lists channels {:?}, expected {:?}",
                    s.id,
                    s.channels.keys().collect::<Vec<_>>(),
                    names
                )));
            }
        }
        Ok(names)
    }

    /// Loads every session's traces and aligns them onto `target_dt`.
    pub fn load_sessions(&self) -> Result<Vec<SessionTrace>> {
        self.channel_names()?;
        self.sessions.iter().map(|s| self.load_session(s)).collect()
    }

    pub fn load_session(&self, entry: &SessionEntry) -> Result<SessionTrace> {
        let channels = entry
            .channels
            .iter()
            .map(|(name, p)| Ok((name.clone(), load_trace(&self.resolve(p))?)))
            .collect::<Result<Vec<_>>>()?;
        let subjective = entry
            .subjective
            .as_ref()
            .map(|p| load_trace(&self.resolve(p)))
            .transpose()?;
        let raw = SessionTrace::new(&entry.id, &entry.source_content, channels, subjective)?;
        align_session(&raw, self.target_dt, self.pooling)
    }

    pub fn session(&self, id: &str) -> Result<&SessionEntry> {
        self.sessions
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::invalid(format!("no session `{id}` in manifest")))
    }
}
