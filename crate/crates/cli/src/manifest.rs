//! Stage counters, per-stage manifests and the run manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Per-stage accounting. `input == completed + Σ rejected + errors + deferred`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounters {
    pub input: usize,
    pub completed: usize,
    pub rejected: BTreeMap<String, usize>,
    /// Samples left unfinished by a failure that a rerun may fix.
    pub errors: usize,
    /// Samples not attempted because of `--limit`.
    pub deferred: usize,
}

impl StageCounters {
    pub fn reject(&mut self, reason: &str) {
        *self.rejected.entry(reason.to_owned()).or_default() += 1;
    }

    pub fn rejected_total(&self) -> usize {
        self.rejected.values().sum()
    }

    pub fn reconciles(&self) -> bool {
        self.input == self.completed + self.rejected_total() + self.errors + self.deferred
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub sample_id: Option<String>,
    pub source: Option<String>,
    pub reason: String,
    pub detail: String,
}

/// What one stage produced; deterministic for a given input, so reruns that
/// finish the same work write identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest<T> {
    pub stage: String,
    pub counters: StageCounters,
    pub completed: Vec<T>,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRun {
    pub counters: StageCounters,
    /// Completed samples found on disk from an earlier run.
    pub resumed: usize,
    pub started_at: u64,
    pub finished_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub created_at: u64,
    pub updated_at: u64,
    pub config: serde_json::Value,
    pub template_hashes: BTreeMap<String, String>,
    pub stages: BTreeMap<String, StageRun>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn run_manifest_path(output_dir: &Path) -> PathBuf {
    output_dir.join("run_manifest.json")
}

pub fn stage_manifest_path(output_dir: &Path, stage: &str) -> PathBuf {
    output_dir.join("manifests").join(format!("{stage}.json"))
}

/// Records a finished stage in `run_manifest.json`, creating it if needed.
pub fn record_stage(
    output_dir: &Path,
    config: &serde_json::Value,
    template_hashes: &BTreeMap<String, String>,
    stage: &str,
    run: StageRun,
) -> std::io::Result<RunManifest> {
    let path = run_manifest_path(output_dir);
    let now = unix_now();
    let mut m = match read_json::<RunManifest>(&path) {
        Ok(m) => m,
        Err(_) => RunManifest {
            run_id: format!("{now}-{}", &stepsvg_core::dataset::sha256_hex(&config.to_string())[..8]),
            created_at: now,
            updated_at: now,
            config: config.clone(),
            template_hashes: BTreeMap::new(),
            stages: BTreeMap::new(),
        },
    };
    m.updated_at = now;
    m.config = config.clone();
    m.template_hashes.extend(template_hashes.iter().map(|(k, v)| (k.clone(), v.clone())));
    m.stages.insert(stage.to_owned(), run);
    write_json(&path, &m)?;
    Ok(m)
}

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    if std::fs::read(path).is_ok_and(|old| old == bytes) {
        return Ok(());
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> std::io::Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
