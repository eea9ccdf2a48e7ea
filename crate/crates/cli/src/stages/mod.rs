//! Pipeline stages. Each consumes the previous stage's manifest, works on
//! samples in parallel up to `max_inflight`, skips samples already finished
//! on disk, and writes its own manifest plus an entry in the run manifest.

pub mod annotate;
pub mod assemble;
pub mod evaluate;
pub mod generate;
pub mod ingest;
pub mod render;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::config::PipelineConfig;
use crate::manifest::{self, Rejection, StageCounters, StageManifest, StageRun};

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error("{stage}: missing input: {missing}")]
    Precondition { stage: &'static str, missing: String },
    #[error("{stage}: {message}")]
    Aborted { stage: &'static str, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// What a stage reports back to the command line.
#[derive(Debug, Clone)]
pub struct StageReport {
    pub stage: &'static str,
    pub counters: StageCounters,
    pub resumed: usize,
}

impl StageReport {
    pub fn ok(&self) -> bool {
        self.counters.errors == 0
    }
}

pub struct Context {
    pub config: PipelineConfig,
    /// Most pending samples a stage attempts in this invocation.
    pub limit: Option<usize>,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(config: PipelineConfig, limit: Option<usize>) -> std::io::Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.max_inflight)
            .build()
            .map_err(std::io::Error::other)?;
        Ok(Self { config, limit, pool })
    }

    pub fn out(&self, rel: &str) -> PathBuf {
        self.config.output_dir.join(rel)
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    /// Splits `pending` into the part attempted now and the count deferred.
    pub fn take_pending<T>(&self, mut pending: Vec<T>) -> (Vec<T>, usize) {
        match self.limit {
            Some(n) if pending.len() > n => {
                let deferred = pending.len() - n;
                pending.truncate(n);
                (pending, deferred)
            }
            _ => (pending, 0),
        }
    }

    fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).unwrap_or(serde_json::Value::Null)
    }

    /// Writes the stage manifest and updates the run manifest.
    pub fn finish<T: serde::Serialize>(
        &self,
        stage: &'static str,
        manifest: &StageManifest<T>,
        resumed: usize,
        started_at: u64,
        template_hashes: &BTreeMap<String, String>,
    ) -> Result<StageReport, StageError> {
        debug_assert!(manifest.counters.reconciles(), "{stage}: {:?}", manifest.counters);
        manifest::write_json(&manifest::stage_manifest_path(&self.config.output_dir, stage), manifest)?;
        let run = StageRun { counters: manifest.counters.clone(), resumed, started_at, finished_at: manifest::unix_now() };
        manifest::record_stage(&self.config.output_dir, &self.snapshot(), template_hashes, stage, run)?;
        log::info!(
            "{stage}: {} in, {} completed ({resumed} resumed), {} rejected, {} errors, {} deferred",
            manifest.counters.input,
            manifest.counters.completed,
            manifest.counters.rejected_total(),
            manifest.counters.errors,
            manifest.counters.deferred
        );
        Ok(StageReport { stage, counters: manifest.counters.clone(), resumed })
    }

    /// Reads the manifest a previous stage left behind.
    pub fn upstream<T: serde::de::DeserializeOwned>(
        &self,
        stage: &'static str,
        upstream: &str,
    ) -> Result<StageManifest<T>, StageError> {
        let path = manifest::stage_manifest_path(&self.config.output_dir, upstream);
        manifest::read_json(&path).map_err(|e| StageError::Precondition {
            stage,
            missing: format!("{} ({e}); run `{upstream}` first", path.display()),
        })
    }
}

/// Outcome of one sample inside a stage.
pub enum Outcome<T> {
    Done(T),
    Resumed(T),
    Rejected(Rejection),
    Failed(String),
}

/// Folds per-sample outcomes, in input order, into a stage manifest.
pub fn collect<T>(stage: &str, outcomes: Vec<(String, Outcome<T>)>, deferred: usize) -> (StageManifest<T>, usize) {
    let mut counters = StageCounters { input: outcomes.len() + deferred, deferred, ..Default::default() };
    let mut completed = Vec::new();
    let mut rejected = Vec::new();
    let mut resumed = 0;
    for (id, outcome) in outcomes {
        match outcome {
            Outcome::Done(v) => completed.push(v),
            Outcome::Resumed(v) => {
                resumed += 1;
                completed.push(v);
            }
            Outcome::Rejected(r) => {
                counters.reject(&r.reason);
                rejected.push(r);
            }
            Outcome::Failed(msg) => {
                log::error!("{stage}: {id}: {msg}");
                counters.errors += 1;
            }
        }
    }
    counters.completed = completed.len();
    (StageManifest { stage: stage.to_owned(), counters, completed, rejected }, resumed)
}

pub fn rejection(sample_id: &str, reason: &str, detail: impl ToString) -> Rejection {
    Rejection { sample_id: Some(sample_id.to_owned()), source: None, reason: reason.to_owned(), detail: detail.to_string() }
}

pub fn frame_path(frames_dir: &Path, step: usize) -> PathBuf {
    frames_dir.join(format!("step_{step:04}.png"))
}

/// Runs `work` over the items `finished` does not already settle, at most
/// `limit` of them, in parallel. Outcomes keep the input order.
pub fn run_items<I: Sync, T: Send>(
    ctx: &Context,
    items: Vec<(String, I)>,
    finished: impl Fn(&I) -> Option<Outcome<T>>,
    work: impl Fn(&I) -> Outcome<T> + Sync,
) -> (Vec<(String, Outcome<T>)>, usize) {
    use rayon::prelude::*;
    let mut slots: Vec<Option<Outcome<T>>> = Vec::with_capacity(items.len());
    let mut pending = Vec::new();
    for (i, (_, item)) in items.iter().enumerate() {
        let known = finished(item);
        if known.is_none() {
            pending.push(i);
        }
        slots.push(known);
    }
    let (pending, deferred) = ctx.take_pending(pending);
    let done: Vec<(usize, Outcome<T>)> =
        ctx.install(|| pending.par_iter().map(|&i| (i, work(&items[i].1))).collect());
    for (i, outcome) in done {
        slots[i] = Some(outcome);
    }
    let outcomes = items.into_iter().zip(slots).filter_map(|((id, _), o)| o.map(|o| (id, o))).collect();
    (outcomes, deferred)
}
