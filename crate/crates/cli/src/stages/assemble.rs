//! Turn accepted annotations into chat records and split them into
//! `train.jsonl` and `test.jsonl`.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stepsvg_core::annotation::{AnnotationRecord, TRANSITION_CONVENTION};
use stepsvg_core::dataset::{
    self, assemble, to_chat, AssembleError, ChatRecord, DatasetManifest, SplitError, INSTRUCTION_TEMPLATE, THINK_CLOSE,
    THINK_OPEN,
};
use stepsvg_core::raster;
use stepsvg_core::svg::parse_svg;

use super::annotate::{self, load_frames, AnnotatedEntry};
use super::render::{self, MIN_FIDELITY};
use super::{collect, rejection, Context, Outcome, StageError, StageReport};
use crate::manifest::{read_json, unix_now, write_atomic, write_json, StageManifest};

pub const STAGE: &str = "assemble";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembledEntry {
    pub sample_id: String,
    pub split: String,
}

pub fn train_path(output_dir: &Path) -> std::path::PathBuf {
    output_dir.join("train.jsonl")
}

pub fn test_path(output_dir: &Path) -> std::path::PathBuf {
    output_dir.join("test.jsonl")
}

pub fn dataset_manifest_path(output_dir: &Path) -> std::path::PathBuf {
    output_dir.join("dataset_manifest.json")
}

fn assemble_one(ctx: &Context, entry: &AnnotatedEntry) -> Outcome<ChatRecord> {
    let out = &ctx.config.output_dir;
    let id = &entry.sample_id;
    let rec: AnnotationRecord = match read_json(&annotate::record_path(out, id)) {
        Ok(r) => r,
        Err(e) => return Outcome::Failed(format!("annotation record: {e}")),
    };
    let seq = match render::load_steps(out, id) {
        Ok(s) => s,
        Err(e) => return Outcome::Failed(format!("steps: {e}")),
    };
    let sample = match assemble(&rec, &seq) {
        Ok(s) => s,
        Err(e) => {
            let reason = match e {
                AssembleError::RejectedRecord(_) => "not_accepted",
                AssembleError::LengthOverflow { .. } => "length_overflow",
                AssembleError::StepCountMismatch { .. } => "step_count_mismatch",
            };
            return Outcome::Rejected(rejection(id, reason, e));
        }
    };
    // The answer must draw what the frames show.
    let frames = match load_frames(out, id, seq.n()) {
        Ok(f) => f,
        Err(e) => return Outcome::Rejected(rejection(id, "missing_frames", e)),
    };
    let agreement = parse_svg(sample.svg_code.as_bytes())
        .map_err(|e| e.to_string())
        .and_then(|doc| raster::render_document(&doc, ctx.config.canvas_size).map_err(|e| e.to_string()))
        .and_then(|img| raster::pixel_agreement(&img, &frames[frames.len() - 1]).map_err(|e| e.to_string()));
    match agreement {
        Ok(a) if a >= MIN_FIDELITY => Outcome::Done(to_chat(&sample)),
        Ok(a) => Outcome::Rejected(rejection(id, "render_mismatch", format!("agreement {a:.5} < {MIN_FIDELITY}"))),
        Err(e) => Outcome::Rejected(rejection(id, "render_mismatch", e)),
    }
}

fn write_jsonl_file(path: &Path, records: &[ChatRecord]) -> std::io::Result<()> {
    let mut buf = Vec::new();
    dataset::write_jsonl(&mut buf, records)?;
    write_atomic(path, &buf)
}

pub fn run(ctx: &Context) -> Result<StageReport, StageError> {
    let started = unix_now();
    let cfg = &ctx.config;
    let upstream = ctx.upstream::<AnnotatedEntry>(STAGE, annotate::STAGE)?;
    if upstream.counters.deferred > 0 || upstream.counters.errors > 0 {
        log::warn!(
            "{STAGE}: annotate left {} samples deferred and {} failed; the split covers only finished ones",
            upstream.counters.deferred,
            upstream.counters.errors
        );
    }
    let (entries, deferred) = ctx.take_pending(upstream.completed);
    let outcomes: Vec<(String, Outcome<ChatRecord>)> = ctx.install(|| {
        entries.par_iter().map(|e| (e.sample_id.clone(), assemble_one(ctx, e))).collect()
    });
    let (records, _) = collect(STAGE, outcomes, deferred);

    let (train, test) = dataset::split_dataset(records.completed.clone(), cfg.test_count, cfg.rng_seed, |r| &r.sample_id)
        .map_err(|e| match e {
            SplitError::InsufficientSamples { .. } => StageError::Aborted { stage: STAGE, message: format!("InsufficientSamples: {e}") },
            SplitError::DuplicateId(_) => StageError::Aborted { stage: STAGE, message: e.to_string() },
        })?;
    let out = &cfg.output_dir;
    write_jsonl_file(&train_path(out), &train)?;
    write_jsonl_file(&test_path(out), &test)?;

    let mut template_hashes = BTreeMap::new();
    for r in &records.completed {
        template_hashes.extend(r.metadata.template_hashes.iter().map(|(k, v)| (k.clone(), v.clone())));
    }
    let summary = DatasetManifest {
        train_count: train.len(),
        test_count: test.len(),
        seed: cfg.rng_seed,
        thresholds: cfg.thresholds,
        think_open: THINK_OPEN.to_owned(),
        think_close: THINK_CLOSE.to_owned(),
        instruction_template: INSTRUCTION_TEMPLATE.to_owned(),
        template_hashes: template_hashes.clone(),
        transition_convention: TRANSITION_CONVENTION.to_owned(),
        rejected: records.counters.rejected.clone(),
    };
    write_json(&dataset_manifest_path(out), &summary)?;

    let split = |v: &[ChatRecord], name: &str| {
        v.iter().map(|r| AssembledEntry { sample_id: r.sample_id.clone(), split: name.to_owned() }).collect::<Vec<_>>()
    };
    let mut completed = split(&train, "train");
    completed.extend(split(&test, "test"));
    completed.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let manifest = StageManifest { stage: records.stage, counters: records.counters, completed, rejected: records.rejected };
    ctx.finish(STAGE, &manifest, 0, started, &template_hashes)
}

