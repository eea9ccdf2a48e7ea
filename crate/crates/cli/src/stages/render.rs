//! Flatten each curated document into steps, drop invisible ones, and write
//! the cumulative frames I₁…Iₙ with per-step diffs and coverage masks.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stepsvg_core::raster::{self, RasterImage, StepDiff};
use stepsvg_core::reconstruct::{self, ReconstructError, StepSequence};
use stepsvg_core::svg::{self, parse_svg};

use super::ingest::{self, CuratedEntry};
use super::{collect, frame_path, rejection, run_items, Context, Outcome, StageError, StageReport};
use crate::manifest::{read_json, unix_now, write_atomic, write_json};

pub const STAGE: &str = "render";
/// Lowest agreement between the last frame and a direct render of the
/// curated document.
pub const MIN_FIDELITY: f64 = 0.995;

/// Written last in each sample's frame directory; its presence marks the
/// sample as finished.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderSummary {
    pub sample_id: String,
    pub step_count: usize,
    /// Steps removed because they changed no pixel.
    pub pruned: usize,
    pub final_agreement: f64,
}

pub fn frames_dir(output_dir: &Path, id: &str) -> PathBuf {
    output_dir.join("frames").join(id)
}

pub fn summary_path(output_dir: &Path, id: &str) -> PathBuf {
    frames_dir(output_dir, id).join("summary.json")
}

pub fn steps_path(output_dir: &Path, id: &str) -> PathBuf {
    frames_dir(output_dir, id).join("steps.svg")
}

/// Frame paths I₁…Iₙ, numbered from 1.
pub fn frame_paths(output_dir: &Path, id: &str, n: usize) -> Vec<PathBuf> {
    let dir = frames_dir(output_dir, id);
    (1..=n).map(|i| frame_path(&dir, i)).collect()
}

/// Re-flattens the stored step document; its steps map one to one onto
/// the frames.
pub fn load_steps(output_dir: &Path, id: &str) -> Result<StepSequence, String> {
    let bytes = std::fs::read(steps_path(output_dir, id)).map_err(|e| e.to_string())?;
    let doc = parse_svg(&bytes).map_err(|e| e.to_string())?;
    reconstruct::flatten(&doc).map_err(|e| e.to_string())
}

fn reconstruct_reason(e: &ReconstructError) -> &'static str {
    match e {
        ReconstructError::CyclicReference(_) => "cyclic_reference",
        ReconstructError::DanglingReference(_) => "dangling_reference",
        ReconstructError::EmptyDocument => "empty_document",
        ReconstructError::AllInvisible => "all_invisible",
        ReconstructError::Unsupported(_) => "unsupported",
        ReconstructError::Render(_) => "render_error",
    }
}

fn render_one(ctx: &Context, entry: &CuratedEntry) -> Outcome<RenderSummary> {
    let id = &entry.sample_id;
    let out = &ctx.config.output_dir;
    let size = ctx.config.canvas_size;
    let bytes = match std::fs::read(ingest::curated_path(ctx, id)) {
        Ok(b) => b,
        Err(e) => return Outcome::Failed(format!("curated file: {e}")),
    };
    let doc = match parse_svg(&bytes) {
        Ok(d) => d,
        Err(e) => return Outcome::Rejected(rejection(id, "parse_error", e)),
    };
    let seq = match reconstruct::flatten(&doc).and_then(|s| {
        if s.n() == 0 {
            return Err(ReconstructError::EmptyDocument);
        }
        Ok(s)
    }) {
        Ok(s) => s,
        Err(e) => return Outcome::Rejected(rejection(id, reconstruct_reason(&e), e)),
    };
    let pruned = match reconstruct::prune_invisible_at(&seq, size) {
        Ok(p) => p,
        Err(e) => return Outcome::Rejected(rejection(id, reconstruct_reason(&e), e)),
    };
    let frames = match raster::render_prefixes_with_masks(&pruned, size) {
        Ok(f) => f,
        Err(e) => return Outcome::Rejected(rejection(id, "render_error", e)),
    };

    let blank = RasterImage::white(size, size);
    let mut diffs: Vec<StepDiff> = Vec::with_capacity(frames.len());
    for (i, (frame, mask)) in frames.iter().enumerate() {
        let prev = if i == 0 { &blank } else { &frames[i - 1].0 };
        let mut d = match raster::diff_images(prev, frame, Some(mask)) {
            Ok(d) => d,
            Err(e) => return Outcome::Rejected(rejection(id, "render_error", e)),
        };
        d.step_index = i + 1;
        if d.changed_outside_mask > 0 {
            let detail = format!("step {} changed {} pixels outside its coverage", i + 1, d.changed_outside_mask);
            return Outcome::Rejected(rejection(id, "locality_violation", detail));
        }
        diffs.push(d);
    }

    let last = &frames[frames.len() - 1].0;
    let agreement = match raster::render_document(&doc, size).and_then(|r| raster::pixel_agreement(&r, last)) {
        Ok(a) => a,
        Err(e) => return Outcome::Rejected(rejection(id, "render_error", e)),
    };
    if agreement < MIN_FIDELITY {
        return Outcome::Rejected(rejection(id, "low_fidelity", format!("agreement {agreement:.5} < {MIN_FIDELITY}")));
    }

    let write = || -> Result<(), String> {
        for ((frame, _), path) in frames.iter().zip(frame_paths(out, id, frames.len())) {
            let png = frame.encode_png().map_err(|e| e.to_string())?;
            write_atomic(&path, &png).map_err(|e| e.to_string())?;
        }
        let steps_doc = svg::serialize(&pruned.to_document());
        write_atomic(&steps_path(out, id), steps_doc.as_bytes()).map_err(|e| e.to_string())?;
        write_json(&frames_dir(out, id).join("diffs.json"), &diffs).map_err(|e| e.to_string())?;
        Ok(())
    };
    if let Err(e) = write() {
        return Outcome::Failed(e);
    }
    let summary = RenderSummary {
        sample_id: id.clone(),
        step_count: pruned.n(),
        pruned: seq.n() - pruned.n(),
        final_agreement: agreement,
    };
    match write_json(&summary_path(out, id), &summary) {
        Ok(()) => Outcome::Done(summary),
        Err(e) => Outcome::Failed(e.to_string()),
    }
}

pub fn run(ctx: &Context) -> Result<StageReport, StageError> {
    let started = unix_now();
    let upstream = ctx.upstream::<CuratedEntry>(STAGE, ingest::STAGE)?;
    let out = &ctx.config.output_dir;

    let items = upstream.completed.into_iter().map(|e| (e.sample_id.clone(), e)).collect();
    let (outcomes, deferred) = run_items(
        ctx,
        items,
        |e: &CuratedEntry| read_json(&summary_path(out, &e.sample_id)).ok().map(Outcome::Resumed),
        |e| render_one(ctx, e),
    );
    let (manifest, resumed) = collect(STAGE, outcomes, deferred);
    ctx.finish(STAGE, &manifest, resumed, started, &Default::default())
}
