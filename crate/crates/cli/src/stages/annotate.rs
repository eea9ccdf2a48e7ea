//! Collect t_g and per-step texts from the annotator, score them with the
//! services endpoint and keep the records that pass both thresholds.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stepsvg_client::annotator::{filter_record, AnnotateError, Annotator, AnnotatorConfig, FilterConfig};
use stepsvg_client::chat::{ChatCompletionsClient, ChatTransport, DescribeClient};
use stepsvg_client::services::ServicesClient;
use stepsvg_client::templates::PromptTemplates;
use stepsvg_core::annotation::AnnotationRecord;
use stepsvg_core::raster::RasterImage;

use super::render::{self, RenderSummary};
use super::{collect, rejection, run_items, Context, Outcome, StageError, StageReport};
use crate::config::AnnotatorRoute;
use crate::manifest::{read_json, unix_now, write_json, Rejection};

pub const STAGE: &str = "annotate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedEntry {
    pub sample_id: String,
    pub step_count: usize,
    pub clip_score: f64,
    pub perplexity: f64,
}

impl AnnotatedEntry {
    fn of(rec: &AnnotationRecord) -> Self {
        Self {
            sample_id: rec.sample_id.clone(),
            step_count: rec.step_count,
            clip_score: rec.clip_score,
            perplexity: rec.perplexity,
        }
    }
}

pub fn record_path(output_dir: &Path, id: &str) -> PathBuf {
    output_dir.join("annotations").join(format!("{id}.json"))
}

/// Marker for samples the annotator could not describe.
fn failed_path(output_dir: &Path, id: &str) -> PathBuf {
    output_dir.join("annotations").join("rejected").join(format!("{id}.json"))
}

fn settle(rec: AnnotationRecord) -> Outcome<AnnotatedEntry> {
    if rec.accepted {
        return Outcome::Done(AnnotatedEntry::of(&rec));
    }
    let detail = format!("clip {:.4}, perplexity {:.3}", rec.clip_score, rec.perplexity);
    Outcome::Rejected(rejection(&rec.sample_id, "filtered", detail))
}

fn finished(output_dir: &Path, id: &str) -> Option<Outcome<AnnotatedEntry>> {
    if let Ok(rec) = read_json::<AnnotationRecord>(&record_path(output_dir, id)) {
        return Some(match settle(rec) {
            Outcome::Done(e) => Outcome::Resumed(e),
            other => other,
        });
    }
    read_json::<Rejection>(&failed_path(output_dir, id)).ok().map(Outcome::Rejected)
}

pub fn load_frames(output_dir: &Path, id: &str, n: usize) -> Result<Vec<RasterImage>, String> {
    render::frame_paths(output_dir, id, n)
        .iter()
        .map(|p| {
            let f = std::fs::File::open(p).map_err(|e| format!("{}: {e}", p.display()))?;
            RasterImage::decode_png(std::io::BufReader::new(f)).map_err(|e| format!("{}: {e}", p.display()))
        })
        .collect()
}

struct Clients<'a> {
    annotator: Annotator<'a>,
    services: ServicesClient,
    filter: FilterConfig,
    hashes: BTreeMap<String, String>,
}

fn annotate_one(ctx: &Context, c: &Clients, summary: &RenderSummary) -> Outcome<AnnotatedEntry> {
    let out = &ctx.config.output_dir;
    let id = &summary.sample_id;
    let frames = match load_frames(out, id, summary.step_count) {
        Ok(f) => f,
        Err(e) => return Outcome::Failed(format!("frames: {e}")),
    };
    let result = c.annotator.annotate(&frames).and_then(|dialogue| {
        let last = &frames[frames.len() - 1];
        filter_record(id, dialogue, last, &c.services, &c.services, c.filter, c.hashes.clone())
    });
    match result {
        Ok(rec) => match write_json(&record_path(out, id), &rec) {
            Ok(()) => settle(rec),
            Err(e) => Outcome::Failed(e.to_string()),
        },
        Err(e @ (AnnotateError::ContextOverflow { .. } | AnnotateError::EmptyResponse | AnnotateError::NoFrames)) => {
            let reason = match e {
                AnnotateError::ContextOverflow { .. } => "context_overflow",
                AnnotateError::EmptyResponse => "empty_response",
                _ => "no_frames",
            };
            let r = rejection(id, reason, &e);
            match write_json(&failed_path(out, id), &r) {
                Ok(()) => Outcome::Rejected(r),
                Err(io) => Outcome::Failed(io.to_string()),
            }
        }
        Err(e) => Outcome::Failed(e.to_string()),
    }
}

fn required(value: &Option<String>, name: &str) -> Result<String, StageError> {
    value.clone().ok_or_else(|| StageError::Precondition {
        stage: STAGE,
        missing: format!("{name} is not configured"),
    })
}

pub fn run(ctx: &Context) -> Result<StageReport, StageError> {
    let started = unix_now();
    let cfg = &ctx.config;
    let upstream = ctx.upstream::<RenderSummary>(STAGE, render::STAGE)?;
    let annotator_url = required(&cfg.annotator_endpoint, "annotator endpoint")?;
    let services_url = required(&cfg.services_endpoint, "services endpoint")?;
    let templates = match &cfg.templates_dir {
        Some(dir) => PromptTemplates::from_dir(dir)?,
        None => PromptTemplates::default(),
    };
    let transport: Box<dyn ChatTransport> = match cfg.annotator_route {
        AnnotatorRoute::Chat => Box::new(ChatCompletionsClient::new(&annotator_url, cfg.annotator_api_key.clone(), cfg.timeout())),
        AnnotatorRoute::Describe => Box::new(DescribeClient::new(&annotator_url, cfg.annotator_api_key.clone(), cfg.timeout())),
    };
    let hashes = templates.hashes();
    let annotator_config = AnnotatorConfig { model: cfg.annotator_model.clone(), retry: cfg.retry(), ..Default::default() };
    let clients = Clients {
        annotator: Annotator::new(transport.as_ref(), templates, annotator_config),
        services: ServicesClient::new(&services_url, cfg.services_api_key.clone(), cfg.timeout(), cfg.retry()),
        filter: FilterConfig { thresholds: cfg.thresholds, scope: cfg.perplexity_scope },
        hashes: hashes.clone(),
    };

    let out = &cfg.output_dir;
    let items = upstream.completed.into_iter().map(|s| (s.sample_id.clone(), s)).collect();
    let (outcomes, deferred) = run_items(
        ctx,
        items,
        |s: &RenderSummary| finished(out, &s.sample_id),
        |s| annotate_one(ctx, &clients, s),
    );
    let (manifest, resumed) = collect(STAGE, outcomes, deferred);
    ctx.finish(STAGE, &manifest, resumed, started, &hashes)
}
