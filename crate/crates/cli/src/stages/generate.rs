//! Text-to-SVG generation for a prompt file, one result per prompt under
//! `generations/`.

use std::path::{Path, PathBuf};

use serde::Serialize;
use stepsvg_client::chat::ChatCompletionsClient;
use stepsvg_client::infer::{self, FailureReason, GenerationConfig, GenerationResult, InferError, Sampling};
use stepsvg_client::services::ServicesClient;
use stepsvg_core::dataset::sha256_hex;

use super::{collect, rejection, run_items, Context, Outcome, StageError, StageReport};
use crate::manifest::{read_json, unix_now, write_atomic, write_json};

pub const STAGE: &str = "generate";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum SamplingArg {
    #[default]
    Greedy,
    Nucleus,
}

#[derive(Debug, Clone, clap::Args)]
pub struct GenerateArgs {
    /// One prompt per line; blank lines and lines starting with `#` are skipped.
    #[arg(long)]
    pub prompts: PathBuf,
    #[arg(long, value_enum, default_value_t = SamplingArg::Greedy)]
    pub sampling: SamplingArg,
    #[arg(long, default_value_t = infer::NUCLEUS_TOP_P)]
    pub top_p: f64,
    #[arg(long, default_value_t = infer::NUCLEUS_TEMPERATURE)]
    pub temperature: f64,
    /// Candidates per prompt; more than one picks the best by CLIP similarity.
    #[arg(long, default_value_t = 1)]
    pub best_of: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct GenerationRecord<'a> {
    sample_id: &'a str,
    #[serde(flatten)]
    result: &'a GenerationResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_of: Option<BestOfSummary>,
}

#[derive(Debug, Serialize)]
struct BestOfSummary {
    index: usize,
    scores: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct GeneratedEntry {
    pub sample_id: String,
    pub salvaged: bool,
}

pub fn generations_dir(output_dir: &Path) -> PathBuf {
    output_dir.join("generations")
}

pub fn read_prompts(path: &Path) -> std::io::Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}

fn failure_kind(f: &FailureReason) -> &'static str {
    match f {
        FailureReason::NoThinkBlock => "no_think_block",
        FailureReason::UnparseableSvg(_) => "unparseable_svg",
        FailureReason::RenderError(_) => "render_error",
    }
}

fn settle(id: &str, result: &GenerationResult) -> Outcome<GeneratedEntry> {
    match &result.failure {
        None => Outcome::Done(GeneratedEntry { sample_id: id.to_owned(), salvaged: result.salvaged }),
        Some(f) => Outcome::Rejected(rejection(id, failure_kind(f), serde_json::to_string(f).unwrap_or_default())),
    }
}

/// Reads back a stored generation as its outcome.
fn finished(dir: &Path, id: &str) -> Option<Outcome<GeneratedEntry>> {
    let v: serde_json::Value = read_json(&dir.join(format!("{id}.json"))).ok()?;
    let outcome = match v.get("failure").and_then(|f| f.get("kind")).and_then(|k| k.as_str()) {
        None => Outcome::Resumed(GeneratedEntry {
            sample_id: id.to_owned(),
            salvaged: v.get("salvaged").and_then(|s| s.as_bool()).unwrap_or(false),
        }),
        Some(kind) => Outcome::Rejected(rejection(id, kind, v["failure"].to_string())),
    };
    Some(outcome)
}

fn store(dir: &Path, id: &str, result: &GenerationResult, best_of: Option<BestOfSummary>) -> std::io::Result<()> {
    if let (Some(svg), Some(img)) = (&result.svg_code, &result.image) {
        write_atomic(&dir.join(format!("{id}.svg")), svg.as_bytes())?;
        let png = img.encode_png().map_err(std::io::Error::other)?;
        write_atomic(&dir.join(format!("{id}.png")), &png)?;
    }
    // Written last: its presence marks the prompt as done.
    write_json(&dir.join(format!("{id}.json")), &GenerationRecord { sample_id: id, result, best_of })
}

pub fn run(ctx: &Context, args: &GenerateArgs) -> Result<StageReport, StageError> {
    let started = unix_now();
    let cfg = &ctx.config;
    let endpoint = cfg.gen_endpoint.clone().ok_or_else(|| StageError::Precondition {
        stage: STAGE,
        missing: "generation endpoint is not configured".into(),
    })?;
    let prompts = read_prompts(&args.prompts)
        .map_err(|e| StageError::Precondition { stage: STAGE, missing: format!("{}: {e}", args.prompts.display()) })?;
    let sampling = match args.sampling {
        SamplingArg::Greedy => Sampling::Greedy,
        SamplingArg::Nucleus => Sampling::Nucleus { top_p: args.top_p, temperature: args.temperature },
    };
    if args.best_of == 0 || (args.best_of > 1 && matches!(sampling, Sampling::Greedy)) {
        let e = if args.best_of == 0 { InferError::ZeroCandidates } else { InferError::GreedyBestOf };
        return Err(StageError::Aborted { stage: STAGE, message: e.to_string() });
    }
    let embedder = if args.best_of > 1 {
        let url = cfg.services_endpoint.clone().ok_or_else(|| StageError::Precondition {
            stage: STAGE,
            missing: "best-of-k needs the services endpoint".into(),
        })?;
        Some(ServicesClient::new(&url, cfg.services_api_key.clone(), cfg.timeout(), cfg.retry()))
    } else {
        None
    };
    let transport = ChatCompletionsClient::new(&endpoint, cfg.gen_api_key.clone(), cfg.timeout());
    let gen_config = GenerationConfig {
        model: cfg.gen_model.clone(),
        sampling,
        render_size: cfg.canvas_size,
        retry: cfg.retry(),
        seed: args.seed,
        max_inflight: cfg.max_inflight,
        ..Default::default()
    };

    let dir = generations_dir(&cfg.output_dir);
    let mut items: Vec<(String, (String, String))> = Vec::new();
    for p in prompts {
        let id = sha256_hex(&p)[..16].to_owned();
        if !items.iter().any(|(seen, _)| *seen == id) {
            items.push((id.clone(), (id, p)));
        }
    }
    let (outcomes, deferred) = run_items(
        ctx,
        items,
        |(id, _): &(String, String)| finished(&dir, id),
        |(id, prompt)| {
            let produced = match &embedder {
                Some(e) => infer::best_of(&transport, prompt, &gen_config, args.best_of, e).map(|b| {
                    let summary = BestOfSummary { index: b.index, scores: b.scores.clone() };
                    (b.candidates.into_iter().nth(b.index).expect("index within candidates"), Some(summary))
                }),
                None => infer::generate(&transport, prompt, &gen_config).map(|r| (r, None)).map_err(InferError::from),
            };
            match produced {
                Ok((result, summary)) => match store(&dir, id, &result, summary) {
                    Ok(()) => settle(id, &result),
                    Err(e) => Outcome::Failed(e.to_string()),
                },
                Err(InferError::AllInvalid(k)) => {
                    Outcome::Rejected(rejection(id, "all_invalid", format!("none of {k} candidates rendered")))
                }
                Err(e) => Outcome::Failed(e.to_string()),
            }
        },
    );
    let (manifest, resumed) = collect(STAGE, outcomes, deferred);
    ctx.finish(STAGE, &manifest, resumed, started, &Default::default())
}
