//! Metrics over precomputed feature matrices and a directory of generated
//! SVGs. Each requested metric is one item in the stage manifest.

use std::path::{Path, PathBuf};

use stepsvg_core::metrics::{self, FeatureSet, MetricsError, MetricsReport};
use stepsvg_core::svg::parse_svg;

use super::{collect, Context, Outcome, StageError, StageReport};
use crate::manifest::{unix_now, write_json, Rejection};

pub const STAGE: &str = "evaluate";

#[derive(Debug, Clone, Default, clap::Args)]
pub struct EvaluateArgs {
    /// Inception features of the reference set (`.f32` with a `.json` sidecar).
    #[arg(long)]
    pub real_features: Option<PathBuf>,
    /// Inception features of the generated set.
    #[arg(long)]
    pub gen_features: Option<PathBuf>,
    /// CLIP image features of the reference set.
    #[arg(long)]
    pub clip_real_features: Option<PathBuf>,
    /// CLIP image features of the generated set.
    #[arg(long)]
    pub clip_gen_features: Option<PathBuf>,
    /// CLIP image features paired row by row with `--clip-text-features`.
    #[arg(long)]
    pub clip_image_features: Option<PathBuf>,
    #[arg(long)]
    pub clip_text_features: Option<PathBuf>,
    /// Generated SVGs; defaults to `<output>/generations` when present.
    #[arg(long)]
    pub svg_dir: Option<PathBuf>,
}

pub fn report_path(output_dir: &Path) -> PathBuf {
    output_dir.join("metrics_report.json")
}

fn load(path: &Option<PathBuf>) -> Result<Option<FeatureSet>, StageError> {
    path.as_ref()
        .map(|p| metrics::read_features(p))
        .transpose()
        .map_err(|e| StageError::Aborted { stage: STAGE, message: e.to_string() })
}

fn metric_reason(e: &MetricsError) -> &'static str {
    match e {
        MetricsError::DimensionMismatch(..) => "dimension_mismatch",
        MetricsError::CovarianceRankError { .. } => "covariance_rank",
        MetricsError::NumericalFailure => "numerical_failure",
        MetricsError::ZeroVector(_) => "zero_vector",
        MetricsError::CountMismatch(..) => "count_mismatch",
        MetricsError::InvalidFeatures => "invalid_features",
        MetricsError::EmptyInput => "empty_input",
        MetricsError::Io(_) => "io",
    }
}

fn outcome(name: &str, r: Result<f64, MetricsError>, slot: &mut Option<f64>) -> (String, Outcome<String>) {
    let o = match r {
        Ok(v) => {
            *slot = Some(v);
            Outcome::Done(name.to_owned())
        }
        Err(e) => Outcome::Rejected(Rejection {
            sample_id: None,
            source: Some(name.to_owned()),
            reason: metric_reason(&e).to_owned(),
            detail: e.to_string(),
        }),
    };
    (name.to_owned(), o)
}

fn svg_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "svg"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn run(ctx: &Context, args: &EvaluateArgs) -> Result<StageReport, StageError> {
    let started = unix_now();
    let out = &ctx.config.output_dir;
    let real = load(&args.real_features)?;
    let gen = load(&args.gen_features)?;
    let clip_real = load(&args.clip_real_features)?;
    let clip_gen = load(&args.clip_gen_features)?;
    let clip_image = load(&args.clip_image_features)?;
    let clip_text = load(&args.clip_text_features)?;
    let svg_dir = args.svg_dir.clone().or_else(|| Some(out.join("generations")).filter(|d| d.is_dir()));

    let docs = match &svg_dir {
        Some(dir) => {
            let mut docs = Vec::new();
            for p in svg_files(dir)? {
                match parse_svg(&std::fs::read(&p)?) {
                    Ok(d) => docs.push(d),
                    Err(e) => log::warn!("{STAGE}: skipping {}: {e}", p.display()),
                }
            }
            Some(docs)
        }
        None => None,
    };

    // Every generated-side input must describe the same samples.
    let counts: Vec<(&str, usize)> = [
        ("gen_features", gen.as_ref().map(FeatureSet::len)),
        ("clip_gen_features", clip_gen.as_ref().map(FeatureSet::len)),
        ("clip_image_features", clip_image.as_ref().map(FeatureSet::len)),
        ("svg_dir", docs.as_ref().map(Vec::len)),
    ]
    .into_iter()
    .filter_map(|(n, c)| c.map(|c| (n, c)))
    .collect();
    if let Some(&(first, n)) = counts.first() {
        if let Some(&(other, m)) = counts.iter().find(|(_, m)| *m != n) {
            return Err(StageError::Aborted {
                stage: STAGE,
                message: format!("{first} has {n} samples but {other} has {m}"),
            });
        }
    }

    let mut report = MetricsReport {
        fid: None,
        clip_score: None,
        fid_clip: None,
        avg_file_size_kb: None,
        avg_primitives_used: None,
        sample_count: counts.first().map_or(0, |c| c.1),
        source_tags: Vec::new(),
    };
    for set in [&real, &gen, &clip_real, &clip_gen, &clip_image, &clip_text].into_iter().flatten() {
        if !report.source_tags.contains(&set.source_tag) {
            report.source_tags.push(set.source_tag.clone());
        }
    }

    let mut outcomes = Vec::new();
    if let (Some(r), Some(g)) = (&real, &gen) {
        outcomes.push(outcome("fid", metrics::fid(r, g), &mut report.fid));
    }
    if let (Some(r), Some(g)) = (&clip_real, &clip_gen) {
        outcomes.push(outcome("fid_clip", metrics::fid_clip(r, g), &mut report.fid_clip));
    }
    if let (Some(i), Some(t)) = (&clip_image, &clip_text) {
        outcomes.push(outcome("clip_score", metrics::clip_score(i, t), &mut report.clip_score));
    }
    if let Some(docs) = &docs {
        let stats = metrics::svg_stats(docs.iter());
        if let Ok(st) = &stats {
            report.avg_file_size_kb = Some(st.avg_file_size_kb);
        }
        outcomes.push(outcome("svg_stats", stats.map(|st| st.avg_primitives_used), &mut report.avg_primitives_used));
    }
    if outcomes.is_empty() {
        return Err(StageError::Precondition { stage: STAGE, missing: "no feature files or SVG directory given".into() });
    }

    write_json(&report_path(out), &report)?;
    let (manifest, _) = collect(STAGE, outcomes, 0);
    ctx.finish(STAGE, &manifest, 0, started, &Default::default())
}
