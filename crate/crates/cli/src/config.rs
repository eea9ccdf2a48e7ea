//! Pipeline configuration: built-in defaults, then a TOML key-value file,
//! then environment variables, then command-line flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;
use serde::{Deserialize, Serialize};
use stepsvg_client::http::RetryPolicy;
use stepsvg_core::annotation::{PerplexityScope, Thresholds, DEFAULT_CLIP_THRESHOLD, DEFAULT_PPL_THRESHOLD};
use stepsvg_core::raster::{DEFAULT_SIZE, MIN_SIZE};

pub const DEFAULT_LENGTH_CUTOFF: usize = 8192;
pub const DEFAULT_TEST_COUNT: usize = 1000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_MAX_INFLIGHT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AnnotatorRoute {
    /// OpenAI-compatible `/v1/chat/completions`.
    Chat,
    /// The model service's `/describe`.
    Describe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScopeArg {
    GlobalOnly,
    AllTexts,
}

impl From<ScopeArg> for PerplexityScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::GlobalOnly => PerplexityScope::GlobalOnly,
            ScopeArg::AllTexts => PerplexityScope::AllTexts,
        }
    }
}

/// Fields shared by the file, the environment and the flags. Every field is
/// optional so layers can be merged.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    #[arg(long, global = true, env = "STEPSVG_CORPUS_DIR")]
    pub corpus_dir: Option<PathBuf>,
    #[arg(long, global = true, env = "STEPSVG_OUTPUT_DIR")]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true, env = "STEPSVG_CANVAS_SIZE")]
    pub canvas_size: Option<u32>,
    /// Longest canonical SVG kept at ingest, in bytes.
    #[arg(long, global = true, env = "STEPSVG_LENGTH_CUTOFF")]
    pub length_cutoff: Option<usize>,
    #[arg(long, global = true, env = "STEPSVG_CLIP_THRESHOLD")]
    pub clip_threshold: Option<f64>,
    #[arg(long, global = true, env = "STEPSVG_PPL_THRESHOLD")]
    pub ppl_threshold: Option<f64>,
    #[arg(long, global = true, value_enum, env = "STEPSVG_PERPLEXITY_SCOPE")]
    pub perplexity_scope: Option<ScopeArg>,
    #[arg(long, global = true, env = "STEPSVG_MAX_INFLIGHT")]
    pub max_inflight: Option<usize>,
    #[arg(long, global = true, env = "STEPSVG_RNG_SEED")]
    pub rng_seed: Option<u64>,
    #[arg(long, global = true, env = "STEPSVG_TEST_COUNT")]
    pub test_count: Option<usize>,
    #[arg(long, global = true, env = "ANNOTATOR_ENDPOINT")]
    pub annotator_endpoint: Option<String>,
    #[arg(long, global = true, env = "ANNOTATOR_API_KEY", hide_env_values = true)]
    pub annotator_api_key: Option<String>,
    #[arg(long, global = true, env = "STEPSVG_ANNOTATOR_MODEL")]
    pub annotator_model: Option<String>,
    #[arg(long, global = true, value_enum, env = "STEPSVG_ANNOTATOR_ROUTE")]
    pub annotator_route: Option<AnnotatorRoute>,
    /// Base URL serving `/embed/image`, `/embed/text` and `/score`.
    #[arg(long, global = true, env = "SERVICES_ENDPOINT")]
    pub services_endpoint: Option<String>,
    #[arg(long, global = true, env = "SERVICES_API_KEY", hide_env_values = true)]
    pub services_api_key: Option<String>,
    #[arg(long, global = true, env = "GEN_ENDPOINT")]
    pub gen_endpoint: Option<String>,
    #[arg(long, global = true, env = "GEN_API_KEY", hide_env_values = true)]
    pub gen_api_key: Option<String>,
    #[arg(long, global = true, env = "STEPSVG_GEN_MODEL")]
    pub gen_model: Option<String>,
    #[arg(long, global = true, env = "STEPSVG_TIMEOUT_SECS")]
    pub timeout_secs: Option<u64>,
    /// First retry delay; later ones double.
    #[arg(long, global = true, env = "STEPSVG_RETRY_BASE_MS")]
    pub retry_base_ms: Option<u64>,
    #[arg(long, global = true, env = "STEPSVG_RETRY_ATTEMPTS")]
    pub retry_attempts: Option<u32>,
    /// Directory overriding the built-in prompt templates.
    #[arg(long, global = true, env = "STEPSVG_TEMPLATES_DIR")]
    pub templates_dir: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl ConfigLayer {
    /// Fields set in `top` replace those in `self`.
    pub fn overlay(&mut self, top: &ConfigLayer) {
        overlay!(
            self, top, corpus_dir, output_dir, canvas_size, length_cutoff, clip_threshold, ppl_threshold,
            perplexity_scope, max_inflight, rng_seed, test_count, annotator_endpoint, annotator_api_key,
            annotator_model, annotator_route, services_endpoint, services_api_key, gen_endpoint, gen_api_key,
            gen_model, timeout_secs, retry_base_ms, retry_attempts, templates_dir
        );
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File(path.to_owned(), e.to_string()))?;
        toml::from_str(&text).map_err(|e| ConfigError::File(path.to_owned(), e.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config file {0}: {1}")]
    File(PathBuf, String),
    #[error("{field} = {value} is outside {range}")]
    OutOfRange { field: &'static str, value: String, range: &'static str },
}

/// Resolved configuration. Serializes without API keys.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub corpus_dir: PathBuf,
    pub output_dir: PathBuf,
    pub canvas_size: u32,
    pub length_cutoff: usize,
    pub thresholds: Thresholds,
    pub perplexity_scope: PerplexityScope,
    pub max_inflight: usize,
    pub rng_seed: u64,
    pub test_count: usize,
    pub annotator_endpoint: Option<String>,
    #[serde(skip)]
    pub annotator_api_key: Option<String>,
    pub annotator_model: String,
    pub annotator_route: AnnotatorRoute,
    pub services_endpoint: Option<String>,
    #[serde(skip)]
    pub services_api_key: Option<String>,
    pub gen_endpoint: Option<String>,
    #[serde(skip)]
    pub gen_api_key: Option<String>,
    pub gen_model: String,
    pub timeout_secs: u64,
    pub retry_base_ms: u64,
    pub retry_attempts: u32,
    pub templates_dir: Option<PathBuf>,
}

fn check<T: PartialOrd + ToString>(field: &'static str, v: T, ok: bool, range: &'static str) -> Result<T, ConfigError> {
    if ok {
        Ok(v)
    } else {
        Err(ConfigError::OutOfRange { field, value: v.to_string(), range })
    }
}

impl PipelineConfig {
    /// Merges defaults, the optional file, and `cli` (which already carries
    /// environment values, flags taking precedence).
    pub fn resolve(file: Option<&Path>, cli: &ConfigLayer) -> Result<Self, ConfigError> {
        let mut layer = match file {
            Some(p) => ConfigLayer::from_file(p)?,
            None => ConfigLayer::default(),
        };
        layer.overlay(cli);
        Self::from_layer(layer)
    }

    pub fn from_layer(l: ConfigLayer) -> Result<Self, ConfigError> {
        let canvas = l.canvas_size.unwrap_or(DEFAULT_SIZE);
        let clip = l.clip_threshold.unwrap_or(DEFAULT_CLIP_THRESHOLD);
        let ppl = l.ppl_threshold.unwrap_or(DEFAULT_PPL_THRESHOLD);
        let inflight = l.max_inflight.unwrap_or(DEFAULT_MAX_INFLIGHT);
        let cutoff = l.length_cutoff.unwrap_or(DEFAULT_LENGTH_CUTOFF);
        let attempts = l.retry_attempts.unwrap_or(3);
        Ok(Self {
            corpus_dir: l.corpus_dir.unwrap_or_else(|| PathBuf::from("corpus")),
            output_dir: l.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            canvas_size: check("canvas_size", canvas, (MIN_SIZE..=8192).contains(&canvas), "[16, 8192]")?,
            length_cutoff: check("length_cutoff", cutoff, cutoff > 0, "positive integers")?,
            thresholds: Thresholds {
                clip: check("clip_threshold", clip, (-1.0..=1.0).contains(&clip), "[-1, 1]")?,
                perplexity: check("ppl_threshold", ppl, ppl >= 1.0 && ppl.is_finite(), "[1, inf)")?,
            },
            perplexity_scope: l.perplexity_scope.map(Into::into).unwrap_or_default(),
            max_inflight: check("max_inflight", inflight, (1..=256).contains(&inflight), "[1, 256]")?,
            rng_seed: l.rng_seed.unwrap_or(DEFAULT_SEED),
            test_count: l.test_count.unwrap_or(DEFAULT_TEST_COUNT),
            annotator_endpoint: l.annotator_endpoint,
            annotator_api_key: l.annotator_api_key,
            annotator_model: l.annotator_model.unwrap_or_else(|| "annotator".to_owned()),
            annotator_route: l.annotator_route.unwrap_or(AnnotatorRoute::Chat),
            services_endpoint: l.services_endpoint,
            services_api_key: l.services_api_key,
            gen_endpoint: l.gen_endpoint,
            gen_api_key: l.gen_api_key,
            gen_model: l.gen_model.unwrap_or_else(|| "generator".to_owned()),
            timeout_secs: l.timeout_secs.unwrap_or(120),
            retry_base_ms: l.retry_base_ms.unwrap_or(1000),
            retry_attempts: check("retry_attempts", attempts, attempts >= 1, "positive integers")?,
            templates_dir: l.templates_dir,
        })
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy { attempts: self.retry_attempts, base_delay: Duration::from_millis(self.retry_base_ms), jitter: 0.5 }
    }
}
