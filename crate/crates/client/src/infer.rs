//! Generation against a fine-tuned endpoint: sampling, parsing of the
//! thinking trace and SVG answer, rendering, best-of-k selection and prompt
//! edits.

use serde::Serialize;
use stepsvg_core::annotation::cosine;
use stepsvg_core::dataset::{instruction, split_think, SYSTEM_PROMPT};
use stepsvg_core::raster::{render_document, RasterImage, DEFAULT_SIZE};
use stepsvg_core::svg::{parse_svg, SvgDocument};

use crate::chat::ChatTransport;
use crate::http::{EndpointError, RetryPolicy};
use crate::services::{Embedder, ProviderError};
use crate::wire::{ChatRequest, Content, WireMessage};

pub const NUCLEUS_TOP_P: f64 = 0.8;
pub const NUCLEUS_TEMPERATURE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Sampling {
    Greedy,
    Nucleus { top_p: f64, temperature: f64 },
}

impl Sampling {
    pub fn nucleus() -> Self {
        Sampling::Nucleus { top_p: NUCLEUS_TOP_P, temperature: NUCLEUS_TEMPERATURE }
    }
}

#[derive(Debug, Clone)]
pub struct GenerationConfig {
    pub model: String,
    pub sampling: Sampling,
    pub max_tokens: Option<u32>,
    pub render_size: u32,
    pub retry: RetryPolicy,
    /// Passed through to the endpoint; best-of-k offsets it per candidate.
    pub seed: Option<u64>,
    /// Concurrent requests issued by best-of-k.
    pub max_inflight: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            model: "generator".to_owned(),
            sampling: Sampling::Greedy,
            max_tokens: Some(8192),
            render_size: DEFAULT_SIZE,
            retry: RetryPolicy::default(),
            seed: None,
            max_inflight: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum FailureReason {
    NoThinkBlock,
    UnparseableSvg(String),
    RenderError(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerationResult {
    pub prompt: String,
    pub raw: String,
    pub think_trace: Vec<String>,
    pub svg_code: Option<String>,
    /// Set when the SVG only parsed after repair.
    pub salvaged: bool,
    pub failure: Option<FailureReason>,
    #[serde(skip)]
    pub image: Option<RasterImage>,
}

impl GenerationResult {
    pub fn is_valid(&self) -> bool {
        self.failure.is_none()
    }

    fn failed(prompt: &str, raw: String, reason: FailureReason) -> Self {
        Self {
            prompt: prompt.to_owned(),
            raw,
            think_trace: Vec::new(),
            svg_code: None,
            salvaged: false,
            failure: Some(reason),
            image: None,
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum InferError {
    #[error("best-of-k needs nucleus sampling")]
    GreedyBestOf,
    #[error("k must be at least 1")]
    ZeroCandidates,
    #[error("none of the {0} candidates produced a renderable SVG")]
    AllInvalid(usize),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum EditError {
    #[error("span {span:?} occurs {count} times; an edit needs exactly one")]
    AmbiguousSpan { span: String, count: usize },
}

pub fn request(prompt: &str, config: &GenerationConfig, seed: Option<u64>) -> ChatRequest {
    let (temperature, top_p) = match config.sampling {
        Sampling::Greedy => (Some(0.0), None),
        Sampling::Nucleus { top_p, temperature } => (Some(temperature), Some(top_p)),
    };
    let message = |role: &str, text: String| WireMessage { role: role.to_owned(), content: Content::Text(text) };
    ChatRequest {
        model: config.model.clone(),
        messages: vec![message("system", SYSTEM_PROMPT.to_owned()), message("user", instruction(prompt))],
        temperature,
        top_p,
        max_tokens: config.max_tokens,
        seed,
        stream: false,
    }
}

/// Repairs a truncated or trailing-garbage SVG: keeps everything up to the
/// last complete tag and closes any elements left open.
pub fn salvage_svg(text: &str) -> Option<String> {
    let start = text.find("<svg")?;
    let body = &text[start..];
    let mut stack: Vec<&str> = Vec::new();
    let mut end = 0;
    let mut pos = 0;
    while let Some(rel) = body[pos..].find('<') {
        let open = pos + rel;
        let Some(close_rel) = body[open..].find('>') else { break };
        let close = open + close_rel;
        let tag = &body[open + 1..close];
        if let Some(name) = tag.strip_prefix('/') {
            let name = name.trim();
            if stack.last() != Some(&name) {
                break;
            }
            stack.pop();
        } else if !(tag.starts_with('?') || tag.starts_with('!') || tag.ends_with('/')) {
            let name = tag.split(|c: char| c.is_whitespace()).next().unwrap_or("");
            if name.is_empty() {
                break;
            }
            stack.push(name);
        }
        end = close + 1;
        pos = end;
        if stack.is_empty() {
            break;
        }
    }
    if end == 0 {
        return None;
    }
    let mut out = body[..end].to_owned();
    for name in stack.iter().rev() {
        out.push_str(&format!("</{name}>"));
    }
    Some(out)
}

/// Extracts and parses the SVG in a model answer, repairing it if the
/// straightforward parse fails.
pub fn parse_answer(answer: &str) -> Result<(String, SvgDocument, bool), FailureReason> {
    let start = answer.find("<svg").ok_or_else(|| FailureReason::UnparseableSvg("no <svg> element".to_owned()))?;
    let direct = answer.rfind("</svg>").filter(|&e| e > start).map(|e| &answer[start..e + "</svg>".len()]);
    let mut first_error = None;
    if let Some(code) = direct {
        match parse_svg(code.as_bytes()) {
            Ok(doc) => return Ok((code.to_owned(), doc, false)),
            Err(e) => first_error = Some(e.to_string()),
        }
    }
    if let Some(code) = salvage_svg(&answer[start..]) {
        if let Ok(doc) = parse_svg(code.as_bytes()) {
            return Ok((code, doc, true));
        }
    }
    Err(FailureReason::UnparseableSvg(first_error.unwrap_or_else(|| "unterminated <svg> element".to_owned())))
}

/// Turns raw model output into a result. Never panics.
pub fn interpret(prompt: &str, raw: String, render_size: u32) -> GenerationResult {
    let Some(split) = split_think(&raw) else {
        return GenerationResult::failed(prompt, raw, FailureReason::NoThinkBlock);
    };
    let (code, doc, salvaged) = match parse_answer(&split.answer) {
        Ok(v) => v,
        Err(reason) => {
            let mut r = GenerationResult::failed(prompt, raw, reason);
            r.think_trace = split.trace;
            return r;
        }
    };
    let rendered = render_document(&doc, render_size);
    let (image, failure) = match rendered {
        Ok(img) => (Some(img), None),
        Err(e) => (None, Some(FailureReason::RenderError(e.to_string()))),
    };
    GenerationResult {
        prompt: prompt.to_owned(),
        raw,
        think_trace: split.trace,
        svg_code: Some(code),
        salvaged,
        failure,
        image,
    }
}

fn generate_seeded(
    transport: &dyn ChatTransport,
    prompt: &str,
    config: &GenerationConfig,
    seed: Option<u64>,
) -> Result<GenerationResult, EndpointError> {
    let req = request(prompt, config, seed);
    let raw = config.retry.run(|| transport.complete(&req), EndpointError::is_transient)?;
    Ok(interpret(prompt, raw, config.render_size))
}

/// One generation. Model misbehavior lands in `failure`; only transport
/// problems are errors.
pub fn generate(
    transport: &dyn ChatTransport,
    prompt: &str,
    config: &GenerationConfig,
) -> Result<GenerationResult, EndpointError> {
    generate_seeded(transport, prompt, config, config.seed)
}

#[derive(Debug, Clone)]
pub struct BestOf {
    /// Index of the chosen candidate.
    pub index: usize,
    pub candidates: Vec<GenerationResult>,
    /// CLIP similarity per candidate; `None` for invalid ones.
    pub scores: Vec<Option<f64>>,
}

impl BestOf {
    pub fn best(&self) -> &GenerationResult {
        &self.candidates[self.index]
    }
}

/// Draws `k` candidates concurrently and keeps the one whose render is most
/// similar to `prompt`. Ties go to the lowest index.
pub fn best_of(
    transport: &dyn ChatTransport,
    prompt: &str,
    config: &GenerationConfig,
    k: usize,
    embedder: &dyn Embedder,
) -> Result<BestOf, InferError> {
    if !matches!(config.sampling, Sampling::Nucleus { .. }) {
        return Err(InferError::GreedyBestOf);
    }
    if k == 0 {
        return Err(InferError::ZeroCandidates);
    }
    let mut candidates = Vec::with_capacity(k);
    let indices: Vec<usize> = (0..k).collect();
    for batch in indices.chunks(config.max_inflight.max(1)) {
        let results: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = batch
                .iter()
                .map(|&i| {
                    let seed = config.seed.map(|s| s.wrapping_add(i as u64));
                    s.spawn(move || generate_seeded(transport, prompt, config, seed))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("generation thread panicked")).collect()
        });
        for r in results {
            candidates.push(r?);
        }
    }
    if candidates.iter().all(|c| !c.is_valid()) {
        return Err(InferError::AllInvalid(k));
    }
    let text = embedder.embed_text(prompt)?;
    let mut scores = Vec::with_capacity(k);
    for c in &candidates {
        let score = match (&c.image, c.is_valid()) {
            (Some(img), true) => {
                let v = embedder.embed_image(img)?;
                Some(cosine(&v, &text).ok_or_else(|| ProviderError::Invalid("zero embedding".to_owned()))?)
            }
            _ => None,
        };
        scores.push(score);
    }
    let mut index = 0;
    let mut top = f64::NEG_INFINITY;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if s > top {
                top = s;
                index = i;
            }
        }
    }
    Ok(BestOf { index, candidates, scores })
}

/// Applies replacements in order; each `old` must occur exactly once in the
/// text as edited so far.
pub fn edit_prompt(prompt: &str, replacements: &[(&str, &str)]) -> Result<String, EditError> {
    let mut text = prompt.to_owned();
    for &(old, new) in replacements {
        let count = if old.is_empty() { 0 } else { text.matches(old).count() };
        if count != 1 {
            return Err(EditError::AmbiguousSpan { span: old.to_owned(), count });
        }
        text = text.replacen(old, new, 1);
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn salvage_closes_open_elements() {
        let s = salvage_svg(r#"<svg viewBox="0 0 4 4"><g><rect width="2" height="2"/><circ"#).unwrap();
        assert_eq!(s, r#"<svg viewBox="0 0 4 4"><g><rect width="2" height="2"/></g></svg>"#);
        assert!(salvage_svg("no svg here").is_none());
    }

    #[test]
    fn edit_needs_a_unique_span() {
        let base = "a red circle above a blue square";
        assert_eq!(edit_prompt(base, &[("red", "green")]).unwrap(), "a green circle above a blue square");
        assert_eq!(edit_prompt(base, &[("red", "blue"), ("blue circle", "big circle")]).unwrap(), "a big circle above a blue square");
        let twice = edit_prompt("red and red", &[("red", "blue")]);
        assert_eq!(twice, Err(EditError::AmbiguousSpan { span: "red".into(), count: 2 }));
        assert!(matches!(edit_prompt(base, &[("green", "x")]), Err(EditError::AmbiguousSpan { count: 0, .. })));
    }

    #[test]
    fn sampling_parameters_reach_the_request() {
        let mut config = GenerationConfig::default();
        let greedy = serde_json::to_value(request("x", &config, None)).unwrap();
        assert_eq!(greedy["temperature"], 0.0);
        assert!(greedy.get("top_p").is_none());
        config.sampling = Sampling::nucleus();
        let nucleus = serde_json::to_value(request("x", &config, None)).unwrap();
        assert_eq!((nucleus["top_p"].as_f64(), nucleus["temperature"].as_f64()), (Some(0.8), Some(1.0)));
    }
}
