//! Chain-of-thought training samples: assembly, the chat layout with its
//! thinking delimiters, sequence NLL, train/test split and JSON-lines IO.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationRecord, Thresholds};
use crate::reconstruct::StepSequence;
use crate::svg;

pub const THINK_OPEN: &str = "<think>";
pub const THINK_CLOSE: &str = "</think>";
/// Character budget for a whole chat record, standing in for a token budget.
pub const MAX_CHAT_CHARS: usize = 16_384;
pub const INSTRUCTION_TEMPLATE: &str = "Generate an SVG matching this description: {t_g}";
pub const SYSTEM_PROMPT: &str = "You are an SVG designer. Reason about the drawing one primitive at a time, \
then answer with a single standalone SVG document.";

pub fn instruction(t_g: &str) -> String {
    INSTRUCTION_TEMPLATE.replace("{t_g}", t_g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetadata {
    pub thresholds: Thresholds,
    pub clip_score: f64,
    pub perplexity: f64,
    pub template_hashes: BTreeMap<String, String>,
    pub primitive_count: usize,
    pub byte_length: usize,
    pub truncated: bool,
    pub transition_convention: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub sample_id: String,
    pub prompt: String,
    pub think_trace: Vec<String>,
    pub svg_code: String,
    pub metadata: SampleMetadata,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

/// One line of `train.jsonl` / `test.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRecord {
    pub sample_id: String,
    pub messages: Vec<ChatMessage>,
    pub metadata: SampleMetadata,
}

impl ChatRecord {
    pub fn char_len(&self) -> usize {
        self.messages.iter().map(|m| m.content.chars().count()).sum()
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AssembleError {
    #[error("annotation record {0} was not accepted")]
    RejectedRecord(String),
    #[error("chat record has {chars} characters, budget is {limit}")]
    LengthOverflow { chars: usize, limit: usize },
    #[error("{texts} step texts for {steps} render steps, expected {}", .steps.saturating_sub(1))]
    StepCountMismatch { texts: usize, steps: usize },
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ChatParseError {
    #[error("expected system, user and assistant messages")]
    MessageShape,
    #[error("assistant content does not start with the thinking block")]
    NoThinkBlock,
    #[error("thinking block is not closed")]
    UnclosedThinkBlock,
    #[error("more than one thinking block")]
    RepeatedDelimiter,
    #[error("trace line {line} is not `Step {line}: ...`")]
    BadStepLine { line: usize },
    #[error("invalid escape in trace line {line}")]
    BadEscape { line: usize },
}

/// Builds a training sample from an accepted annotation and the sequence it
/// describes. `svg_code` is the canonical text of the reconstructed document.
pub fn assemble(rec: &AnnotationRecord, seq: &StepSequence) -> Result<TrainingSample, AssembleError> {
    if !rec.accepted {
        return Err(AssembleError::RejectedRecord(rec.sample_id.clone()));
    }
    let n = seq.n();
    if rec.steps.len() != n.saturating_sub(1) {
        return Err(AssembleError::StepCountMismatch { texts: rec.steps.len(), steps: n });
    }
    let svg_code = svg::serialize(&seq.to_document());
    let mut template_hashes = rec.template_hashes.clone();
    template_hashes.insert("instruction".into(), sha256_hex(INSTRUCTION_TEMPLATE));
    template_hashes.insert("system".into(), sha256_hex(SYSTEM_PROMPT));
    let sample = TrainingSample {
        sample_id: rec.sample_id.clone(),
        prompt: instruction(&rec.t_g),
        think_trace: rec.texts(),
        metadata: SampleMetadata {
            thresholds: rec.thresholds,
            clip_score: rec.clip_score,
            perplexity: rec.perplexity,
            template_hashes,
            primitive_count: n,
            byte_length: svg_code.len(),
            truncated: rec.truncated,
            transition_convention: rec.transition_convention.clone(),
        },
        svg_code,
    };
    let chars = to_chat(&sample).char_len();
    if chars > MAX_CHAT_CHARS {
        return Err(AssembleError::LengthOverflow { chars, limit: MAX_CHAT_CHARS });
    }
    Ok(sample)
}

pub fn sha256_hex(text: &str) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Escapes a step text so it fits on one trace line and cannot form a
/// delimiter: `\` `LF` `CR` become `\\` `\n` `\r`, and the `<` opening a
/// literal delimiter becomes `\x3c`.
pub fn escape_step(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for (i, c) in text.char_indices() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '<' if text[i..].starts_with(THINK_OPEN) || text[i..].starts_with(THINK_CLOSE) => out.push_str("\\x3c"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_step(text: &str) -> Option<String> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find('\\') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos + 1..];
        let (c, len) = if tail.starts_with('\\') {
            ('\\', 1)
        } else if tail.starts_with('n') {
            ('\n', 1)
        } else if tail.starts_with('r') {
            ('\r', 1)
        } else if tail.starts_with("x3c") {
            ('<', 3)
        } else {
            return None;
        };
        out.push(c);
        rest = &tail[len..];
    }
    out.push_str(rest);
    Some(out)
}

/// Assistant message: the numbered trace inside the thinking delimiters,
/// then the SVG code.
pub fn assistant_content(trace: &[String], svg_code: &str) -> String {
    let mut out = String::from(THINK_OPEN);
    out.push('\n');
    for (i, t) in trace.iter().enumerate() {
        out.push_str(&format!("Step {}: {}\n", i + 1, escape_step(t)));
    }
    out.push_str(THINK_CLOSE);
    out.push('\n');
    out.push_str(svg_code);
    out
}

pub fn to_chat(sample: &TrainingSample) -> ChatRecord {
    ChatRecord {
        sample_id: sample.sample_id.clone(),
        messages: vec![
            ChatMessage { role: Role::System, content: SYSTEM_PROMPT.to_owned() },
            ChatMessage { role: Role::User, content: sample.prompt.clone() },
            ChatMessage { role: Role::Assistant, content: assistant_content(&sample.think_trace, &sample.svg_code) },
        ],
        metadata: sample.metadata.clone(),
    }
}

/// Inverse of [`to_chat`].
pub fn parse_chat(rec: &ChatRecord) -> Result<TrainingSample, ChatParseError> {
    let [sys, user, assistant] = rec.messages.as_slice() else {
        return Err(ChatParseError::MessageShape);
    };
    if sys.role != Role::System || user.role != Role::User || assistant.role != Role::Assistant {
        return Err(ChatParseError::MessageShape);
    }
    let (think_trace, svg_code) = parse_assistant(&assistant.content)?;
    Ok(TrainingSample {
        sample_id: rec.sample_id.clone(),
        prompt: user.content.clone(),
        think_trace,
        svg_code,
        metadata: rec.metadata.clone(),
    })
}

/// Strict grammar: `<think>\n` (`Step i: text\n`)* `</think>\n` code.
pub fn parse_assistant(content: &str) -> Result<(Vec<String>, String), ChatParseError> {
    let body = content
        .strip_prefix(THINK_OPEN)
        .and_then(|s| s.strip_prefix('\n'))
        .ok_or(ChatParseError::NoThinkBlock)?;
    let close = body.find(THINK_CLOSE).ok_or(ChatParseError::UnclosedThinkBlock)?;
    let (trace_text, rest) = body.split_at(close);
    let code = rest[THINK_CLOSE.len()..].strip_prefix('\n').ok_or(ChatParseError::UnclosedThinkBlock)?;
    if trace_text.contains(THINK_OPEN) {
        return Err(ChatParseError::RepeatedDelimiter);
    }
    if !(trace_text.is_empty() || trace_text.ends_with('\n')) {
        return Err(ChatParseError::BadStepLine { line: trace_text.lines().count() });
    }
    let mut trace = Vec::new();
    for (k, line) in trace_text.lines().enumerate() {
        let prefix = format!("Step {}: ", k + 1);
        let text = line.strip_prefix(prefix.as_str()).ok_or(ChatParseError::BadStepLine { line: k + 1 })?;
        trace.push(unescape_step(text).ok_or(ChatParseError::BadEscape { line: k + 1 })?);
    }
    Ok((trace, code.to_owned()))
}

/// A model response split leniently into trace lines and the text after the
/// thinking block.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinkSplit {
    pub trace: Vec<String>,
    pub answer: String,
}

/// Tolerant counterpart of [`parse_assistant`] for model output: leading
/// text, missing newlines, unnumbered or blank lines and a missing close
/// delimiter (when an `<svg` follows) are accepted. `None` when there is no
/// thinking block at all.
pub fn split_think(content: &str) -> Option<ThinkSplit> {
    let open = content.find(THINK_OPEN)?;
    let body = &content[open + THINK_OPEN.len()..];
    let (trace_text, answer) = match body.find(THINK_CLOSE) {
        Some(close) => (&body[..close], &body[close + THINK_CLOSE.len()..]),
        None => {
            let svg = body.find("<svg")?;
            (&body[..svg], &body[svg..])
        }
    };
    let trace = trace_text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let text = strip_step_number(l).unwrap_or(l);
            unescape_step(text).unwrap_or_else(|| text.to_owned())
        })
        .collect();
    Some(ThinkSplit { trace, answer: answer.trim().to_owned() })
}

fn strip_step_number(line: &str) -> Option<&str> {
    let rest = line.strip_prefix("Step ")?;
    let digits = rest.find(|c: char| !c.is_ascii_digit())?;
    if digits == 0 {
        return None;
    }
    let rest = rest[digits..].strip_prefix(':')?;
    Some(rest.strip_prefix(' ').unwrap_or(rest))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllSummary {
    /// Σ −log P(xᵢ | x<ᵢ).
    pub sum: f64,
    /// `sum / count`, 0 for an empty sequence.
    pub mean: f64,
    pub count: usize,
}

impl NllSummary {
    /// exp(mean); 1 for an empty sequence.
    pub fn perplexity(&self) -> f64 {
        self.mean.exp()
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("token NLL at position {index} is {value}, expected a finite non-negative value")]
pub struct NonFiniteInput {
    pub index: usize,
    pub value: f64,
}

/// Sequence negative log-likelihood from per-token values, summed with
/// Neumaier compensation. An empty sequence has NLL 0.
pub fn sequence_nll(token_nlls: &[f64]) -> Result<NllSummary, NonFiniteInput> {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (index, &v) in token_nlls.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(NonFiniteInput { index, value: v });
        }
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    let sum = sum + comp;
    let count = token_nlls.len();
    let mean = if count == 0 { 0.0 } else { sum / count as f64 };
    Ok(NllSummary { sum, mean, count })
}

pub fn perplexity(token_nlls: &[f64]) -> Result<f64, NonFiniteInput> {
    Ok(sequence_nll(token_nlls)?.perplexity())
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SplitError {
    #[error("cannot hold out {test_count} of {available} samples")]
    InsufficientSamples { test_count: usize, available: usize },
    #[error("duplicate sample id {0}")]
    DuplicateId(String),
}

/// Holds out `test_count` items chosen by a seeded ChaCha8 draw. Both
/// partitions keep the input order.
pub fn split_dataset<T>(
    items: Vec<T>,
    test_count: usize,
    seed: u64,
    id: impl Fn(&T) -> &str,
) -> Result<(Vec<T>, Vec<T>), SplitError> {
    if test_count >= items.len() {
        return Err(SplitError::InsufficientSamples { test_count, available: items.len() });
    }
    let mut seen = HashSet::with_capacity(items.len());
    for it in &items {
        if !seen.insert(id(it)) {
            return Err(SplitError::DuplicateId(id(it).to_owned()));
        }
    }
    drop(seen);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = vec![false; items.len()];
    for i in rand::seq::index::sample(&mut rng, items.len(), test_count) {
        held[i] = true;
    }
    let mut train = Vec::with_capacity(items.len() - test_count);
    let mut test = Vec::with_capacity(test_count);
    for (it, h) in items.into_iter().zip(held) {
        if h {
            test.push(it);
        } else {
            train.push(it);
        }
    }
    Ok((train, test))
}

pub fn write_jsonl<T: Serialize>(mut w: impl Write, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(r: impl BufRead) -> std::io::Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_jsonl_file<T: for<'de> Deserialize<'de>>(path: &Path) -> std::io::Result<Vec<T>> {
    read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Summary written next to the split files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub train_count: usize,
    pub test_count: usize,
    pub seed: u64,
    pub thresholds: Thresholds,
    pub think_open: String,
    pub think_close: String,
    pub instruction_template: String,
    pub template_hashes: BTreeMap<String, String>,
    pub transition_convention: String,
    /// Samples dropped at assembly, by reason.
    pub rejected: BTreeMap<String, usize>,
}
