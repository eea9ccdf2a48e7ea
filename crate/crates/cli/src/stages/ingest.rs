//! Parse, normalize and length-filter every `.svg` under the corpus
//! directory; accepted files land in `curated/{sample_id}.svg`.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stepsvg_core::dataset::sha256_hex;
use stepsvg_core::svg::{normalize, parse_svg, serialize, SvgError};

use super::{collect, Context, Outcome, StageError, StageReport};
use crate::manifest::{unix_now, write_atomic, Rejection};

pub const STAGE: &str = "ingest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuratedEntry {
    pub sample_id: String,
    /// Path relative to the corpus directory.
    pub source: String,
    pub byte_length: usize,
    pub primitive_count: usize,
}

pub fn sample_id(canonical: &str) -> String {
    sha256_hex(canonical)[..16].to_owned()
}

pub fn curated_path(ctx: &Context, id: &str) -> std::path::PathBuf {
    ctx.out("curated").join(format!("{id}.svg"))
}

fn svg_reason(e: &SvgError) -> &'static str {
    match e {
        SvgError::InvalidUtf8 => "invalid_utf8",
        SvgError::MalformedXml(_) => "malformed_xml",
        SvgError::NotSvg(_) => "not_svg",
        SvgError::UnsupportedFeature(_) => "unsupported_feature",
        SvgError::DanglingReference(_) => "dangling_reference",
        SvgError::InvalidAttribute { .. } => "invalid_attribute",
        SvgError::InvalidViewBox => "invalid_view_box",
    }
}

fn corpus_files(dir: &Path) -> Result<Vec<String>, StageError> {
    if !dir.is_dir() {
        return Err(StageError::Precondition { stage: STAGE, missing: format!("corpus directory {}", dir.display()) });
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| std::io::Error::other(e.to_string()))?;
        let is_svg = entry.path().extension().is_some_and(|x| x.eq_ignore_ascii_case("svg"));
        if entry.file_type().is_file() && is_svg {
            let rel = entry.path().strip_prefix(dir).unwrap_or(entry.path());
            files.push(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"));
        }
    }
    Ok(files)
}

fn reject(source: &str, reason: &str, detail: impl ToString) -> Rejection {
    Rejection { sample_id: None, source: Some(source.to_owned()), reason: reason.to_owned(), detail: detail.to_string() }
}

fn curate(ctx: &Context, source: &str) -> Result<(CuratedEntry, String), Rejection> {
    let bytes = std::fs::read(ctx.config.corpus_dir.join(source)).map_err(|e| reject(source, "unreadable", e))?;
    let doc = parse_svg(&bytes).map_err(|e| reject(source, svg_reason(&e), &e))?;
    let canonical = serialize(&normalize(&doc));
    if canonical.len() > ctx.config.length_cutoff {
        let detail = format!("{} bytes > {}", canonical.len(), ctx.config.length_cutoff);
        return Err(reject(source, "length_overflow", detail));
    }
    // The stored text is what later stages parse, so count from it.
    let reparsed = parse_svg(canonical.as_bytes()).map_err(|e| reject(source, svg_reason(&e), &e))?;
    let entry = CuratedEntry {
        sample_id: sample_id(&canonical),
        source: source.to_owned(),
        byte_length: canonical.len(),
        primitive_count: reparsed.primitives().count(),
    };
    Ok((entry, canonical))
}

pub fn run(ctx: &Context) -> Result<StageReport, StageError> {
    let started = unix_now();
    let files = corpus_files(&ctx.config.corpus_dir)?;
    if files.is_empty() {
        return Err(StageError::Aborted { stage: STAGE, message: "EmptyCorpus: no .svg files found".into() });
    }
    // Ingest is local and always recomputed, so `--limit` does not apply.
    if ctx.limit.is_some() {
        log::debug!("{STAGE}: --limit ignored");
    }
    let curated: Vec<_> = ctx.install(|| files.par_iter().map(|f| (f.clone(), curate(ctx, f))).collect());

    let mut seen = HashSet::new();
    let mut outcomes = Vec::with_capacity(curated.len());
    for (source, result) in curated {
        let outcome = match result {
            Ok((entry, _)) if !seen.insert(entry.sample_id.clone()) => {
                let mut r = reject(&source, "duplicate", format!("same content as an earlier file ({})", entry.sample_id));
                r.sample_id = Some(entry.sample_id);
                Outcome::Rejected(r)
            }
            Ok((entry, text)) => match write_atomic(&curated_path(ctx, &entry.sample_id), text.as_bytes()) {
                Ok(()) => Outcome::Done(entry),
                Err(e) => Outcome::Failed(e.to_string()),
            },
            Err(r) => Outcome::Rejected(r),
        };
        outcomes.push((source, outcome));
    }
    let (manifest, resumed) = collect(STAGE, outcomes, 0);
    ctx.finish(STAGE, &manifest, resumed, started, &BTreeMap::new())
}
