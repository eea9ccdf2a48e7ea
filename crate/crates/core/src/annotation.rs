//! Annotation records produced by the multimodal dialogue and the pure
//! acceptance rule applied to them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const DEFAULT_CLIP_THRESHOLD: f64 = 0.22;
pub const DEFAULT_PPL_THRESHOLD: f64 = 40.0;
/// Longest step text kept, in characters, before truncation.
pub const MAX_STEP_CHARS: usize = 512;
pub const TRUNCATION_MARKER: &str = " [truncated]";

/// Which frames a step text describes. Texts cover the n−1 transitions
/// I₁→I₂ … Iₙ₋₁→Iₙ; the first frame is described only by t_g.
pub const TRANSITION_CONVENTION: &str = "transitions I1->I2 .. In-1->In";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub clip: f64,
    pub perplexity: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { clip: DEFAULT_CLIP_THRESHOLD, perplexity: DEFAULT_PPL_THRESHOLD }
    }
}

impl Thresholds {
    pub fn accepts(&self, clip_score: f64, perplexity: f64) -> bool {
        clip_score >= self.clip && perplexity <= self.perplexity
    }
}

/// Which texts the perplexity filter scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerplexityScope {
    #[default]
    GlobalOnly,
    AllTexts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepText {
    /// Transition index i: the text describes Iᵢ → Iᵢ₊₁.
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub sample_id: String,
    pub t_g: String,
    pub steps: Vec<StepText>,
    /// Number of render steps n the texts were collected for.
    pub step_count: usize,
    pub clip_score: f64,
    pub perplexity: f64,
    pub accepted: bool,
    /// Set when any step text was cut to [`MAX_STEP_CHARS`].
    pub truncated: bool,
    pub thresholds: Thresholds,
    pub perplexity_scope: PerplexityScope,
    /// Template name to sha256 of its text.
    pub template_hashes: BTreeMap<String, String>,
    pub transition_convention: String,
}

impl AnnotationRecord {
    /// Re-derives `accepted` from the scores.
    pub fn apply_thresholds(&mut self, thresholds: Thresholds) {
        self.thresholds = thresholds;
        self.accepted = thresholds.accepts(self.clip_score, self.perplexity);
    }

    /// Step texts in transition order.
    pub fn texts(&self) -> Vec<String> {
        self.steps.iter().map(|s| s.text.clone()).collect()
    }
}

/// Caps `text` at [`MAX_STEP_CHARS`] characters, marker included.
/// Returns the text and whether it was cut.
pub fn cap_step_text(text: &str) -> (String, bool) {
    if text.chars().count() <= MAX_STEP_CHARS {
        return (text.to_owned(), false);
    }
    let keep = MAX_STEP_CHARS - TRUNCATION_MARKER.chars().count();
    let mut out: String = text.chars().take(keep).collect();
    out.push_str(TRUNCATION_MARKER);
    (out, true)
}

/// Cosine similarity; `None` when either vector is zero or the lengths differ.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>();
    let nb = b.iter().map(|x| x * x).sum::<f64>();
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return None;
    }
    // One square root of the product: identical vectors give exactly 1.
    Some((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acceptance_needs_both_scores() {
        let t = Thresholds::default();
        assert!(t.accepts(0.22, 40.0));
        assert!(!t.accepts(0.2199, 10.0));
        assert!(!t.accepts(0.9, 40.01));
    }

    #[test]
    fn long_text_is_capped_with_marker() {
        let (s, cut) = cap_step_text(&"é".repeat(600));
        assert!(cut);
        assert_eq!(s.chars().count(), MAX_STEP_CHARS);
        assert!(s.ends_with(TRUNCATION_MARKER));
        assert_eq!(cap_step_text("short"), ("short".to_owned(), false));
    }

    #[test]
    fn cosine_of_identical_and_orthogonal() {
        assert_eq!(cosine(&[1.0, 2.0], &[1.0, 2.0]), Some(1.0));
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 3.0]), Some(0.0));
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), None);
    }
}
