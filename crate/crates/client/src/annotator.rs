//! Multimodal dialogue that describes a render sequence, and the scoring
//! filter applied to its texts.
//!
//! The history keeps text only: the system turn, the turn carrying t_g, and
//! one user/assistant pair per completed step. Each step request attaches
//! exactly three frames (after the step, before it, and the finished icon),
//! so request size stays bounded however long the sequence is.

use std::collections::BTreeMap;

use stepsvg_core::annotation::{
    cap_step_text, cosine, AnnotationRecord, PerplexityScope, StepText, Thresholds, TRANSITION_CONVENTION,
};
use stepsvg_core::dataset::{sequence_nll, Role};
use stepsvg_core::raster::RasterImage;

use crate::chat::ChatTransport;
use crate::http::{EndpointError, RetryPolicy};
use crate::services::{Embedder, NllScorer, ProviderError};
use crate::templates::PromptTemplates;
use crate::wire::{ChatRequest, Content, ContentPart, ImageUrl, WireMessage};

/// Images attached to a single step request.
pub const STEP_IMAGES: usize = 3;
pub const DEFAULT_MAX_HISTORY_CHARS: usize = 48_000;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AnnotateError {
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
    #[error("endpoint returned an empty reply")]
    EmptyResponse,
    #[error("dialogue would reach {chars} characters, over the limit of {limit}")]
    ContextOverflow { chars: usize, limit: usize },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("image encoding failed: {0}")]
    Image(String),
    #[error("a sequence needs at least one frame")]
    NoFrames,
}

impl AnnotateError {
    fn retryable(&self) -> bool {
        match self {
            AnnotateError::Endpoint(e) => e.is_transient(),
            AnnotateError::EmptyResponse => true,
            _ => false,
        }
    }
}

/// A PNG frame encoded once as a data URL.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedImage(pub String);

impl EncodedImage {
    pub fn new(image: &RasterImage) -> Result<Self, AnnotateError> {
        image.to_data_url().map(EncodedImage).map_err(|e| AnnotateError::Image(e.to_string()))
    }

    fn part(&self) -> ContentPart {
        ContentPart::ImageUrl { image_url: ImageUrl { url: self.0.clone() } }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DialogueTurn {
    pub role: Role,
    pub text: String,
}

impl DialogueTurn {
    fn wire(&self) -> WireMessage {
        let role = match self.role {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        };
        WireMessage { role: role.to_owned(), content: Content::Text(self.text.clone()) }
    }
}

/// The three frames shown for transition Iᵢ → Iᵢ₊₁.
#[derive(Debug, Clone, Copy)]
pub struct StepImages<'a> {
    pub current: &'a EncodedImage,
    pub previous: &'a EncodedImage,
    pub finished: &'a EncodedImage,
}

#[derive(Debug, Clone)]
pub struct AnnotatorConfig {
    pub model: String,
    pub retry: RetryPolicy,
    pub max_history_chars: usize,
    pub max_tokens: Option<u32>,
    pub temperature: Option<f64>,
}

impl Default for AnnotatorConfig {
    fn default() -> Self {
        Self {
            model: "annotator".to_owned(),
            retry: RetryPolicy::default(),
            max_history_chars: DEFAULT_MAX_HISTORY_CHARS,
            max_tokens: Some(512),
            temperature: Some(0.0),
        }
    }
}

/// Texts collected for one sequence, before scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Dialogue {
    pub t_g: String,
    pub steps: Vec<StepText>,
    pub truncated: bool,
    /// Frames n the dialogue covered.
    pub step_count: usize,
}

pub struct Annotator<'a> {
    transport: &'a dyn ChatTransport,
    templates: PromptTemplates,
    config: AnnotatorConfig,
}

impl<'a> Annotator<'a> {
    pub fn new(transport: &'a dyn ChatTransport, templates: PromptTemplates, config: AnnotatorConfig) -> Self {
        Self { transport, templates, config }
    }

    pub fn templates(&self) -> &PromptTemplates {
        &self.templates
    }

    fn request(&self, messages: Vec<WireMessage>) -> ChatRequest {
        ChatRequest {
            model: self.config.model.clone(),
            messages,
            temperature: self.config.temperature,
            top_p: None,
            max_tokens: self.config.max_tokens,
            seed: None,
            stream: false,
        }
    }

    fn send(&self, req: &ChatRequest) -> Result<String, AnnotateError> {
        self.config.retry.run(
            || {
                let text = self.transport.complete(req)?;
                let text = text.trim();
                if text.is_empty() {
                    return Err(AnnotateError::EmptyResponse);
                }
                Ok(text.to_owned())
            },
            AnnotateError::retryable,
        )
    }

    /// Asks for t_g given the finished frame.
    pub fn describe_global(&self, finished: &EncodedImage) -> Result<String, AnnotateError> {
        let messages = vec![
            DialogueTurn { role: Role::System, text: self.templates.system.clone() }.wire(),
            WireMessage {
                role: "user".to_owned(),
                content: Content::Parts(vec![ContentPart::Text { text: self.templates.global.clone() }, finished.part()]),
            },
        ];
        self.send(&self.request(messages))
    }

    /// The opening turns of a step dialogue: system prompt and t_g.
    pub fn start_history(&self, t_g: &str) -> Vec<DialogueTurn> {
        vec![
            DialogueTurn { role: Role::System, text: self.templates.system.clone() },
            DialogueTurn { role: Role::User, text: self.templates.global_context(t_g) },
        ]
    }

    /// Describes transition `i` of `transitions`. An empty `history` is
    /// opened with t_g first. The history grows by one user/assistant pair
    /// only when the request succeeds, so a failed step can be retried
    /// without duplicating turns. Returns the capped text and whether it
    /// was cut.
    pub fn describe_step(
        &self,
        i: usize,
        transitions: usize,
        images: StepImages<'_>,
        t_g: &str,
        history: &mut Vec<DialogueTurn>,
    ) -> Result<(String, bool), AnnotateError> {
        if history.is_empty() {
            *history = self.start_history(t_g);
        }
        let prompt = self.templates.step(i, transitions);
        let chars = history.iter().map(|t| t.text.chars().count()).sum::<usize>() + prompt.chars().count();
        if chars > self.config.max_history_chars {
            return Err(AnnotateError::ContextOverflow { chars, limit: self.config.max_history_chars });
        }
        let mut messages: Vec<WireMessage> = history.iter().map(DialogueTurn::wire).collect();
        messages.push(WireMessage {
            role: "user".to_owned(),
            content: Content::Parts(vec![
                ContentPart::Text { text: prompt.clone() },
                images.current.part(),
                images.previous.part(),
                images.finished.part(),
            ]),
        });
        let reply = self.send(&self.request(messages))?;
        let (text, cut) = cap_step_text(&reply);
        history.push(DialogueTurn { role: Role::User, text: prompt });
        history.push(DialogueTurn { role: Role::Assistant, text: text.clone() });
        Ok((text, cut))
    }

    /// Runs the whole dialogue over frames I₁..Iₙ.
    pub fn annotate(&self, frames: &[RasterImage]) -> Result<Dialogue, AnnotateError> {
        let encoded = frames.iter().map(EncodedImage::new).collect::<Result<Vec<_>, _>>()?;
        self.annotate_encoded(&encoded)
    }

    pub fn annotate_encoded(&self, frames: &[EncodedImage]) -> Result<Dialogue, AnnotateError> {
        let finished = frames.last().ok_or(AnnotateError::NoFrames)?;
        let t_g = self.describe_global(finished)?;
        let transitions = frames.len() - 1;
        let mut history = self.start_history(&t_g);
        let mut steps = Vec::with_capacity(transitions);
        let mut truncated = false;
        for i in 1..=transitions {
            let images = StepImages { current: &frames[i], previous: &frames[i - 1], finished };
            let (text, cut) = self.describe_step(i, transitions, images, &t_g, &mut history)?;
            truncated |= cut;
            steps.push(StepText { index: i, text });
        }
        Ok(Dialogue { t_g, steps, truncated, step_count: frames.len() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FilterConfig {
    pub thresholds: Thresholds,
    pub scope: PerplexityScope,
}

/// Scores a dialogue: CLIP similarity of the finished frame and t_g, and
/// perplexity of the scoped texts. The record's `accepted` flag is derived
/// from the thresholds.
pub fn filter_record(
    sample_id: &str,
    dialogue: Dialogue,
    finished: &RasterImage,
    embedder: &dyn Embedder,
    scorer: &dyn NllScorer,
    config: FilterConfig,
    template_hashes: BTreeMap<String, String>,
) -> Result<AnnotationRecord, AnnotateError> {
    let image = embedder.embed_image(finished)?;
    let text = embedder.embed_text(&dialogue.t_g)?;
    let clip_score = cosine(&image, &text).ok_or_else(|| {
        ProviderError::Invalid(format!("no cosine for vectors of length {} and {}", image.len(), text.len()))
    })?;
    let scored = match config.scope {
        PerplexityScope::GlobalOnly => dialogue.t_g.clone(),
        PerplexityScope::AllTexts => {
            std::iter::once(dialogue.t_g.as_str()).chain(dialogue.steps.iter().map(|s| s.text.as_str())).collect::<Vec<_>>().join("\n")
        }
    };
    let nlls = scorer.token_nlls(&scored)?;
    let perplexity = sequence_nll(&nlls).map_err(|e| ProviderError::Invalid(e.to_string()))?.perplexity();
    let mut rec = AnnotationRecord {
        sample_id: sample_id.to_owned(),
        t_g: dialogue.t_g,
        steps: dialogue.steps,
        step_count: dialogue.step_count,
        clip_score,
        perplexity,
        accepted: false,
        truncated: dialogue.truncated,
        thresholds: config.thresholds,
        perplexity_scope: config.scope,
        template_hashes,
        transition_convention: TRANSITION_CONVENTION.to_owned(),
    };
    rec.apply_thresholds(config.thresholds);
    Ok(rec)
}
