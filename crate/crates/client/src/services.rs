//! Embedding and token-scoring providers.

use std::time::Duration;

use stepsvg_core::raster::RasterImage;

use crate::http::{EndpointError, HttpClient, RetryPolicy};
use crate::wire::{EmbedImageRequest, EmbedResponse, EmbedTextRequest, ScoreRequest, ScoreResponse};

pub const PNG_DATA_PREFIX: &str = "data:image/png;base64,";

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error(transparent)]
    Endpoint(#[from] EndpointError),
    #[error("invalid provider response: {0}")]
    Invalid(String),
}

pub trait Embedder: Sync {
    fn embed_image(&self, image: &RasterImage) -> Result<Vec<f64>, ProviderError>;
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
}

pub trait NllScorer: Sync {
    /// Per-token negative log-likelihoods of `text`.
    fn token_nlls(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
}

/// Client for `/embed/image`, `/embed/text` and `/score`.
#[derive(Debug, Clone)]
pub struct ServicesClient {
    http: HttpClient,
    retry: RetryPolicy,
}

impl ServicesClient {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration, retry: RetryPolicy) -> Self {
        Self { http: HttpClient::new(base_url, api_key, timeout), retry }
    }

    fn embed<B: serde::Serialize>(&self, path: &str, body: &B) -> Result<Vec<f64>, ProviderError> {
        let resp: EmbedResponse = self.retry.run(|| self.http.post_json(path, body), EndpointError::is_transient)?;
        if resp.vector.len() != resp.d || resp.vector.iter().any(|x| !x.is_finite()) {
            return Err(ProviderError::Invalid(format!("{path}: vector of length {} with d = {}", resp.vector.len(), resp.d)));
        }
        Ok(resp.vector)
    }
}

impl Embedder for ServicesClient {
    fn embed_image(&self, image: &RasterImage) -> Result<Vec<f64>, ProviderError> {
        let url = image.to_data_url().map_err(|e| ProviderError::Invalid(e.to_string()))?;
        let body = EmbedImageRequest { image: url.trim_start_matches(PNG_DATA_PREFIX).to_owned() };
        self.embed("/embed/image", &body)
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        self.embed("/embed/text", &EmbedTextRequest { text: text.to_owned() })
    }
}

impl NllScorer for ServicesClient {
    fn token_nlls(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let body = ScoreRequest { text: text.to_owned() };
        let resp: ScoreResponse = self.retry.run(|| self.http.post_json("/score", &body), EndpointError::is_transient)?;
        if resp.token_count != resp.token_nlls.len() {
            return Err(ProviderError::Invalid(format!(
                "/score: token_count {} but {} values",
                resp.token_count,
                resp.token_nlls.len()
            )));
        }
        Ok(resp.token_nlls)
    }
}
