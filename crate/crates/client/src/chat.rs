//! Transports that turn a chat request into the assistant's reply text.

use std::time::Duration;

use crate::http::{EndpointError, HttpClient};
use crate::wire::{ChatRequest, ChatResponse, DescribeRequest};

pub const CHAT_COMPLETIONS_PATH: &str = "/v1/chat/completions";
pub const DESCRIBE_PATH: &str = "/describe";

pub trait ChatTransport: Sync {
    /// Sends one request and returns the reply text, possibly empty.
    fn complete(&self, req: &ChatRequest) -> Result<String, EndpointError>;
}

/// An OpenAI-compatible `/v1/chat/completions` endpoint.
#[derive(Debug, Clone)]
pub struct ChatCompletionsClient {
    http: HttpClient,
}

impl ChatCompletionsClient {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Self {
        Self { http: HttpClient::new(base_url, api_key, timeout) }
    }
}

impl ChatTransport for ChatCompletionsClient {
    fn complete(&self, req: &ChatRequest) -> Result<String, EndpointError> {
        let resp: ChatResponse = self.http.post_json(CHAT_COMPLETIONS_PATH, req)?;
        Ok(resp.choices.into_iter().next().and_then(|c| c.message.content).unwrap_or_default())
    }
}

/// The model service's `/describe` route, which answers in plain text.
#[derive(Debug, Clone)]
pub struct DescribeClient {
    http: HttpClient,
}

impl DescribeClient {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Self {
        Self { http: HttpClient::new(base_url, api_key, timeout) }
    }
}

impl ChatTransport for DescribeClient {
    fn complete(&self, req: &ChatRequest) -> Result<String, EndpointError> {
        self.http.post_text(DESCRIBE_PATH, &DescribeRequest { messages: req.messages.clone() })
    }
}
