//! JSON-over-HTTP with bounded, jittered retries.

use std::time::Duration;

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EndpointError {
    #[error("{url}: transport error: {message}")]
    Transport { url: String, message: String },
    #[error("{url}: HTTP {status}: {body}")]
    Status { url: String, status: u16, body: String },
    #[error("{url}: undecodable response: {message}")]
    Decode { url: String, message: String },
}

impl EndpointError {
    /// Whether another attempt may succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            EndpointError::Transport { .. } => true,
            EndpointError::Status { status, .. } => *status == 408 || *status == 429 || *status >= 500,
            EndpointError::Decode { .. } => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    /// Delay before the second attempt; doubled for each further one.
    pub base_delay: Duration,
    /// Fraction of each delay randomized away, in `[0, 1]`.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 3, base_delay: Duration::from_secs(1), jitter: 0.5 }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        let full = self.base_delay.saturating_mul(1u32 << retry.min(16));
        let cut = rand::rng().random_range(0.0..=self.jitter.clamp(0.0, 1.0));
        full.mul_f64(1.0 - cut)
    }

    /// Runs `op` until it succeeds, fails permanently, or attempts run out.
    pub fn run<T, E>(&self, mut op: impl FnMut() -> Result<T, E>, transient: impl Fn(&E) -> bool) -> Result<T, E> {
        let mut attempt = 0;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if attempt + 1 < self.attempts.max(1) && transient(&e) => {
                    std::thread::sleep(self.delay(attempt));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// A base URL plus an optional bearer token.
#[derive(Clone)]
pub struct HttpClient {
    agent: ureq::Agent,
    base_url: String,
    api_key: Option<String>,
}

impl std::fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpClient").field("base_url", &self.base_url).finish_non_exhaustive()
    }
}

impl HttpClient {
    pub fn new(base_url: &str, api_key: Option<String>, timeout: Duration) -> Self {
        // No idle pool: a thread-per-connection server can park a new connection
        // behind idle ones until they close.
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .max_idle_connections(0)
            .build()
            .into();
        Self { agent, base_url: base_url.trim_end_matches('/').to_owned(), api_key: api_key.filter(|k| !k.is_empty()) }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base_url, path)
    }

    /// POSTs `body` as JSON and returns the raw response text on 2xx.
    pub fn post_text<B: Serialize>(&self, path: &str, body: &B) -> Result<String, EndpointError> {
        let url = self.url(path);
        let payload = serde_json::to_vec(body)
            .map_err(|e| EndpointError::Decode { url: url.clone(), message: e.to_string() })?;
        let mut req = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let transport = |e: ureq::Error| EndpointError::Transport { url: url.clone(), message: e.to_string() };
        let mut resp = req.send(&payload[..]).map_err(transport)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().with_config().limit(64 << 20).read_to_string().map_err(transport)?;
        if !(200..300).contains(&status) {
            let body = text.chars().take(500).collect();
            return Err(EndpointError::Status { url, status, body });
        }
        Ok(text)
    }

    pub fn post_json<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R, EndpointError> {
        let text = self.post_text(path, body)?;
        serde_json::from_str(&text).map_err(|e| EndpointError::Decode { url: self.url(path), message: e.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retries_only_transient_failures() {
        let policy = RetryPolicy { attempts: 3, base_delay: Duration::from_millis(1), jitter: 0.5 };
        let mut calls = 0;
        let r: Result<(), u16> = policy.run(
            || {
                calls += 1;
                Err(503)
            },
            |s| *s >= 500,
        );
        assert_eq!((r, calls), (Err(503), 3));
        let mut calls = 0;
        let r: Result<(), u16> = policy.run(
            || {
                calls += 1;
                Err(400)
            },
            |s| *s >= 500,
        );
        assert_eq!((r, calls), (Err(400), 1));
    }

    #[test]
    fn backoff_doubles_within_jitter() {
        let policy = RetryPolicy { attempts: 3, base_delay: Duration::from_millis(100), jitter: 0.5 };
        for retry in 0..3 {
            let d = policy.delay(retry).as_secs_f64();
            let full = 0.1 * (1 << retry) as f64;
            assert!(d <= full + 1e-9 && d >= full * 0.5 - 1e-9, "{d}");
        }
    }
}
