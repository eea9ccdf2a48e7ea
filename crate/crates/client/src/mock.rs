//! Deterministic in-process stand-in for the chat, embedding and scoring
//! endpoints, for tests and offline dry runs.
//!
//! Replies depend only on request content. Chat requests whose last user
//! turn is a generation instruction get a thinking trace and an SVG built
//! from the color and shape words of the description; all other chat
//! requests are treated as annotation turns.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde_json::{json, Value};
use stepsvg_core::dataset::{instruction, sha256_hex};
use tiny_http::{Header, Method, Response, Server};

use crate::chat::{CHAT_COMPLETIONS_PATH, DESCRIBE_PATH};
use crate::wire::{ChatRequest, DescribeRequest, EmbedImageRequest, EmbedTextRequest, ScoreRequest, WireMessage};

/// Most images `/describe` accepts in one request.
pub const DESCRIBE_IMAGE_LIMIT: usize = 3;
pub const EMBED_DIM: usize = 16;
const WORKERS: usize = 4;

const COLORS: [&str; 8] = ["red", "green", "blue", "black", "orange", "purple", "yellow", "gray"];
const SHAPES: [&str; 3] = ["circle", "square", "triangle"];

#[derive(Debug, Clone, Default)]
pub struct MockConfig {
    /// Fixed t_g reply; otherwise derived from the image.
    pub global_text: Option<String>,
    /// Chat requests answered with 503 before normal service.
    pub fail_first: usize,
    /// Chat requests answered with empty content after the failures.
    pub empty_first: usize,
    /// Keeps a copy of every request body.
    pub capture: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapturedRequest {
    pub path: String,
    pub body: Value,
}

struct State {
    config: MockConfig,
    chat_calls: AtomicUsize,
    captured: Mutex<Vec<CapturedRequest>>,
}

pub struct MockServer {
    server: Arc<Server>,
    state: Arc<State>,
    addr: SocketAddr,
    stopping: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
}

impl MockServer {
    /// Binds an ephemeral local port.
    pub fn start(config: MockConfig) -> std::io::Result<Self> {
        Self::bind("127.0.0.1:0", config)
    }

    pub fn bind(addr: &str, config: MockConfig) -> std::io::Result<Self> {
        let server = Arc::new(Server::http(addr).map_err(|e| std::io::Error::other(e.to_string()))?);
        let addr = server.server_addr().to_ip().ok_or_else(|| std::io::Error::other("not an IP listener"))?;
        let state = Arc::new(State { config, chat_calls: AtomicUsize::new(0), captured: Mutex::new(Vec::new()) });
        let stopping = Arc::new(AtomicBool::new(false));
        let workers = (0..WORKERS)
            .map(|_| {
                let (server, state, stopping) = (server.clone(), state.clone(), stopping.clone());
                std::thread::spawn(move || {
                    while !stopping.load(Ordering::SeqCst) {
                        match server.recv() {
                            Ok(req) => handle(&state, req),
                            Err(_) => break,
                        }
                    }
                })
            })
            .collect();
        Ok(Self { server, state, addr, stopping, workers })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> Vec<CapturedRequest> {
        self.state.captured.lock().expect("capture lock").clone()
    }

    pub fn chat_calls(&self) -> usize {
        self.state.chat_calls.load(Ordering::SeqCst)
    }

    /// Serves until the process exits.
    pub fn wait(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stopping.store(true, Ordering::SeqCst);
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn handle(state: &State, mut req: tiny_http::Request) {
    let path = req.url().split('?').next().unwrap_or("").to_owned();
    let mut body = String::new();
    let (status, content_type, text) = if *req.method() != Method::Post {
        (405, "text/plain", "POST only".to_owned())
    } else if req.as_reader().read_to_string(&mut body).is_err() {
        (400, "text/plain", "unreadable body".to_owned())
    } else {
        if state.config.capture {
            let value = serde_json::from_str(&body).unwrap_or(Value::String(body.clone()));
            state.captured.lock().expect("capture lock").push(CapturedRequest { path: path.clone(), body: value });
        }
        route(state, &path, &body)
    };
    let header = Header::from_bytes("Content-Type", content_type).expect("static header");
    let _ = req.respond(Response::from_string(text).with_status_code(status).with_header(header));
}

type Reply = (u16, &'static str, String);

fn bad_request(msg: impl std::fmt::Display) -> Reply {
    (400, "text/plain", msg.to_string())
}

fn route(state: &State, path: &str, body: &str) -> Reply {
    match path {
        CHAT_COMPLETIONS_PATH | DESCRIBE_PATH => {
            let messages = if path == DESCRIBE_PATH {
                serde_json::from_str::<DescribeRequest>(body).map(|r| r.messages)
            } else {
                serde_json::from_str::<ChatRequest>(body).map(|r| r.messages)
            };
            let messages = match messages {
                Ok(m) => m,
                Err(e) => return bad_request(e),
            };
            let images: usize = messages.iter().map(|m| m.content.image_count()).sum();
            if path == DESCRIBE_PATH && images > DESCRIBE_IMAGE_LIMIT {
                return (400, "text/plain", format!("{images} images exceed the limit of {DESCRIBE_IMAGE_LIMIT}"));
            }
            let call = state.chat_calls.fetch_add(1, Ordering::SeqCst);
            let cfg = &state.config;
            let content = if call < cfg.fail_first {
                return (503, "text/plain", "temporarily unavailable".to_owned());
            } else if call < cfg.fail_first + cfg.empty_first {
                String::new()
            } else {
                chat_reply(cfg, &messages)
            };
            if path == DESCRIBE_PATH {
                (200, "text/plain", content)
            } else {
                let v = json!({
                    "id": format!("mock-{call}"),
                    "object": "chat.completion",
                    "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
                });
                (200, "application/json", v.to_string())
            }
        }
        "/embed/image" => match serde_json::from_str::<EmbedImageRequest>(body) {
            Ok(r) => embed_reply(&r.image),
            Err(e) => bad_request(e),
        },
        "/embed/text" => match serde_json::from_str::<EmbedTextRequest>(body) {
            Ok(r) => embed_reply(&r.text),
            Err(e) => bad_request(e),
        },
        "/score" => match serde_json::from_str::<ScoreRequest>(body) {
            Ok(r) => {
                let nlls = token_nlls(&r.text);
                (200, "application/json", json!({"token_count": nlls.len(), "token_nlls": nlls}).to_string())
            }
            Err(e) => bad_request(e),
        },
        _ => (404, "text/plain", format!("no route {path}")),
    }
}

fn hash_u64(text: &str) -> u64 {
    u64::from_str_radix(&sha256_hex(text)[..16], 16).expect("hex digest")
}

/// Unit vectors sharing a dominant first component, so any two have cosine
/// above one half.
pub fn mock_embedding(input: &str) -> Vec<f64> {
    let digest = sha256_hex(input);
    let mut v = vec![1.0];
    v.extend((1..EMBED_DIM).map(|j| {
        let h = hash_u64(&format!("{j}:{digest}"));
        ((h % 2001) as f64 - 1000.0) / 1000.0 * 0.15
    }));
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

fn embed_reply(input: &str) -> Reply {
    let v = mock_embedding(input);
    (200, "application/json", json!({"vector": v, "d": EMBED_DIM, "model_tag": "mock-embed"}).to_string())
}

/// Per-token NLLs in [0.5, 2.5] for whitespace tokens.
pub fn token_nlls(text: &str) -> Vec<f64> {
    text.split_whitespace().map(|t| 0.5 + (hash_u64(t) % 1001) as f64 / 500.0).collect()
}

fn image_urls(m: &WireMessage) -> Vec<String> {
    match &m.content {
        crate::wire::Content::Parts(parts) => parts
            .iter()
            .filter_map(|p| match p {
                crate::wire::ContentPart::ImageUrl { image_url } => Some(image_url.url.clone()),
                _ => None,
            })
            .collect(),
        crate::wire::Content::Text(_) => Vec::new(),
    }
}

fn global_text(cfg: &MockConfig, image: &str) -> String {
    cfg.global_text.clone().unwrap_or_else(|| {
        let h = hash_u64(image);
        let color = COLORS[(h % COLORS.len() as u64) as usize];
        let shape = SHAPES[((h >> 8) % SHAPES.len() as u64) as usize];
        format!("A flat {color} {shape} icon on a white background, variant {}", h % 1000)
    })
}

fn chat_reply(cfg: &MockConfig, messages: &[WireMessage]) -> String {
    let Some(last) = messages.iter().rev().find(|m| m.role == "user") else {
        return "no user turn".to_owned();
    };
    let prefix = instruction("");
    let last_text = last.content.text();
    if let Some(description) = last_text.strip_prefix(&prefix) {
        return generation(description);
    }
    let images = image_urls(last);
    let answered = messages.iter().filter(|m| m.role == "assistant").count();
    match images.len() {
        0 => "No image was attached.".to_owned(),
        1 if answered == 0 && messages.len() <= 2 => global_text(cfg, &images[0]),
        n => {
            let finished = &images[n - 1];
            let expected = global_text(cfg, finished);
            let earlier = &messages[..messages.len() - 1];
            let has_global = earlier.iter().any(|m| m.content.text().contains(&expected));
            let h = hash_u64(&images[0]) % 1000;
            format!(
                "Step {} adds shape {h} (images={n}, global={}).",
                answered + 1,
                if has_global { "yes" } else { "no" }
            )
        }
    }
}

fn first_word<'a>(text: &str, words: &[&'a str], default: &'a str) -> &'a str {
    text.split(|c: char| !c.is_alphanumeric())
        .map(str::to_lowercase)
        .find_map(|w| words.iter().find(|&&c| c == w).copied())
        .unwrap_or(default)
}

/// Reply to a generation instruction: a light background followed by one
/// shape, so changing the color word changes only the second step.
pub fn generation(description: &str) -> String {
    let color = first_word(description, &COLORS, "black");
    let shape = first_word(description, &SHAPES, "circle");
    let element = match shape {
        "square" => format!(r#"<rect x="16" y="16" width="32" height="32" fill="{color}"/>"#),
        "triangle" => format!(r#"<path d="M32 12L52 52H12Z" fill="{color}"/>"#),
        _ => format!(r#"<circle cx="32" cy="32" r="18" fill="{color}"/>"#),
    };
    format!(
        "<think>\nStep 1: fill the canvas with a light gray background\nStep 2: draw a {color} {shape} in the center\n</think>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 64 64\"><rect width=\"64\" height=\"64\" fill=\"#eeeeee\"/>{element}</svg>"
    )
}
