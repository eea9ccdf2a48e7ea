//! Clients for the annotation, embedding, scoring and generation endpoints.

pub mod annotator;
pub mod chat;
pub mod http;
pub mod infer;
pub mod mock;
pub mod services;
pub mod templates;
pub mod wire;
