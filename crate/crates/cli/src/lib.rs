//! Pipeline driver: configuration, stage manifests and the stages that turn
//! an SVG corpus into a step-annotated chat dataset.

pub mod config;
pub mod manifest;
pub mod stages;
