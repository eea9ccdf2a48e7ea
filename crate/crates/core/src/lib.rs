//! Core of the step-wise SVG pipeline: document model, reconstruction into
//! ordered render steps, rasterization, dataset assembly and metrics.

pub mod annotation;
pub mod dataset;
pub mod geom;
pub mod metrics;
pub mod raster;
pub mod reconstruct;
pub mod scene;
pub mod svg;
