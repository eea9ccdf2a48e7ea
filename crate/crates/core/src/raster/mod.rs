//! Deterministic software rasterizer for the supported SVG subset.
//!
//! Coverage comes from 4×4 point sampling per pixel. Each element is
//! rendered into a private premultiplied accumulation (fill, then stroke,
//! then element opacity and clip) and composited onto the 8-bit canvas once,
//! so pixels outside an element's coverage are never touched. That makes
//! painting step `i` onto a copy of frame `i-1` identical to replaying steps
//! `1..=i` on a fresh canvas.

mod flatten;
mod image;
mod paint;
mod scan;
mod stroke;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use flatten::{outline, Subpath};
pub use image::{CoverageMask, RasterImage};
pub use scan::{PixelRect, SampleMask};
pub use stroke::{stroke_polygons, StrokeStyle};

use crate::geom::{BBox, Point, Transform};
use crate::reconstruct::StepSequence;
use crate::scene::{walk, ClipInstance, SceneError, SceneEvent};
use crate::svg::{ClipPath, Gradient, SvgDocument, SvgNode, ViewBox};
use flatten::{fills_interior, local_tolerance};
use paint::{PaintSource, Premul};
use scan::{bbox_of, rasterize, SAMPLES};

pub const DEFAULT_SIZE: u32 = 512;
pub const MIN_SIZE: u32 = 16;
/// Maximum chord deviation of flattened curves, in device pixels.
pub const FLATTEN_TOLERANCE: f64 = 0.05;
/// Per-channel difference still counted as agreement.
pub const AGREEMENT_TOLERANCE: u8 = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RasterError {
    #[error("viewBox has zero area")]
    DegenerateViewBox,
    #[error("canvas size {0} is below the minimum of {MIN_SIZE}")]
    InvalidSize(u32),
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("png: {0}")]
    Png(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Paint servers and clip paths that elements may reference.
#[derive(Clone, Copy)]
pub struct Resources<'a> {
    pub gradients: &'a BTreeMap<String, Gradient>,
    pub clip_paths: &'a BTreeMap<String, ClipPath>,
}

impl<'a> Resources<'a> {
    pub fn of(doc: &'a SvgDocument) -> Self {
        Self { gradients: &doc.gradients, clip_paths: &doc.clip_paths }
    }
}

/// Maps the viewBox onto a `size`×`size` canvas, preserving aspect ratio
/// and centering the letterboxed result.
pub fn viewport_transform(vb: &ViewBox, size: u32) -> Result<Transform, RasterError> {
    let ok = |v: f64| v.is_finite() && v > 0.0;
    if !ok(vb.width) || !ok(vb.height) || !vb.x.is_finite() || !vb.y.is_finite() {
        return Err(RasterError::DegenerateViewBox);
    }
    if size < MIN_SIZE {
        return Err(RasterError::InvalidSize(size));
    }
    let s = size as f64;
    let k = (s / vb.width).min(s / vb.height);
    let tx = (s - vb.width * k) / 2.0 - vb.x * k;
    let ty = (s - vb.height * k) / 2.0 - vb.y * k;
    Ok(Transform::new(k, 0.0, 0.0, k, tx, ty))
}

/// Paints one primitive onto `target` and returns the pixels it touched.
///
/// `ctm` maps the element's coordinates (including its own transform) to
/// the viewBox space; `viewport` maps that onto the canvas.
pub fn paint_element(
    target: &mut RasterImage,
    viewport: &Transform,
    res: Resources,
    node: &SvgNode,
    ctm: &Transform,
    clips: &[ClipInstance],
) -> CoverageMask {
    let style = &node.style;
    let to_dev = viewport.then_inner(ctm);
    let tol = local_tolerance(&to_dev, FLATTEN_TOLERANCE);
    let subs = outline(&node.kind, tol);
    if subs.is_empty() || !style.visible {
        return CoverageMask::empty();
    }
    let canvas = PixelRect { x0: 0, y0: 0, x1: target.width, y1: target.height };
    let device = |polys: Vec<Vec<Point>>| -> Vec<Vec<Point>> {
        polys.into_iter().map(|p| p.into_iter().map(|q| to_dev.apply(q)).collect()).collect()
    };

    let fill_polys = if !style.fill.is_none() && fills_interior(&node.kind) {
        device(subs.iter().map(|s| s.pts.clone()).collect())
    } else {
        Vec::new()
    };
    let stroke_polys = if style.has_visible_stroke() {
        let st = StrokeStyle {
            width: style.stroke_width,
            cap: style.stroke_linecap,
            join: style.stroke_linejoin,
            miter_limit: style.stroke_miterlimit,
        };
        device(stroke_polygons(&subs, &st, tol))
    } else {
        Vec::new()
    };
    let rect = PixelRect::covering(&bbox_of(&fill_polys), canvas.x1, canvas.y1)
        .union(&PixelRect::covering(&bbox_of(&stroke_polys), canvas.x1, canvas.y1));
    if rect.is_empty() {
        return CoverageMask::empty();
    }

    let mut clip_mask: Option<SampleMask> = None;
    for inst in clips {
        let m = clip_mask_for(inst, viewport, res, rect);
        match &mut clip_mask {
            None => clip_mask = Some(m),
            Some(acc) => acc.and_assign(&m),
        }
    }

    let geometry_bbox: BBox = subs.iter().flat_map(|s| s.pts.iter().copied()).collect();
    let fill_src = PaintSource::new(&style.fill, style.fill_opacity, res.gradients, &geometry_bbox, &to_dev);
    let stroke_src = PaintSource::new(&style.stroke, style.stroke_opacity, res.gradients, &geometry_bbox, &to_dev);
    let fill = (!fill_src.is_none()).then(|| rasterize(&fill_polys, style.fill_rule, rect));
    let stroke = (!stroke_src.is_none()).then(|| rasterize(&stroke_polys, crate::svg::FillRule::NonZero, rect));
    let opacity = style.opacity as f32;

    let mut coverage = CoverageMask::new(rect.x0, rect.y0, rect.width(), rect.height());
    for y in rect.y0..rect.y1 {
        for x in rect.x0..rect.x1 {
            let clip_bits = clip_mask.as_ref().map_or(u16::MAX, |m| m.at(x, y));
            let fb = fill.as_ref().map_or(0, |m| m.at(x, y)) & clip_bits;
            let sb = stroke.as_ref().map_or(0, |m| m.at(x, y)) & clip_bits;
            if fb == 0 && sb == 0 {
                continue;
            }
            coverage.set(x, y);
            let center = Point::new(x as f64 + 0.5, y as f64 + 0.5);
            let mut acc: Premul = [0.0; 4];
            if fb != 0 {
                let c = fill_src.at(center);
                let k = fb.count_ones() as f32 / SAMPLES as f32;
                acc = c.map(|v| v * k);
            }
            if sb != 0 {
                let c = stroke_src.at(center);
                let k = sb.count_ones() as f32 / SAMPLES as f32;
                let ia = 1.0 - c[3] * k;
                acc = [0, 1, 2, 3].map(|i| c[i] * k + acc[i] * ia);
            }
            if opacity < 1.0 {
                acc = acc.map(|v| v * opacity);
            }
            composite(target, x, y, acc);
        }
    }
    coverage
}

/// Source-over of a premultiplied color onto one pixel. A fully
/// transparent source leaves the pixel bit-for-bit unchanged.
fn composite(target: &mut RasterImage, x: u32, y: u32, src: Premul) {
    if src == [0.0; 4] {
        return;
    }
    let i = (y as usize * target.width as usize + x as usize) * 4;
    let px = &mut target.pixels[i..i + 4];
    let ia = 1.0 - src[3];
    for c in 0..4 {
        let v = src[c] * 255.0 + px[c] as f32 * ia;
        px[c] = v.round().clamp(0.0, 255.0) as u8;
    }
}

fn clip_mask_for(inst: &ClipInstance, viewport: &Transform, res: Resources, rect: PixelRect) -> SampleMask {
    let mut mask = SampleMask::empty(rect);
    let Some(clip) = res.clip_paths.get(&inst.clip_id) else { return mask };
    let base = viewport.then_inner(&inst.ctm).then_inner(&clip.transform);
    for child in &clip.children {
        if !child.kind.is_primitive() || !child.style.visible {
            continue;
        }
        let to_dev = base.then_inner(&child.transform);
        let tol = local_tolerance(&to_dev, FLATTEN_TOLERANCE);
        let polys: Vec<Vec<Point>> = outline(&child.kind, tol)
            .into_iter()
            .map(|s| s.pts.into_iter().map(|p| to_dev.apply(p)).collect())
            .collect();
        mask.or_assign(&rasterize(&polys, child.style.clip_rule, rect));
    }
    mask
}

/// Renders a document over an opaque white `size`×`size` canvas.
pub fn render_document(doc: &SvgDocument, size: u32) -> Result<RasterImage, RasterError> {
    let viewport = viewport_transform(&doc.view_box, size)?;
    let res = Resources::of(doc);
    let mut stack: Vec<(RasterImage, f64)> = vec![(RasterImage::white(size, size), 1.0)];
    walk(doc, |event| match event {
        SceneEvent::PushLayer(o) => stack.push((RasterImage::transparent(size, size), o)),
        SceneEvent::Leaf(leaf) => {
            let target = &mut stack.last_mut().expect("base layer").0;
            paint_element(target, &viewport, res, &leaf.node, &leaf.ctm, &leaf.clips);
        }
        SceneEvent::PopLayer => {
            let (layer, o) = stack.pop().expect("pushed layer");
            let target = &mut stack.last_mut().expect("base layer").0;
            composite_layer(target, &layer, o as f32);
        }
    })?;
    Ok(stack.pop().expect("base layer").0)
}

fn composite_layer(target: &mut RasterImage, layer: &RasterImage, opacity: f32) {
    for y in 0..layer.height {
        for x in 0..layer.width {
            let p = layer.pixel(x, y);
            if p == [0; 4] {
                continue;
            }
            let src = p.map(|v| v as f32 / 255.0 * opacity);
            composite(target, x, y, src);
        }
    }
}

/// Paints one step of a sequence onto `target`.
pub fn paint_step(target: &mut RasterImage, viewport: &Transform, seq: &StepSequence, index: usize) -> CoverageMask {
    let step = &seq.steps[index];
    let node = &step.primitive;
    let clips: Vec<ClipInstance> = node
        .clip_path
        .iter()
        .map(|id| ClipInstance { clip_id: id.clone(), ctm: node.transform })
        .collect();
    paint_element(target, viewport, seq.resources(), node, &node.transform, &clips)
}

/// Frames I₁…Iₙ, where Iᵢ shows steps 1..=i, each with the coverage mask
/// of step i. Each frame is step i painted onto a copy of the previous one.
pub fn render_prefixes_with_masks(seq: &StepSequence, size: u32) -> Result<Vec<(RasterImage, CoverageMask)>, RasterError> {
    let viewport = viewport_transform(&seq.view_box, size)?;
    let mut out: Vec<(RasterImage, CoverageMask)> = Vec::with_capacity(seq.steps.len());
    let mut canvas = RasterImage::white(size, size);
    for i in 0..seq.steps.len() {
        let mask = paint_step(&mut canvas, &viewport, seq, i);
        out.push((canvas.clone(), mask));
    }
    Ok(out)
}

pub fn render_prefixes(seq: &StepSequence, size: u32) -> Result<Vec<RasterImage>, RasterError> {
    Ok(render_prefixes_with_masks(seq, size)?.into_iter().map(|(img, _)| img).collect())
}

/// Renders the first `count` steps on a fresh canvas.
pub fn render_prefix(seq: &StepSequence, count: usize, size: u32) -> Result<RasterImage, RasterError> {
    let viewport = viewport_transform(&seq.view_box, size)?;
    let mut canvas = RasterImage::white(size, size);
    for i in 0..count.min(seq.steps.len()) {
        paint_step(&mut canvas, &viewport, seq, i);
    }
    Ok(canvas)
}

/// Renders a subset of steps, given by position, on a fresh canvas.
pub fn render_steps(seq: &StepSequence, positions: &[usize], size: u32) -> Result<RasterImage, RasterError> {
    let viewport = viewport_transform(&seq.view_box, size)?;
    let mut canvas = RasterImage::white(size, size);
    for &i in positions {
        paint_step(&mut canvas, &viewport, seq, i);
    }
    Ok(canvas)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiff {
    pub step_index: usize,
    pub changed_pixels: u64,
    pub changed_bbox: Option<PixelBox>,
    pub coverage_mask: Option<CoverageMask>,
    /// Changed pixels lying outside `coverage_mask`; zero when painting is
    /// local to the step.
    #[serde(default)]
    pub changed_outside_mask: u64,
}

/// Exact per-pixel comparison of two frames.
pub fn diff_images(a: &RasterImage, b: &RasterImage, mask: Option<&CoverageMask>) -> Result<StepDiff, RasterError> {
    check_dims(a, b)?;
    let mut changed = 0u64;
    let mut outside = 0u64;
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
    for y in 0..a.height {
        for x in 0..a.width {
            if a.pixel(x, y) != b.pixel(x, y) {
                changed += 1;
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
                if mask.is_some_and(|m| !m.contains(x, y)) {
                    outside += 1;
                }
            }
        }
    }
    let bbox = (changed > 0).then(|| PixelBox { x: x0, y: y0, width: x1 - x0 + 1, height: y1 - y0 + 1 });
    Ok(StepDiff {
        step_index: 0,
        changed_pixels: changed,
        changed_bbox: bbox,
        coverage_mask: mask.cloned(),
        changed_outside_mask: outside,
    })
}

/// Fraction of pixels whose largest channel difference is within
/// [`AGREEMENT_TOLERANCE`].
pub fn pixel_agreement(a: &RasterImage, b: &RasterImage) -> Result<f64, RasterError> {
    check_dims(a, b)?;
    let total = a.width as usize * a.height as usize;
    if total == 0 {
        return Ok(1.0);
    }
    let agree = a
        .pixels
        .chunks_exact(4)
        .zip(b.pixels.chunks_exact(4))
        .filter(|(p, q)| p.iter().zip(q.iter()).all(|(u, v)| u.abs_diff(*v) <= AGREEMENT_TOLERANCE))
        .count();
    Ok(agree as f64 / total as f64)
}

fn check_dims(a: &RasterImage, b: &RasterImage) -> Result<(), RasterError> {
    if a.width != b.width || a.height != b.height {
        return Err(RasterError::DimensionMismatch(a.width, a.height, b.width, b.height));
    }
    Ok(())
}
