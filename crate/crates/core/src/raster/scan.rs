//! Scan conversion onto a 4×4 grid of sample points per pixel.
//!
//! Sample `(sx, sy)` of pixel `(px, py)` sits at `(px + (sx + 0.5) / 4,
//! py + (sy + 0.5) / 4)`. A sample is inside when the winding number of the
//! polygons around it passes the fill rule. Edges are half-open in y, so
//! samples on shared edges are counted exactly once.

use crate::geom::{BBox, Point};
use crate::svg::FillRule;

pub const SAMPLES: u32 = 16;
const SUB: i64 = 4;

/// Integer pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelRect {
    pub const EMPTY: PixelRect = PixelRect { x0: 0, y0: 0, x1: 0, y1: 0 };

    /// Pixels that can contain a sample inside `b`, clipped to the canvas.
    pub fn covering(b: &BBox, width: u32, height: u32) -> PixelRect {
        if b.is_empty() || !(b.min.x.is_finite() && b.min.y.is_finite() && b.max.x.is_finite() && b.max.y.is_finite()) {
            return PixelRect::EMPTY;
        }
        let clamp = |v: f64, hi: u32| v.clamp(0.0, hi as f64) as u32;
        let r = PixelRect {
            x0: clamp(b.min.x.floor(), width),
            y0: clamp(b.min.y.floor(), height),
            x1: clamp(b.max.x.ceil(), width),
            y1: clamp(b.max.y.ceil(), height),
        };
        if r.is_empty() {
            PixelRect::EMPTY
        } else {
            r
        }
    }

    pub fn is_empty(&self) -> bool {
        self.x1 <= self.x0 || self.y1 <= self.y0
    }

    pub fn width(&self) -> u32 {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> u32 {
        self.y1.saturating_sub(self.y0)
    }

    pub fn union(&self, o: &PixelRect) -> PixelRect {
        if self.is_empty() {
            return *o;
        }
        if o.is_empty() {
            return *self;
        }
        PixelRect { x0: self.x0.min(o.x0), y0: self.y0.min(o.y0), x1: self.x1.max(o.x1), y1: self.y1.max(o.y1) }
    }

    pub fn intersect(&self, o: &PixelRect) -> PixelRect {
        let r = PixelRect { x0: self.x0.max(o.x0), y0: self.y0.max(o.y0), x1: self.x1.min(o.x1), y1: self.y1.min(o.y1) };
        if r.is_empty() {
            PixelRect::EMPTY
        } else {
            r
        }
    }
}

/// Per-pixel sample bits over a rectangle: bit `sy * 4 + sx`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleMask {
    pub rect: PixelRect,
    pub bits: Vec<u16>,
}

impl SampleMask {
    pub fn empty(rect: PixelRect) -> Self {
        Self { rect, bits: vec![0; rect.width() as usize * rect.height() as usize] }
    }

    pub fn full(rect: PixelRect) -> Self {
        Self { rect, bits: vec![u16::MAX; rect.width() as usize * rect.height() as usize] }
    }

    /// Bits of canvas pixel `(x, y)`, zero outside the rectangle.
    pub fn at(&self, x: u32, y: u32) -> u16 {
        let r = &self.rect;
        if x < r.x0 || y < r.y0 || x >= r.x1 || y >= r.y1 {
            return 0;
        }
        self.bits[(y - r.y0) as usize * r.width() as usize + (x - r.x0) as usize]
    }

    pub fn or_assign(&mut self, other: &SampleMask) {
        debug_assert_eq!(self.rect, other.rect);
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }

    pub fn and_assign(&mut self, other: &SampleMask) {
        debug_assert_eq!(self.rect, other.rect);
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a &= b;
        }
    }
}

pub fn bbox_of(polys: &[Vec<Point>]) -> BBox {
    polys.iter().flatten().copied().collect()
}

struct Edge {
    y_top: f64,
    y_bot: f64,
    x_top: f64,
    dxdy: f64,
    dir: i32,
}

/// Rasterizes closed polygons (device coordinates) into the samples of
/// `rect`.
pub fn rasterize(polys: &[Vec<Point>], rule: FillRule, rect: PixelRect) -> SampleMask {
    let mut mask = SampleMask::empty(rect);
    if rect.is_empty() {
        return mask;
    }
    let mut edges = Vec::new();
    for poly in polys {
        let n = poly.len();
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            if a.y == b.y || !(a.x.is_finite() && a.y.is_finite() && b.x.is_finite() && b.y.is_finite()) {
                continue;
            }
            let (top, bot, dir) = if a.y < b.y { (a, b, 1) } else { (b, a, -1) };
            edges.push(Edge { y_top: top.y, y_bot: bot.y, x_top: top.x, dxdy: (bot.x - top.x) / (bot.y - top.y), dir });
        }
    }
    if edges.is_empty() {
        return mask;
    }
    edges.sort_by(|a, b| a.y_top.total_cmp(&b.y_top));

    let row_w = rect.width() as usize;
    let col_lo = rect.x0 as i64 * SUB;
    let col_hi = rect.x1 as i64 * SUB;
    let mut next = 0;
    let mut active: Vec<usize> = Vec::new();
    let mut crossings: Vec<(f64, i32)> = Vec::new();
    for srow in rect.y0 as i64 * SUB..rect.y1 as i64 * SUB {
        let y = (srow as f64 + 0.5) / SUB as f64;
        while next < edges.len() && edges[next].y_top <= y {
            active.push(next);
            next += 1;
        }
        active.retain(|&i| edges[i].y_bot > y);
        if active.is_empty() {
            if next == edges.len() {
                break;
            }
            continue;
        }
        crossings.clear();
        for &i in &active {
            let e = &edges[i];
            if e.y_top <= y {
                crossings.push((e.x_top + (y - e.y_top) * e.dxdy, e.dir));
            }
        }
        crossings.sort_by(|a, b| a.0.total_cmp(&b.0));

        let py = (srow / SUB) as u32;
        let sub_row = (srow % SUB) as u32;
        let row = &mut mask.bits[(py - rect.y0) as usize * row_w..][..row_w];
        let mut winding = 0;
        for k in 0..crossings.len().saturating_sub(1) {
            winding += crossings[k].1;
            let inside = match rule {
                FillRule::NonZero => winding != 0,
                FillRule::EvenOdd => winding % 2 != 0,
            };
            if !inside {
                continue;
            }
            let c0 = ((SUB as f64 * crossings[k].0 - 0.5).ceil() as i64).max(col_lo);
            let c1 = ((SUB as f64 * crossings[k + 1].0 - 0.5).ceil() as i64).min(col_hi);
            if c0 < c1 {
                fill_span(row, rect.x0 as i64, c0, c1, sub_row);
            }
        }
    }
    mask
}

/// Sets sample columns `[c0, c1)` of one sub-row.
fn fill_span(row: &mut [u16], x0: i64, c0: i64, c1: i64, sub_row: u32) {
    let shift = sub_row * 4;
    let (p0, p1) = (c0.div_euclid(SUB), (c1 - 1).div_euclid(SUB));
    let nibble = |lo: i64, hi: i64| -> u16 { ((1u16 << (hi - lo)) - 1) << lo };
    if p0 == p1 {
        row[(p0 - x0) as usize] |= nibble(c0 - p0 * SUB, c1 - p0 * SUB) << shift;
        return;
    }
    row[(p0 - x0) as usize] |= nibble(c0 - p0 * SUB, SUB) << shift;
    for p in p0 + 1..p1 {
        row[(p - x0) as usize] |= 0xF << shift;
    }
    row[(p1 - x0) as usize] |= nibble(0, c1 - p1 * SUB) << shift;
}
