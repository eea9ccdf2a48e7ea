//! Stroke outlines as a union of convex pieces.
//!
//! Every piece is emitted with positive orientation, so filling all of them
//! together with the nonzero rule yields their union without having to
//! resolve overlaps between segments, joins and caps.

use std::f64::consts::TAU;

use super::flatten::Subpath;
use crate::geom::Point;
use crate::svg::{LineCap, LineJoin};

#[derive(Debug, Clone, Copy)]
pub struct StrokeStyle {
    pub width: f64,
    pub cap: LineCap,
    pub join: LineJoin,
    pub miter_limit: f64,
}

/// Polygons whose union is the stroke of `subpaths`. `tol` bounds the
/// chord error of round joins and caps, in the same units as the input.
pub fn stroke_polygons(subpaths: &[Subpath], style: &StrokeStyle, tol: f64) -> Vec<Vec<Point>> {
    let hw = style.width / 2.0;
    let mut out = Vec::new();
    if hw.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return out;
    }
    for sp in subpaths {
        stroke_subpath(sp, style, hw, tol, &mut out);
    }
    for poly in &mut out {
        if signed_area(poly) < 0.0 {
            poly.reverse();
        }
    }
    out.retain(|p| p.len() >= 3);
    out
}

fn signed_area(p: &[Point]) -> f64 {
    let n = p.len();
    (0..n).map(|i| p[i].cross(p[(i + 1) % n])).sum::<f64>() / 2.0
}

fn stroke_subpath(sp: &Subpath, style: &StrokeStyle, hw: f64, tol: f64, out: &mut Vec<Vec<Point>>) {
    // Drop repeated vertices; the segment direction there is undefined.
    let mut pts: Vec<Point> = Vec::with_capacity(sp.pts.len());
    let mut corner: Vec<bool> = Vec::with_capacity(sp.pts.len());
    for (p, c) in sp.pts.iter().zip(&sp.corner) {
        if pts.last().is_some_and(|q| (*q - *p).length() <= 1e-12) {
            let last = corner.len() - 1;
            corner[last] |= *c;
        } else {
            pts.push(*p);
            corner.push(*c);
        }
    }
    if sp.closed && pts.len() > 1 && (pts[0] - pts[pts.len() - 1]).length() <= 1e-12 {
        pts.pop();
        let c = corner.pop().unwrap_or(false);
        corner[0] |= c;
    }

    if pts.len() == 1 {
        // Zero-length subpath: only round and square caps paint a dot.
        let p = pts[0];
        match style.cap {
            LineCap::Butt => {}
            LineCap::Round => out.push(disc(p, hw, tol)),
            LineCap::Square => out.push(vec![
                Point::new(p.x - hw, p.y - hw),
                Point::new(p.x + hw, p.y - hw),
                Point::new(p.x + hw, p.y + hw),
                Point::new(p.x - hw, p.y + hw),
            ]),
        }
        return;
    }

    let n = pts.len();
    let seg_count = if sp.closed { n } else { n - 1 };
    let dir = |i: usize| (pts[(i + 1) % n] - pts[i]).normalized().expect("distinct vertices");
    for i in 0..seg_count {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let nrm = dir(i).perp().scale(hw);
        out.push(vec![a + nrm, b + nrm, b - nrm, a - nrm]);
    }

    let joins: Box<dyn Iterator<Item = usize>> = if sp.closed { Box::new(0..n) } else { Box::new(1..n - 1) };
    for i in joins {
        let d0 = dir((i + n - 1) % n);
        let d1 = dir(i);
        let join = if corner[i] { style.join } else { LineJoin::Miter };
        // Smooth vertices use a miter, which is nearly exact for the small
        // turning angles flattening produces.
        let limit = if corner[i] { style.miter_limit } else { 4.0f64.max(style.miter_limit) };
        add_join(pts[i], d0, d1, hw, join, limit, tol, out);
    }

    if !sp.closed {
        add_cap(pts[0], dir(0).scale(-1.0), hw, style.cap, tol, out);
        add_cap(pts[n - 1], dir(n - 2), hw, style.cap, tol, out);
    }
}

#[allow(clippy::too_many_arguments)]
fn add_join(p: Point, d0: Point, d1: Point, hw: f64, join: LineJoin, limit: f64, tol: f64, out: &mut Vec<Vec<Point>>) {
    let cross = d0.cross(d1);
    let dot = d0.dot(d1);
    if cross.abs() < 1e-12 && dot > 0.0 {
        return;
    }
    if join == LineJoin::Round {
        out.push(disc(p, hw, tol));
        return;
    }
    // The outer side of the turn is opposite to the turning direction.
    let sign = if cross > 0.0 { -1.0 } else { 1.0 };
    let o0 = d0.perp().scale(hw * sign);
    let o1 = d1.perp().scale(hw * sign);
    if join == LineJoin::Miter {
        let cos_half = ((1.0 + dot) / 2.0).max(0.0).sqrt();
        if cos_half > 0.0 && 1.0 / cos_half <= limit {
            if let Some(bis) = (o0 + o1).normalized() {
                let tip = p + bis.scale(hw / cos_half);
                out.push(vec![p, p + o0, tip, p + o1]);
                return;
            }
        }
    }
    out.push(vec![p, p + o0, p + o1]);
}

fn add_cap(p: Point, outward: Point, hw: f64, cap: LineCap, tol: f64, out: &mut Vec<Vec<Point>>) {
    match cap {
        LineCap::Butt => {}
        LineCap::Round => out.push(disc(p, hw, tol)),
        LineCap::Square => {
            let n = outward.perp().scale(hw);
            let e = outward.scale(hw);
            out.push(vec![p + n, p + n + e, p - n + e, p - n]);
        }
    }
}

fn disc(c: Point, r: f64, tol: f64) -> Vec<Point> {
    let step = if r <= tol { TAU / 8.0 } else { 2.0 * (1.0 - tol / r).acos() };
    let n = ((TAU / step).ceil() as usize).clamp(8, 1024);
    (0..n)
        .map(|i| {
            let (s, co) = (TAU * i as f64 / n as f64).sin_cos();
            Point::new(c.x + r * co, c.y + r * s)
        })
        .collect()
}
