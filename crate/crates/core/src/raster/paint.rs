//! Solid and gradient paint evaluated at device pixel centers.

use std::collections::BTreeMap;

use crate::geom::{BBox, Point, Transform};
use crate::svg::{Gradient, GradientShape, Paint, SpreadMethod, Units};

/// Premultiplied RGBA in `[0, 1]`.
pub type Premul = [f32; 4];

pub enum PaintSource {
    None,
    Solid(Premul),
    Gradient(GradientSource),
}

pub struct GradientSource {
    /// Device space to gradient space.
    inverse: Transform,
    shape: GradientShape,
    spread: SpreadMethod,
    /// Offset and straight-alpha color with opacity already applied.
    stops: Vec<(f64, [f64; 4])>,
}

impl PaintSource {
    /// Prepares `paint` for an element whose geometry has bounding box
    /// `bbox` in local space, drawn through `to_device`, at `opacity`.
    pub fn new(
        paint: &Paint,
        opacity: f64,
        gradients: &BTreeMap<String, Gradient>,
        bbox: &BBox,
        to_device: &Transform,
    ) -> PaintSource {
        match paint {
            Paint::None => PaintSource::None,
            Paint::Color(c) => {
                let a = c.a as f64 / 255.0 * opacity;
                PaintSource::Solid(premul([c.r as f64 / 255.0, c.g as f64 / 255.0, c.b as f64 / 255.0, a]))
            }
            Paint::Server(id) => match gradients.get(id) {
                Some(g) => gradient(g, opacity, bbox, to_device),
                None => PaintSource::None,
            },
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, PaintSource::None)
    }

    /// Color at device point `p`.
    pub fn at(&self, p: Point) -> Premul {
        match self {
            PaintSource::None => [0.0; 4],
            PaintSource::Solid(c) => *c,
            PaintSource::Gradient(g) => g.at(p),
        }
    }
}

fn premul(c: [f64; 4]) -> Premul {
    let a = c[3].clamp(0.0, 1.0);
    [(c[0] * a) as f32, (c[1] * a) as f32, (c[2] * a) as f32, a as f32]
}

fn gradient(g: &Gradient, opacity: f64, bbox: &BBox, to_device: &Transform) -> PaintSource {
    let stops: Vec<(f64, [f64; 4])> = g
        .stops
        .iter()
        .map(|s| {
            let c = s.color;
            (s.offset, [c.r as f64 / 255.0, c.g as f64 / 255.0, c.b as f64 / 255.0, s.opacity * opacity])
        })
        .collect();
    match stops.len() {
        0 => return PaintSource::None,
        1 => return PaintSource::Solid(premul(stops[0].1)),
        _ => {}
    }
    let units = match g.units {
        Units::UserSpaceOnUse => Transform::IDENTITY,
        Units::ObjectBoundingBox => {
            if bbox.is_empty() || bbox.width() <= 0.0 || bbox.height() <= 0.0 {
                // A bounding-box gradient on a zero-area shape paints nothing.
                return PaintSource::None;
            }
            Transform::new(bbox.width(), 0.0, 0.0, bbox.height(), bbox.min.x, bbox.min.y)
        }
    };
    let last = stops[stops.len() - 1].1;
    let degenerate = match g.shape {
        GradientShape::Linear { x1, y1, x2, y2 } => x1 == x2 && y1 == y2,
        GradientShape::Radial { r, .. } => r <= 0.0,
    };
    if degenerate {
        return PaintSource::Solid(premul(last));
    }
    let full = to_device.then_inner(&units).then_inner(&g.transform);
    let Some(inverse) = full.invert() else { return PaintSource::None };
    let shape = match g.shape {
        GradientShape::Radial { cx, cy, r, fx, fy } => {
            // Keep the focal point strictly inside the circle.
            let (dx, dy) = (fx - cx, fy - cy);
            let d = dx.hypot(dy);
            let max = r * 0.999;
            let (fx, fy) = if d > max { (cx + dx * max / d, cy + dy * max / d) } else { (fx, fy) };
            GradientShape::Radial { cx, cy, r, fx, fy }
        }
        s => s,
    };
    PaintSource::Gradient(GradientSource { inverse, shape, spread: g.spread, stops })
}

impl GradientSource {
    fn at(&self, p: Point) -> Premul {
        let q = self.inverse.apply(p);
        let t = match self.shape {
            GradientShape::Linear { x1, y1, x2, y2 } => {
                let d = Point::new(x2 - x1, y2 - y1);
                (q - Point::new(x1, y1)).dot(d) / d.dot(d)
            }
            GradientShape::Radial { cx, cy, r, fx, fy } => {
                let f = Point::new(fx, fy);
                let d = q - f;
                let dd = d.dot(d);
                if dd == 0.0 {
                    0.0
                } else {
                    // Ray from the focus through q meets the circle at f + s·d.
                    let cf = f - Point::new(cx, cy);
                    let b = cf.dot(d);
                    let c = cf.dot(cf) - r * r;
                    let s = (-b + (b * b - dd * c).max(0.0).sqrt()) / dd;
                    if s > 0.0 {
                        1.0 / s
                    } else {
                        1.0
                    }
                }
            }
        };
        premul(self.color(spread(t, self.spread)))
    }

    fn color(&self, t: f64) -> [f64; 4] {
        let stops = &self.stops;
        if t <= stops[0].0 {
            return stops[0].1;
        }
        for w in stops.windows(2) {
            let ((o0, c0), (o1, c1)) = (w[0], w[1]);
            if t < o1 {
                if o1 <= o0 {
                    return c1;
                }
                let k = (t - o0) / (o1 - o0);
                return [0, 1, 2, 3].map(|i| c0[i] + (c1[i] - c0[i]) * k);
            }
        }
        stops[stops.len() - 1].1
    }
}

fn spread(t: f64, method: SpreadMethod) -> f64 {
    if !t.is_finite() {
        return 1.0;
    }
    match method {
        SpreadMethod::Pad => t.clamp(0.0, 1.0),
        SpreadMethod::Repeat => t - t.floor(),
        SpreadMethod::Reflect => {
            let m = t.rem_euclid(2.0);
            if m > 1.0 {
                2.0 - m
            } else {
                m
            }
        }
    }
}
