//! Conversion of primitive geometry into polylines in the element's own
//! coordinate system.

use std::f64::consts::{PI, TAU};

use crate::geom::{Point, Transform};
use crate::svg::{NodeKind, PathCmd, RectGeom};

const MAX_SEGMENTS: usize = 4096;

/// One polyline. `corner[i]` is false for vertices introduced by curve
/// flattening, where the true outline is smooth.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Subpath {
    pub pts: Vec<Point>,
    pub corner: Vec<bool>,
    pub closed: bool,
}

impl Subpath {
    fn start(p: Point) -> Self {
        Self { pts: vec![p], corner: vec![true], closed: false }
    }

    fn push(&mut self, p: Point, corner: bool) {
        self.pts.push(p);
        self.corner.push(corner);
    }
}

/// Outline of a primitive. `tol` is the maximum chord deviation in local
/// units. Shapes that SVG disables (zero-size rect, circle, ellipse) yield
/// no subpaths.
pub fn outline(kind: &NodeKind, tol: f64) -> Vec<Subpath> {
    let tol = if tol.is_finite() && tol > 0.0 { tol } else { 0.25 };
    match kind {
        NodeKind::Path(d) => path_outline(&d.0, tol),
        NodeKind::Rect(r) => rect_outline(r, tol),
        NodeKind::Circle { cx, cy, r } => ellipse_outline(*cx, *cy, *r, *r, tol),
        NodeKind::Ellipse { cx, cy, rx, ry } => ellipse_outline(*cx, *cy, *rx, *ry, tol),
        NodeKind::Line { x1, y1, x2, y2 } => {
            let mut s = Subpath::start(Point::new(*x1, *y1));
            s.push(Point::new(*x2, *y2), true);
            vec![s]
        }
        NodeKind::Polyline(pts) | NodeKind::Polygon(pts) => {
            if pts.is_empty() {
                return Vec::new();
            }
            let mut s = Subpath::start(pts[0]);
            for p in &pts[1..] {
                s.push(*p, true);
            }
            s.closed = matches!(kind, NodeKind::Polygon(_));
            vec![s]
        }
        NodeKind::Group | NodeKind::Use(_) => Vec::new(),
    }
}

/// Whether the element's interior is painted by `fill`.
pub fn fills_interior(kind: &NodeKind) -> bool {
    !matches!(kind, NodeKind::Line { .. })
}

/// Local tolerance giving at most `device_tol` pixels of deviation after
/// `to_device`.
pub fn local_tolerance(to_device: &Transform, device_tol: f64) -> f64 {
    let s = to_device.max_scale();
    if s > 0.0 && s.is_finite() {
        device_tol / s
    } else {
        device_tol
    }
}

fn path_outline(cmds: &[PathCmd], tol: f64) -> Vec<Subpath> {
    let mut out = Vec::new();
    let mut cur: Option<Subpath> = None;
    let mut pos = Point::default();
    let mut start = Point::default();
    let finish = |s: Option<Subpath>, out: &mut Vec<Subpath>| {
        if let Some(s) = s {
            // A lone moveto draws nothing; "M p Z" is a zero-length subpath.
            if s.pts.len() > 1 || s.closed {
                out.push(s);
            }
        }
    };
    for cmd in cmds {
        if !matches!(cmd, PathCmd::MoveTo(_)) && cur.is_none() {
            // Drawing after a closepath continues from the subpath start.
            cur = Some(Subpath::start(start));
        }
        match cmd {
            PathCmd::MoveTo(p) => {
                finish(cur.take(), &mut out);
                cur = Some(Subpath::start(*p));
                pos = *p;
                start = *p;
            }
            PathCmd::LineTo(p) => {
                cur.as_mut().expect("open subpath").push(*p, true);
                pos = *p;
            }
            PathCmd::CubicTo(c1, c2, p) => {
                let s = cur.as_mut().expect("open subpath");
                cubic(s, pos, *c1, *c2, *p, tol);
                pos = *p;
            }
            PathCmd::QuadTo(c, p) => {
                let s = cur.as_mut().expect("open subpath");
                quad(s, pos, *c, *p, tol);
                pos = *p;
            }
            PathCmd::ArcTo { rx, ry, x_axis_rotation, large_arc, sweep, to } => {
                let s = cur.as_mut().expect("open subpath");
                arc(s, pos, *rx, *ry, *x_axis_rotation, *large_arc, *sweep, *to, tol);
                pos = *to;
            }
            PathCmd::Close => {
                let mut s = cur.take().expect("open subpath");
                s.closed = true;
                finish(Some(s), &mut out);
                pos = start;
            }
        }
    }
    finish(cur, &mut out);
    out
}

fn segments_for(bound: f64, tol: f64) -> usize {
    let n = (bound / tol).sqrt().ceil();
    if n.is_finite() {
        (n as usize).clamp(1, MAX_SEGMENTS)
    } else {
        1
    }
}

fn cubic(s: &mut Subpath, p0: Point, p1: Point, p2: Point, p3: Point, tol: f64) {
    let dd1 = (p0 - p1.scale(2.0) + p2).length();
    let dd2 = (p1 - p2.scale(2.0) + p3).length();
    let n = segments_for(0.75 * dd1.max(dd2), tol);
    for i in 1..n {
        let t = i as f64 / n as f64;
        let mt = 1.0 - t;
        let p = p0.scale(mt * mt * mt) + p1.scale(3.0 * mt * mt * t) + p2.scale(3.0 * mt * t * t) + p3.scale(t * t * t);
        s.push(p, false);
    }
    s.push(p3, true);
}

fn quad(s: &mut Subpath, p0: Point, p1: Point, p2: Point, tol: f64) {
    let dd = (p0 - p1.scale(2.0) + p2).length();
    let n = segments_for(dd / 4.0, tol);
    for i in 1..n {
        let t = i as f64 / n as f64;
        let mt = 1.0 - t;
        s.push(p0.scale(mt * mt) + p1.scale(2.0 * mt * t) + p2.scale(t * t), false);
    }
    s.push(p2, true);
}

/// Angular step keeping the chord of a circle of radius `r` within `tol`.
fn angle_step(r: f64, tol: f64) -> f64 {
    if r <= tol {
        return PI / 2.0;
    }
    let step = 2.0 * (1.0 - tol / r).acos();
    step.max(TAU / MAX_SEGMENTS as f64)
}

#[allow(clippy::too_many_arguments)]
fn arc(s: &mut Subpath, from: Point, rx: f64, ry: f64, rot_deg: f64, large: bool, sweep: bool, to: Point, tol: f64) {
    if from == to {
        return;
    }
    let (mut rx, mut ry) = (rx.abs(), ry.abs());
    if rx == 0.0 || ry == 0.0 {
        s.push(to, true);
        return;
    }
    let phi = rot_deg.to_radians();
    let (sin_phi, cos_phi) = phi.sin_cos();
    let dx = (from.x - to.x) / 2.0;
    let dy = (from.y - to.y) / 2.0;
    let x1p = cos_phi * dx + sin_phi * dy;
    let y1p = -sin_phi * dx + cos_phi * dy;
    let lambda = (x1p * x1p) / (rx * rx) + (y1p * y1p) / (ry * ry);
    if lambda > 1.0 {
        let k = lambda.sqrt();
        rx *= k;
        ry *= k;
    }
    let num = rx * rx * ry * ry - rx * rx * y1p * y1p - ry * ry * x1p * x1p;
    let den = rx * rx * y1p * y1p + ry * ry * x1p * x1p;
    let mut coef = if den == 0.0 { 0.0 } else { (num / den).max(0.0).sqrt() };
    if large == sweep {
        coef = -coef;
    }
    let cxp = coef * rx * y1p / ry;
    let cyp = -coef * ry * x1p / rx;
    let cx = cos_phi * cxp - sin_phi * cyp + (from.x + to.x) / 2.0;
    let cy = sin_phi * cxp + cos_phi * cyp + (from.y + to.y) / 2.0;
    let angle = |ux: f64, uy: f64| uy.atan2(ux);
    let theta1 = angle((x1p - cxp) / rx, (y1p - cyp) / ry);
    let theta2 = angle((-x1p - cxp) / rx, (-y1p - cyp) / ry);
    let mut delta = theta2 - theta1;
    if sweep && delta < 0.0 {
        delta += TAU;
    } else if !sweep && delta > 0.0 {
        delta -= TAU;
    }
    let n = ((delta.abs() / angle_step(rx.max(ry), tol)).ceil() as usize).clamp(1, MAX_SEGMENTS);
    for i in 1..n {
        let t = theta1 + delta * i as f64 / n as f64;
        let (st, ct) = t.sin_cos();
        s.push(
            Point::new(cx + rx * ct * cos_phi - ry * st * sin_phi, cy + rx * ct * sin_phi + ry * st * cos_phi),
            false,
        );
    }
    s.push(to, true);
}

fn ellipse_outline(cx: f64, cy: f64, rx: f64, ry: f64, tol: f64) -> Vec<Subpath> {
    if rx <= 0.0 || ry <= 0.0 {
        return Vec::new();
    }
    let n = ((TAU / angle_step(rx.max(ry), tol)).ceil() as usize).clamp(8, MAX_SEGMENTS);
    let mut s = Subpath::default();
    for i in 0..n {
        let (st, ct) = (TAU * i as f64 / n as f64).sin_cos();
        s.push(Point::new(cx + rx * ct, cy + ry * st), false);
    }
    s.closed = true;
    vec![s]
}

fn rect_outline(r: &RectGeom, tol: f64) -> Vec<Subpath> {
    if r.width <= 0.0 || r.height <= 0.0 {
        return Vec::new();
    }
    let (x0, y0, x1, y1) = (r.x, r.y, r.x + r.width, r.y + r.height);
    let mut s = Subpath::default();
    if r.rx <= 0.0 || r.ry <= 0.0 {
        for p in [(x0, y0), (x1, y0), (x1, y1), (x0, y1)] {
            s.push(Point::new(p.0, p.1), true);
        }
    } else {
        let (rx, ry) = (r.rx, r.ry);
        let n = ((PI / 2.0 / angle_step(rx.max(ry), tol)).ceil() as usize).clamp(1, MAX_SEGMENTS);
        // Quarter arcs clockwise (in y-down space) starting at the top-right.
        let corners = [
            (x1 - rx, y0 + ry, -PI / 2.0),
            (x1 - rx, y1 - ry, 0.0),
            (x0 + rx, y1 - ry, PI / 2.0),
            (x0 + rx, y0 + ry, PI),
        ];
        for (cx, cy, a0) in corners {
            for i in 0..=n {
                let (st, ct) = (a0 + PI / 2.0 * i as f64 / n as f64).sin_cos();
                s.push(Point::new(cx + rx * ct, cy + ry * st), false);
            }
        }
    }
    s.closed = true;
    vec![s]
}
