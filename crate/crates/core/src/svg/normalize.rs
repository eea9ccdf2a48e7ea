use std::collections::BTreeSet;

use super::style::DeclaredPaint;
use super::{round_half_even, GradientShape, NodeKind, SvgDocument, SvgNode};
use crate::geom::{Point, Transform};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizeOptions {
    /// Decimal places kept for coordinates, lengths and opacities.
    pub precision: u32,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        Self { precision: 3 }
    }
}

/// [`normalize_with`] at the default precision.
pub fn normalize(doc: &SvgDocument) -> SvgDocument {
    normalize_with(doc, &NormalizeOptions::default())
}

/// Produces the canonical form of a document: numbers rounded half-to-even,
/// empty groups removed, attribute-less single-child groups unwrapped, and
/// unreferenced definitions dropped. Idempotent.
pub fn normalize_with(doc: &SvgDocument, opts: &NormalizeOptions) -> SvgDocument {
    let mut doc = doc.clone();
    let p = opts.precision;
    let r = |v: f64| round_half_even(v, p);

    doc.view_box.x = r(doc.view_box.x);
    doc.view_box.y = r(doc.view_box.y);
    // Rounding must not collapse the viewport to nothing.
    doc.view_box.width = r(doc.view_box.width).max(doc.view_box.width.min(1.0));
    doc.view_box.height = r(doc.view_box.height).max(doc.view_box.height.min(1.0));
    doc.width = doc.width.map(r).filter(|w| *w > 0.0);
    doc.height = doc.height.map(r).filter(|h| *h > 0.0);

    round_node(&mut doc.root, p);
    for n in &mut doc.defs {
        round_node(n, p);
    }
    for clip in doc.clip_paths.values_mut() {
        clip.transform = round_transform(&clip.transform, p);
        for n in &mut clip.children {
            round_node(n, p);
        }
    }
    for g in doc.gradients.values_mut() {
        g.transform = round_transform(&g.transform, p);
        g.shape = match g.shape {
            GradientShape::Linear { x1, y1, x2, y2 } => {
                GradientShape::Linear { x1: r(x1), y1: r(y1), x2: r(x2), y2: r(y2) }
            }
            GradientShape::Radial { cx, cy, r: rad, fx, fy } => {
                GradientShape::Radial { cx: r(cx), cy: r(cy), r: r(rad), fx: r(fx), fy: r(fy) }
            }
        };
        for s in &mut g.stops {
            s.offset = r(s.offset);
            s.opacity = r(s.opacity);
        }
    }

    let mut used_ids = BTreeSet::new();
    collect_refs(&doc, &mut used_ids);
    let children = std::mem::take(&mut doc.root.children);
    doc.root.children = simplify_children(children, &used_ids);
    let defs = std::mem::take(&mut doc.defs);
    doc.defs = simplify_children(defs, &used_ids);

    prune_definitions(&mut doc);
    doc.resolve_styles();
    doc
}

const TRANSFORM_EXTRA_PLACES: u32 = 3;

fn round_transform(t: &Transform, p: u32) -> Transform {
    // Composed transforms (rotation about a point, nested groups) move whole
    // outlines, so they keep extra places to stay below one subsample.
    let r = |v: f64| round_half_even(v, p + TRANSFORM_EXTRA_PLACES);
    Transform::new(r(t.a), r(t.b), r(t.c), r(t.d), r(t.e), r(t.f))
}

fn round_node(node: &mut SvgNode, p: u32) {
    let r = |v: f64| round_half_even(v, p);
    let pt = |q: &mut Point| {
        q.x = r(q.x);
        q.y = r(q.y);
    };
    node.transform = round_transform(&node.transform, p);
    node.declared.map_numbers(r);
    match &mut node.kind {
        NodeKind::Group => {}
        NodeKind::Path(d) => d.map_numbers(r),
        NodeKind::Rect(g) => {
            for v in [&mut g.x, &mut g.y, &mut g.width, &mut g.height, &mut g.rx, &mut g.ry] {
                *v = r(*v);
            }
            g.rx = g.rx.min(g.width / 2.0);
            g.ry = g.ry.min(g.height / 2.0);
            // Halving may add a digit; keep the value representable.
            if round_half_even(g.rx, p) != g.rx {
                g.rx = round_half_even(g.rx - 0.5 * 10f64.powi(-(p as i32)), p);
            }
            if round_half_even(g.ry, p) != g.ry {
                g.ry = round_half_even(g.ry - 0.5 * 10f64.powi(-(p as i32)), p);
            }
        }
        NodeKind::Circle { cx, cy, r: rad } => {
            for v in [cx, cy, rad] {
                *v = r(*v);
            }
        }
        NodeKind::Ellipse { cx, cy, rx, ry } => {
            for v in [cx, cy, rx, ry] {
                *v = r(*v);
            }
        }
        NodeKind::Line { x1, y1, x2, y2 } => {
            for v in [x1, y1, x2, y2] {
                *v = r(*v);
            }
        }
        NodeKind::Polyline(pts) | NodeKind::Polygon(pts) => pts.iter_mut().for_each(pt),
        NodeKind::Use(u) => {
            u.x = r(u.x);
            u.y = r(u.y);
        }
    }
    for c in &mut node.children {
        round_node(c, p);
    }
}

/// Ids that must survive simplification: `use` targets, plus the paint
/// servers and clip paths referenced from reachable content.
fn collect_refs(doc: &SvgDocument, out: &mut BTreeSet<String>) {
    for n in doc.root.descendants() {
        if let NodeKind::Use(u) = &n.kind {
            out.insert(u.href.clone());
        }
    }
    for n in doc.defs.iter().flat_map(SvgNode::descendants) {
        if let NodeKind::Use(u) = &n.kind {
            out.insert(u.href.clone());
        }
    }
}

fn is_bare_group(n: &SvgNode) -> bool {
    n.kind == NodeKind::Group
        && n.id.is_none()
        && n.transform.is_identity()
        && n.declared.is_empty()
        && n.clip_path.is_none()
}

fn simplify_children(children: Vec<SvgNode>, keep: &BTreeSet<String>) -> Vec<SvgNode> {
    let mut out = Vec::with_capacity(children.len());
    for mut c in children {
        let kids = std::mem::take(&mut c.children);
        c.children = simplify_children(kids, keep);
        let referenced = c.id.as_ref().is_some_and(|id| keep.contains(id));
        if c.kind == NodeKind::Group && c.children.is_empty() && !referenced {
            continue;
        }
        if is_bare_group(&c) && c.children.len() == 1 {
            out.push(c.children.pop().expect("one child"));
            continue;
        }
        out.push(c);
    }
    out
}

/// Drops gradients, clip paths and defs content that nothing reachable from
/// the render tree refers to.
fn prune_definitions(doc: &mut SvgDocument) {
    let mut nodes_used = BTreeSet::new();
    let mut servers = BTreeSet::new();
    let mut clips = BTreeSet::new();
    let mut pending: Vec<&SvgNode> = vec![&doc.root];
    let mut visited_defs = BTreeSet::new();
    while let Some(start) = pending.pop() {
        for n in start.descendants() {
            for p in [&n.declared.fill, &n.declared.stroke].into_iter().flatten() {
                if let DeclaredPaint::Server(id) = p {
                    servers.insert(id.clone());
                }
            }
            if let Some(c) = &n.clip_path {
                if clips.insert(c.clone()) {
                    if let Some(clip) = doc.clip_paths.get(c) {
                        pending.extend(clip.children.iter());
                    }
                }
            }
            if let NodeKind::Use(u) = &n.kind {
                nodes_used.insert(u.href.clone());
                for (i, d) in doc.defs.iter().enumerate() {
                    if d.descendants().any(|x| x.id.as_deref() == Some(u.href.as_str()))
                        && visited_defs.insert(i)
                    {
                        pending.push(d);
                    }
                }
            }
        }
    }
    doc.gradients.retain(|id, _| servers.contains(id));
    doc.clip_paths.retain(|id, _| clips.contains(id));
    let defs = std::mem::take(&mut doc.defs);
    doc.defs = defs
        .into_iter()
        .enumerate()
        .filter(|(i, _)| visited_defs.contains(i))
        .map(|(_, d)| d)
        .collect();
}
