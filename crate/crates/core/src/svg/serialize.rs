use std::fmt::Write;

use super::style::{DeclaredPaint, FillRule, LineCap, LineJoin, Rgba, StyleDecl};
use super::{
    format_number as num, ClipPath, Gradient, GradientShape, NodeKind, PathCmd, PathData,
    SpreadMethod, SvgDocument, SvgNode, Units, SVG_NS,
};
use crate::geom::{Point, Transform};

/// Canonical text of a document: a single leading `<defs>` with gradients
/// and clip paths sorted by id, fixed attribute order, no inter-element
/// whitespace. Numbers are written exactly; round with
/// [`normalize`](super::normalize) first for compact output.
pub fn serialize(doc: &SvgDocument) -> String {
    let mut out = String::with_capacity(doc.source_bytes.max(256));
    let mut attrs = Attrs::default();
    attrs.id(doc.root.id.as_deref());
    if let Some(h) = doc.height {
        attrs.geom("height", num(h));
    }
    let vb = doc.view_box;
    attrs.geom("viewBox", format!("{} {} {} {}", num(vb.x), num(vb.y), num(vb.width), num(vb.height)));
    if let Some(w) = doc.width {
        attrs.geom("width", num(w));
    }
    attrs.transform(&doc.root.transform);
    attrs.style(&doc.root.declared, None);
    let _ = write!(out, "<svg xmlns=\"{SVG_NS}\"");
    attrs.write_to(&mut out);
    out.push('>');
    write_defs(&mut out, doc.gradients.values(), doc.clip_paths.values(), &doc.defs);
    for child in &doc.root.children {
        write_node(&mut out, child);
    }
    out.push_str("</svg>");
    out
}

/// Byte length of the canonical serialization.
pub fn svg_length(doc: &SvgDocument) -> usize {
    serialize(doc).len()
}

/// Writes a `<defs>` block holding the given resources, or nothing when all
/// are empty.
pub fn write_defs<'a>(
    out: &mut String,
    gradients: impl IntoIterator<Item = &'a Gradient>,
    clips: impl IntoIterator<Item = &'a ClipPath>,
    nodes: &[SvgNode],
) {
    let start = out.len();
    out.push_str("<defs>");
    let inner = out.len();
    for g in gradients {
        write_gradient(out, g);
    }
    for c in clips {
        write_clip_path(out, c);
    }
    for n in nodes {
        write_node(out, n);
    }
    if out.len() == inner {
        out.truncate(start);
    } else {
        out.push_str("</defs>");
    }
}

/// Canonical text of one element and its subtree.
pub fn serialize_node(node: &SvgNode) -> String {
    let mut out = String::new();
    write_node(&mut out, node);
    out
}

pub fn write_node(out: &mut String, node: &SvgNode) {
    let mut attrs = Attrs::default();
    attrs.id(node.id.as_deref());
    match &node.kind {
        NodeKind::Group => {}
        NodeKind::Path(d) => attrs.geom("d", path_text(d)),
        NodeKind::Rect(r) => {
            attrs.geom("x", num(r.x));
            attrs.geom("y", num(r.y));
            attrs.geom("width", num(r.width));
            attrs.geom("height", num(r.height));
            if r.rx != 0.0 || r.ry != 0.0 {
                attrs.geom("rx", num(r.rx));
                attrs.geom("ry", num(r.ry));
            }
        }
        NodeKind::Circle { cx, cy, r } => {
            attrs.geom("cx", num(*cx));
            attrs.geom("cy", num(*cy));
            attrs.geom("r", num(*r));
        }
        NodeKind::Ellipse { cx, cy, rx, ry } => {
            attrs.geom("cx", num(*cx));
            attrs.geom("cy", num(*cy));
            attrs.geom("rx", num(*rx));
            attrs.geom("ry", num(*ry));
        }
        NodeKind::Line { x1, y1, x2, y2 } => {
            attrs.geom("x1", num(*x1));
            attrs.geom("y1", num(*y1));
            attrs.geom("x2", num(*x2));
            attrs.geom("y2", num(*y2));
        }
        NodeKind::Polyline(pts) | NodeKind::Polygon(pts) => attrs.geom("points", points_text(pts)),
        NodeKind::Use(u) => {
            attrs.geom("href", format!("#{}", u.href));
            if u.x != 0.0 {
                attrs.geom("x", num(u.x));
            }
            if u.y != 0.0 {
                attrs.geom("y", num(u.y));
            }
        }
    }
    attrs.transform(&node.transform);
    attrs.style(&node.declared, node.clip_path.as_deref());
    let tag = node.kind.tag();
    out.push('<');
    out.push_str(tag);
    attrs.write_to(out);
    if node.children.is_empty() {
        out.push_str("/>");
    } else {
        out.push('>');
        for c in &node.children {
            write_node(out, c);
        }
        let _ = write!(out, "</{tag}>");
    }
}

pub fn write_gradient(out: &mut String, g: &Gradient) {
    let mut attrs = Attrs::default();
    attrs.id(Some(&g.id));
    let tag = match g.shape {
        GradientShape::Linear { x1, y1, x2, y2 } => {
            attrs.geom("x1", num(x1));
            attrs.geom("y1", num(y1));
            attrs.geom("x2", num(x2));
            attrs.geom("y2", num(y2));
            "linearGradient"
        }
        GradientShape::Radial { cx, cy, r, fx, fy } => {
            attrs.geom("cx", num(cx));
            attrs.geom("cy", num(cy));
            attrs.geom("r", num(r));
            if fx != cx || fy != cy {
                attrs.geom("fx", num(fx));
                attrs.geom("fy", num(fy));
            }
            "radialGradient"
        }
    };
    if !g.transform.is_identity() {
        attrs.geom("gradientTransform", transform_text(&g.transform));
    }
    if g.units == Units::UserSpaceOnUse {
        attrs.geom("gradientUnits", "userSpaceOnUse".into());
    }
    match g.spread {
        SpreadMethod::Pad => {}
        SpreadMethod::Reflect => attrs.geom("spreadMethod", "reflect".into()),
        SpreadMethod::Repeat => attrs.geom("spreadMethod", "repeat".into()),
    }
    let _ = write!(out, "<{tag}");
    attrs.write_to(out);
    if g.stops.is_empty() {
        out.push_str("/>");
        return;
    }
    out.push('>');
    for s in &g.stops {
        let _ = write!(out, "<stop offset=\"{}\" stop-color=\"{}\"", num(s.offset), color_text(s.color));
        if s.opacity != 1.0 {
            let _ = write!(out, " stop-opacity=\"{}\"", num(s.opacity));
        }
        out.push_str("/>");
    }
    let _ = write!(out, "</{tag}>");
}

pub fn write_clip_path(out: &mut String, c: &ClipPath) {
    let mut attrs = Attrs::default();
    attrs.id(Some(&c.id));
    attrs.transform(&c.transform);
    out.push_str("<clipPath");
    attrs.write_to(out);
    out.push('>');
    for child in &c.children {
        write_node(out, child);
    }
    out.push_str("</clipPath>");
}

pub fn transform_text(t: &Transform) -> String {
    if t.a == 1.0 && t.b == 0.0 && t.c == 0.0 && t.d == 1.0 {
        format!("translate({} {})", num(t.e), num(t.f))
    } else if t.b == 0.0 && t.c == 0.0 && t.e == 0.0 && t.f == 0.0 {
        format!("scale({} {})", num(t.a), num(t.d))
    } else {
        format!("matrix({} {} {} {} {} {})", num(t.a), num(t.b), num(t.c), num(t.d), num(t.e), num(t.f))
    }
}

pub fn path_text(d: &PathData) -> String {
    let mut s = String::new();
    let pt = |s: &mut String, p: &Point| {
        let _ = write!(s, "{} {}", num(p.x), num(p.y));
    };
    for cmd in &d.0 {
        match cmd {
            PathCmd::MoveTo(p) => {
                s.push('M');
                pt(&mut s, p);
            }
            PathCmd::LineTo(p) => {
                s.push('L');
                pt(&mut s, p);
            }
            PathCmd::CubicTo(a, b, c) => {
                s.push('C');
                pt(&mut s, a);
                s.push(' ');
                pt(&mut s, b);
                s.push(' ');
                pt(&mut s, c);
            }
            PathCmd::QuadTo(a, b) => {
                s.push('Q');
                pt(&mut s, a);
                s.push(' ');
                pt(&mut s, b);
            }
            PathCmd::ArcTo { rx, ry, x_axis_rotation, large_arc, sweep, to } => {
                let _ = write!(
                    s,
                    "A{} {} {} {} {} ",
                    num(*rx),
                    num(*ry),
                    num(*x_axis_rotation),
                    *large_arc as u8,
                    *sweep as u8
                );
                pt(&mut s, to);
            }
            PathCmd::Close => s.push('Z'),
        }
    }
    s
}

fn points_text(pts: &[Point]) -> String {
    let mut s = String::new();
    for (i, p) in pts.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{},{}", num(p.x), num(p.y));
    }
    s
}

pub fn color_text(c: Rgba) -> String {
    if c.a == 255 {
        format!("#{:02x}{:02x}{:02x}", c.r, c.g, c.b)
    } else {
        // Three decimals are enough to recover the 8-bit alpha exactly.
        let a = super::round_half_even(c.a as f64 / 255.0, 3);
        format!("rgba({},{},{},{})", c.r, c.g, c.b, num(a))
    }
}

fn paint_text(p: &DeclaredPaint) -> String {
    match p {
        DeclaredPaint::None => "none".into(),
        DeclaredPaint::Color(c) => color_text(*c),
        DeclaredPaint::CurrentColor => "currentColor".into(),
        DeclaredPaint::Server(id) => format!("url(#{id})"),
    }
}

/// Attribute list in canonical order: `id`, geometry (alphabetical),
/// `transform`, presentation properties (alphabetical).
#[derive(Default)]
struct Attrs {
    id: Option<String>,
    geom: Vec<(&'static str, String)>,
    transform: Option<String>,
    style: Vec<(&'static str, String)>,
}

impl Attrs {
    fn id(&mut self, id: Option<&str>) {
        self.id = id.map(str::to_owned);
    }

    fn geom(&mut self, name: &'static str, value: String) {
        self.geom.push((name, value));
    }

    fn transform(&mut self, t: &Transform) {
        if !t.is_identity() {
            self.transform = Some(transform_text(t));
        }
    }

    fn style(&mut self, d: &StyleDecl, clip: Option<&str>) {
        let s = &mut self.style;
        if let Some(id) = clip {
            s.push(("clip-path", format!("url(#{id})")));
        }
        let rule = |r: FillRule| match r {
            FillRule::NonZero => "nonzero".to_owned(),
            FillRule::EvenOdd => "evenodd".to_owned(),
        };
        if let Some(r) = d.clip_rule {
            s.push(("clip-rule", rule(r)));
        }
        if let Some(c) = d.color {
            s.push(("color", color_text(c)));
        }
        if let Some(p) = &d.fill {
            s.push(("fill", paint_text(p)));
        }
        if let Some(v) = d.fill_opacity {
            s.push(("fill-opacity", num(v)));
        }
        if let Some(r) = d.fill_rule {
            s.push(("fill-rule", rule(r)));
        }
        if let Some(v) = d.opacity {
            s.push(("opacity", num(v)));
        }
        if let Some(p) = &d.stroke {
            s.push(("stroke", paint_text(p)));
        }
        if let Some(c) = d.stroke_linecap {
            let v = match c {
                LineCap::Butt => "butt",
                LineCap::Round => "round",
                LineCap::Square => "square",
            };
            s.push(("stroke-linecap", v.into()));
        }
        if let Some(j) = d.stroke_linejoin {
            let v = match j {
                LineJoin::Miter => "miter",
                LineJoin::Round => "round",
                LineJoin::Bevel => "bevel",
            };
            s.push(("stroke-linejoin", v.into()));
        }
        if let Some(v) = d.stroke_miterlimit {
            s.push(("stroke-miterlimit", num(v)));
        }
        if let Some(v) = d.stroke_opacity {
            s.push(("stroke-opacity", num(v)));
        }
        if let Some(v) = d.stroke_width {
            s.push(("stroke-width", num(v)));
        }
        if let Some(v) = d.visible {
            s.push(("visibility", if v { "visible" } else { "hidden" }.into()));
        }
    }

    fn write_to(mut self, out: &mut String) {
        if let Some(id) = &self.id {
            let _ = write!(out, " id=\"{}\"", escape_attr(id));
        }
        self.geom.sort_by(|a, b| a.0.cmp(b.0));
        for (k, v) in &self.geom {
            let _ = write!(out, " {k}=\"{}\"", escape_attr(v));
        }
        if let Some(t) = &self.transform {
            let _ = write!(out, " transform=\"{t}\"");
        }
        for (k, v) in &self.style {
            let _ = write!(out, " {k}=\"{}\"", escape_attr(v));
        }
    }
}

fn escape_attr(s: &str) -> std::borrow::Cow<'_, str> {
    if !s.contains(['&', '<', '"']) {
        return s.into();
    }
    s.replace('&', "&amp;").replace('<', "&lt;").replace('"', "&quot;").into()
}

#[cfg(test)]
mod tests {
    use super::super::parse_svg;
    use super::*;

    #[test]
    fn canonical_form_of_simple_document() {
        let doc = parse_svg(
            br#"<svg viewBox="0 0 10 10" width="20">
                  <rect fill="red" y="1" x="2" width="3" height="4" transform="translate(1,1)"/>
                </svg>"#,
        )
        .unwrap();
        assert_eq!(
            serialize(&doc),
            r##"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 10 10" width="20"><rect height="4" width="3" x="2" y="1" transform="translate(1 1)" fill="#ff0000"/></svg>"##
        );
    }

    #[test]
    fn translucent_colors_survive_a_round_trip() {
        for a in 0..=255u8 {
            let c = Rgba { r: 1, g: 2, b: 3, a };
            let text = color_text(c);
            let back: svgtypes::Color = text.parse().unwrap();
            assert_eq!(back.alpha, a, "{text}");
        }
    }

    #[test]
    fn path_text_is_absolute() {
        let d = PathData::parse("m1 1 l2 0 a1 1 0 0 1 1 1 z");
        assert_eq!(path_text(&d), "M1 1L3 1A1 1 0 0 1 4 2Z");
    }
}
