use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::str::FromStr;

use roxmltree::Node;
use svgtypes::{Length, LengthUnit};

use super::style::{DeclaredPaint, FillRule, LineCap, LineJoin, Rgba, StyleDecl};
use super::{
    ClipPath, Gradient, GradientShape, GradientStop, NodeKind, PathData, RectGeom, ResolvedStyle,
    SpreadMethod, SvgDocument, SvgError, SvgNode, Units, UseRef, ViewBox, MAX_GRADIENT_STOPS,
    SVG_NS, XLINK_NS,
};
use crate::geom::{Point, Transform};

/// Elements dropped silently: they never affect rendering.
const IGNORED: &[&str] = &["title", "desc", "metadata"];

/// Elements whose presence rejects the document.
const UNSUPPORTED: &[&str] = &[
    "script", "style", "text", "tspan", "textPath", "tref", "filter", "mask", "pattern", "image",
    "foreignObject", "animate", "animateTransform", "animateMotion", "animateColor", "set",
    "symbol", "marker", "switch", "svg", "font", "font-face", "glyph", "cursor", "view",
];

/// Parses UTF-8 SVG text into a document with resolved styles.
pub fn parse_svg(bytes: &[u8]) -> Result<SvgDocument, SvgError> {
    let text = std::str::from_utf8(bytes).map_err(|_| SvgError::InvalidUtf8)?;
    let opts = roxmltree::ParsingOptions { allow_dtd: true, ..Default::default() };
    let xml = roxmltree::Document::parse_with_options(text, opts)
        .map_err(|e| SvgError::MalformedXml(e.to_string()))?;
    let root = xml.root_element();
    if !is_svg(root) || root.tag_name().name() != "svg" {
        return Err(SvgError::NotSvg(root.tag_name().name().to_owned()));
    }

    let mut unsupported = BTreeSet::new();
    scan_unsupported(root, true, &mut unsupported);
    if !unsupported.is_empty() {
        return Err(SvgError::UnsupportedFeature(unsupported.into_iter().collect()));
    }

    let view_box = parse_view_box(root)?;
    let mut parser = Parser {
        view_box,
        elements_by_id: HashMap::new(),
        referenced: BTreeSet::new(),
        node_ids: HashSet::new(),
    };
    for node in root.descendants().filter(|n| n.is_element() && is_svg(*n)) {
        if let Some(id) = node.attribute("id") {
            parser.elements_by_id.entry(id.to_owned()).or_insert(node);
        }
    }

    let mut root_node = SvgNode::new(NodeKind::Group);
    root_node.id = root.attribute("id").map(str::to_owned);
    root_node.declared = parser.style_decl(root)?;
    root_node.transform = parser.transform(root)?;
    root_node.style = ResolvedStyle::resolve(&root_node.declared, &ResolvedStyle::default());
    if let Some(id) = root_node.id.clone() {
        parser.node_ids.insert(id);
    }

    let mut defs_raw = Vec::new();
    for child in root.children() {
        if let Some(node) = parser.tree_node(child, &root_node.style, &mut defs_raw)? {
            root_node.children.push(node);
        }
    }
    let mut defs = Vec::new();
    for d in defs_raw {
        if let Some(node) = parser.tree_node(d, &root_node.style, &mut Vec::new())? {
            defs.push(node);
        }
    }

    let mut gradients = BTreeMap::new();
    let mut clip_paths = BTreeMap::new();
    for node in root.descendants().filter(|n| n.is_element() && is_svg(*n)) {
        let Some(id) = node.attribute("id") else { continue };
        if parser.elements_by_id.get(id) != Some(&node) {
            continue;
        }
        match node.tag_name().name() {
            "linearGradient" | "radialGradient" => {
                if let Some(g) = parser.gradient(node)? {
                    gradients.insert(id.to_owned(), g);
                }
            }
            "clipPath" => {
                let clip = parser.clip_path(node, &root_node.style)?;
                clip_paths.insert(id.to_owned(), clip);
            }
            _ => {}
        }
    }

    for id in &parser.referenced {
        let (kind, name) = id.split_once(':').expect("tagged reference");
        let ok = match kind {
            "paint" => gradients.contains_key(name),
            "clip" => clip_paths.contains_key(name),
            _ => parser.node_ids.contains(name),
        };
        if !ok {
            return Err(SvgError::DanglingReference(name.to_owned()));
        }
    }

    let (width, height) = (
        root.attribute("width").and_then(|v| absolute_length(v)),
        root.attribute("height").and_then(|v| absolute_length(v)),
    );

    Ok(SvgDocument {
        view_box,
        width,
        height,
        root: root_node,
        gradients,
        clip_paths,
        defs,
        source_bytes: bytes.len(),
    })
}

fn is_svg(node: Node) -> bool {
    matches!(node.tag_name().namespace(), None | Some(SVG_NS))
}

fn scan_unsupported(node: Node, is_root: bool, out: &mut BTreeSet<String>) {
    if !node.is_element() || !is_svg(node) {
        return;
    }
    let name = node.tag_name().name();
    if IGNORED.contains(&name) {
        return;
    }
    if (!is_root && UNSUPPORTED.contains(&name)) || name.starts_with("fe") {
        out.insert(name.to_owned());
        return;
    }
    for attr in ["filter", "mask", "marker-start", "marker-mid", "marker-end", "stroke-dasharray"] {
        if let Some(v) = presentation_value(node, attr) {
            if v.trim() != "none" {
                out.insert(attr.to_owned());
            }
        }
    }
    if let Some(ar) = node.attribute("preserveAspectRatio") {
        let ar = ar.trim();
        if is_root && !(ar == "xMidYMid" || ar == "xMidYMid meet") {
            out.insert("preserveAspectRatio".to_owned());
        }
    }
    if name == "clipPath" && node.attribute("clipPathUnits") == Some("objectBoundingBox") {
        out.insert("clipPathUnits=objectBoundingBox".to_owned());
    }
    for child in node.children() {
        scan_unsupported(child, false, out);
    }
}

/// A presentation property from the `style` attribute or, failing that,
/// the attribute of the same name.
fn presentation_value<'a>(node: Node<'a, 'a>, name: &str) -> Option<&'a str> {
    if let Some(style) = node.attribute("style") {
        let mut found = None;
        for decl in style.split(';') {
            if let Some((k, v)) = decl.split_once(':') {
                if k.trim() == name {
                    found = Some(v.trim());
                }
            }
        }
        if let Some(v) = found {
            return Some(v.trim_end_matches("!important").trim());
        }
    }
    node.attribute(name)
}

fn parse_view_box(root: Node) -> Result<ViewBox, SvgError> {
    let vb = if let Some(v) = root.attribute("viewBox") {
        let vb = svgtypes::ViewBox::from_str(v).map_err(|_| SvgError::InvalidViewBox)?;
        ViewBox { x: vb.x, y: vb.y, width: vb.w, height: vb.h }
    } else {
        let w = root.attribute("width").and_then(absolute_length);
        let h = root.attribute("height").and_then(absolute_length);
        match (w, h) {
            (Some(w), Some(h)) => ViewBox { x: 0.0, y: 0.0, width: w, height: h },
            _ => return Err(SvgError::InvalidViewBox),
        }
    };
    let finite = [vb.x, vb.y, vb.width, vb.height].iter().all(|v| v.is_finite());
    if !finite || vb.width <= 0.0 || vb.height <= 0.0 {
        return Err(SvgError::InvalidViewBox);
    }
    Ok(vb)
}

fn unit_factor(unit: LengthUnit) -> Option<f64> {
    Some(match unit {
        LengthUnit::None | LengthUnit::Px => 1.0,
        LengthUnit::In => 96.0,
        LengthUnit::Cm => 96.0 / 2.54,
        LengthUnit::Mm => 96.0 / 25.4,
        LengthUnit::Pt => 4.0 / 3.0,
        LengthUnit::Pc => 16.0,
        LengthUnit::Em => 16.0,
        LengthUnit::Ex => 8.0,
        LengthUnit::Percent => return None,
    })
}

fn absolute_length(v: &str) -> Option<f64> {
    let len = Length::from_str(v).ok()?;
    let px = len.number * unit_factor(len.unit)?;
    (px.is_finite() && px > 0.0).then_some(px)
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
    Diagonal,
}

struct Parser<'a, 'input> {
    view_box: ViewBox,
    elements_by_id: HashMap<String, Node<'a, 'input>>,
    /// `paint:id`, `clip:id` and `node:id` references to verify at the end.
    referenced: BTreeSet<String>,
    node_ids: HashSet<String>,
}

impl<'a, 'input> Parser<'a, 'input> {
    fn invalid(node: Node, attribute: &str, value: &str) -> SvgError {
        SvgError::InvalidAttribute {
            element: node.tag_name().name().to_owned(),
            attribute: attribute.to_owned(),
            value: value.to_owned(),
        }
    }

    fn length(&self, node: Node, attr: &str, axis: Axis, default: f64) -> Result<f64, SvgError> {
        let Some(raw) = node.attribute(attr) else { return Ok(default) };
        let len = Length::from_str(raw).map_err(|_| Self::invalid(node, attr, raw))?;
        let v = match unit_factor(len.unit) {
            Some(f) => len.number * f,
            None => {
                let basis = match axis {
                    Axis::X => self.view_box.width,
                    Axis::Y => self.view_box.height,
                    Axis::Diagonal => self.view_box.width.hypot(self.view_box.height) / 2f64.sqrt(),
                };
                len.number / 100.0 * basis
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Self::invalid(node, attr, raw))
        }
    }

    fn non_negative(&self, node: Node, attr: &str, axis: Axis) -> Result<f64, SvgError> {
        let v = self.length(node, attr, axis, 0.0)?;
        if v < 0.0 {
            return Err(Self::invalid(node, attr, node.attribute(attr).unwrap_or_default()));
        }
        Ok(v)
    }

    fn transform(&self, node: Node) -> Result<Transform, SvgError> {
        self.transform_attr(node, "transform")
    }

    fn transform_attr(&self, node: Node, attr: &str) -> Result<Transform, SvgError> {
        let Some(raw) = node.attribute(attr) else { return Ok(Transform::IDENTITY) };
        let t = svgtypes::Transform::from_str(raw).map_err(|_| Self::invalid(node, attr, raw))?;
        let t = Transform::new(t.a, t.b, t.c, t.d, t.e, t.f);
        if !t.is_finite() {
            return Err(Self::invalid(node, attr, raw));
        }
        Ok(t)
    }

    fn style_decl(&mut self, node: Node) -> Result<StyleDecl, SvgError> {
        let mut decl = StyleDecl::default();
        let paint = |this: &mut Self, name: &str| -> Option<DeclaredPaint> {
            let raw = presentation_value(node, name)?;
            match svgtypes::Paint::from_str(raw).ok()? {
                svgtypes::Paint::None => Some(DeclaredPaint::None),
                svgtypes::Paint::CurrentColor => Some(DeclaredPaint::CurrentColor),
                svgtypes::Paint::Color(c) => Some(DeclaredPaint::Color(rgba(c))),
                svgtypes::Paint::FuncIRI(id, _) => {
                    this.referenced.insert(format!("paint:{id}"));
                    Some(DeclaredPaint::Server(id.to_owned()))
                }
                _ => None,
            }
        };
        decl.fill = paint(self, "fill");
        decl.stroke = paint(self, "stroke");
        decl.stroke_width = presentation_value(node, "stroke-width").and_then(|raw| {
            let len = Length::from_str(raw).ok()?;
            let v = match unit_factor(len.unit) {
                Some(f) => len.number * f,
                None => {
                    len.number / 100.0 * self.view_box.width.hypot(self.view_box.height)
                        / 2f64.sqrt()
                }
            };
            (v.is_finite() && v >= 0.0).then_some(v)
        });
        let opacity = |name: &str| {
            let raw = presentation_value(node, name)?;
            let v = match raw.strip_suffix('%') {
                Some(p) => p.trim().parse::<f64>().ok()? / 100.0,
                None => raw.parse::<f64>().ok()?,
            };
            v.is_finite().then(|| v.clamp(0.0, 1.0))
        };
        decl.opacity = opacity("opacity");
        decl.fill_opacity = opacity("fill-opacity");
        decl.stroke_opacity = opacity("stroke-opacity");
        let rule = |name: &str| match presentation_value(node, name) {
            Some("nonzero") => Some(FillRule::NonZero),
            Some("evenodd") => Some(FillRule::EvenOdd),
            _ => None,
        };
        decl.fill_rule = rule("fill-rule");
        decl.clip_rule = rule("clip-rule");
        decl.stroke_linecap = match presentation_value(node, "stroke-linecap") {
            Some("butt") => Some(LineCap::Butt),
            Some("round") => Some(LineCap::Round),
            Some("square") => Some(LineCap::Square),
            _ => None,
        };
        decl.stroke_linejoin = match presentation_value(node, "stroke-linejoin") {
            Some("miter" | "miter-clip" | "arcs") => Some(LineJoin::Miter),
            Some("round") => Some(LineJoin::Round),
            Some("bevel") => Some(LineJoin::Bevel),
            _ => None,
        };
        decl.stroke_miterlimit = presentation_value(node, "stroke-miterlimit")
            .and_then(|v| v.parse::<f64>().ok())
            .filter(|v| v.is_finite() && *v >= 1.0);
        decl.color = presentation_value(node, "color")
            .and_then(|v| svgtypes::Color::from_str(v).ok())
            .map(rgba);
        decl.visible = match presentation_value(node, "visibility") {
            Some("visible") => Some(true),
            Some("hidden" | "collapse") => Some(false),
            _ => None,
        };
        Ok(decl)
    }

    fn clip_ref(&mut self, node: Node) -> Result<Option<String>, SvgError> {
        let Some(raw) = presentation_value(node, "clip-path") else { return Ok(None) };
        if raw.trim() == "none" {
            return Ok(None);
        }
        let id = svgtypes::FuncIRI::from_str(raw).map_err(|_| Self::invalid(node, "clip-path", raw))?.0;
        self.referenced.insert(format!("clip:{id}"));
        Ok(Some(id.to_owned()))
    }

    /// Converts one child of the render tree. `defs` collects the children
    /// of `<defs>` blocks for separate conversion.
    fn tree_node(
        &mut self,
        node: Node<'a, 'input>,
        parent: &ResolvedStyle,
        defs: &mut Vec<Node<'a, 'input>>,
    ) -> Result<Option<SvgNode>, SvgError> {
        if !node.is_element() || !is_svg(node) {
            return Ok(None);
        }
        let name = node.tag_name().name();
        if presentation_value(node, "display").map(str::trim) == Some("none") {
            return Ok(None);
        }
        let kind = match name {
            "defs" => {
                for child in node.children().filter(|c| c.is_element()) {
                    if child.tag_name().name() == "defs" {
                        // Nested defs are flattened into the same table.
                        self.tree_node(child, parent, defs)?;
                    } else {
                        defs.push(child);
                    }
                }
                return Ok(None);
            }
            "g" | "a" => NodeKind::Group,
            "path" => NodeKind::Path(PathData::parse(node.attribute("d").unwrap_or_default())),
            "rect" => NodeKind::Rect(self.rect(node)?),
            "circle" => NodeKind::Circle {
                cx: self.length(node, "cx", Axis::X, 0.0)?,
                cy: self.length(node, "cy", Axis::Y, 0.0)?,
                r: self.non_negative(node, "r", Axis::Diagonal)?,
            },
            "ellipse" => NodeKind::Ellipse {
                cx: self.length(node, "cx", Axis::X, 0.0)?,
                cy: self.length(node, "cy", Axis::Y, 0.0)?,
                rx: self.non_negative(node, "rx", Axis::X)?,
                ry: self.non_negative(node, "ry", Axis::Y)?,
            },
            "line" => NodeKind::Line {
                x1: self.length(node, "x1", Axis::X, 0.0)?,
                y1: self.length(node, "y1", Axis::Y, 0.0)?,
                x2: self.length(node, "x2", Axis::X, 0.0)?,
                y2: self.length(node, "y2", Axis::Y, 0.0)?,
            },
            "polyline" => NodeKind::Polyline(points(node)),
            "polygon" => {
                let pts = points(node);
                if pts.len() < 3 {
                    return Err(Self::invalid(node, "points", node.attribute("points").unwrap_or_default()));
                }
                NodeKind::Polygon(pts)
            }
            "use" => {
                let raw = node
                    .attribute((XLINK_NS, "href"))
                    .or_else(|| node.attribute("href"))
                    .ok_or_else(|| Self::invalid(node, "href", ""))?;
                let href = raw.strip_prefix('#').ok_or_else(|| Self::invalid(node, "href", raw))?;
                self.referenced.insert(format!("node:{href}"));
                NodeKind::Use(UseRef {
                    href: href.to_owned(),
                    x: self.length(node, "x", Axis::X, 0.0)?,
                    y: self.length(node, "y", Axis::Y, 0.0)?,
                })
            }
            // Paint servers and clip paths are collected into document tables.
            "linearGradient" | "radialGradient" | "clipPath" => return Ok(None),
            _ => return Ok(None),
        };

        let mut out = SvgNode::new(kind);
        out.id = node.attribute("id").map(str::to_owned);
        if let Some(id) = &out.id {
            self.node_ids.insert(id.clone());
        }
        out.transform = self.transform(node)?;
        out.declared = self.style_decl(node)?;
        out.style = ResolvedStyle::resolve(&out.declared, parent);
        out.clip_path = self.clip_ref(node)?;
        if out.kind == NodeKind::Group {
            for child in node.children() {
                if let Some(c) = self.tree_node(child, &out.style, defs)? {
                    out.children.push(c);
                }
            }
        }
        Ok(Some(out))
    }

    fn rect(&self, node: Node) -> Result<RectGeom, SvgError> {
        let width = self.non_negative(node, "width", Axis::X)?;
        let height = self.non_negative(node, "height", Axis::Y)?;
        let rx = node.attribute("rx").map(|_| self.non_negative(node, "rx", Axis::X)).transpose()?;
        let ry = node.attribute("ry").map(|_| self.non_negative(node, "ry", Axis::Y)).transpose()?;
        let (rx, ry) = match (rx, ry) {
            (None, None) => (0.0, 0.0),
            (Some(r), None) | (None, Some(r)) => (r, r),
            (Some(x), Some(y)) => (x, y),
        };
        Ok(RectGeom {
            x: self.length(node, "x", Axis::X, 0.0)?,
            y: self.length(node, "y", Axis::Y, 0.0)?,
            width,
            height,
            rx: rx.min(width / 2.0),
            ry: ry.min(height / 2.0),
        })
    }

    /// Follows a gradient's `href` chain looking for `attr`.
    fn gradient_attr(&self, node: Node<'a, 'input>, attr: &str, same_kind: bool) -> Option<Node<'a, 'input>> {
        let tag = node.tag_name().name();
        let mut seen = HashSet::new();
        let mut cur = Some(node);
        while let Some(n) = cur {
            if !seen.insert(n.id()) {
                break;
            }
            let kind_ok = !same_kind || n.tag_name().name() == tag;
            if kind_ok && n.attribute(attr).is_some() {
                return Some(n);
            }
            cur = gradient_href(n).and_then(|id| self.elements_by_id.get(id).copied());
        }
        None
    }

    fn gradient(&self, node: Node<'a, 'input>) -> Result<Option<Gradient>, SvgError> {
        let id = node.attribute("id").unwrap_or_default().to_owned();
        let units = match self.gradient_attr(node, "gradientUnits", false).and_then(|n| n.attribute("gradientUnits")) {
            Some("userSpaceOnUse") => Units::UserSpaceOnUse,
            _ => Units::ObjectBoundingBox,
        };
        let transform = match self.gradient_attr(node, "gradientTransform", false) {
            Some(n) => self.transform_attr(n, "gradientTransform")?,
            None => Transform::IDENTITY,
        };
        let spread = match self.gradient_attr(node, "spreadMethod", false).and_then(|n| n.attribute("spreadMethod")) {
            Some("reflect") => SpreadMethod::Reflect,
            Some("repeat") => SpreadMethod::Repeat,
            _ => SpreadMethod::Pad,
        };
        let coord = |attr: &str, axis: Axis, default: f64| -> Result<f64, SvgError> {
            let Some(n) = self.gradient_attr(node, attr, true) else { return Ok(default) };
            let raw = n.attribute(attr).unwrap_or_default();
            match units {
                Units::ObjectBoundingBox => {
                    let len = Length::from_str(raw).map_err(|_| Self::invalid(n, attr, raw))?;
                    Ok(if len.unit == LengthUnit::Percent { len.number / 100.0 } else { len.number })
                }
                Units::UserSpaceOnUse => self.length(n, attr, axis, default),
            }
        };
        // Percent defaults resolve against the bounding box or the viewport.
        let (full_x, full_y, half_x, half_y, half_d) = match units {
            Units::ObjectBoundingBox => (1.0, 1.0, 0.5, 0.5, 0.5),
            Units::UserSpaceOnUse => {
                let vb = self.view_box;
                (vb.width, vb.height, vb.width / 2.0, vb.height / 2.0, vb.width.hypot(vb.height) / 2f64.sqrt() / 2.0)
            }
        };
        let _ = full_y;
        let shape = if node.tag_name().name() == "linearGradient" {
            GradientShape::Linear {
                x1: coord("x1", Axis::X, 0.0)?,
                y1: coord("y1", Axis::Y, 0.0)?,
                x2: coord("x2", Axis::X, full_x)?,
                y2: coord("y2", Axis::Y, 0.0)?,
            }
        } else {
            let cx = coord("cx", Axis::X, half_x)?;
            let cy = coord("cy", Axis::Y, half_y)?;
            let r = coord("r", Axis::Diagonal, half_d)?;
            if r < 0.0 {
                return Err(Self::invalid(node, "r", node.attribute("r").unwrap_or_default()));
            }
            GradientShape::Radial { cx, cy, r, fx: coord("fx", Axis::X, cx)?, fy: coord("fy", Axis::Y, cy)? }
        };

        let mut stops = Vec::new();
        let mut seen = HashSet::new();
        let mut cur = Some(node);
        while let Some(n) = cur {
            if !seen.insert(n.id()) {
                break;
            }
            let own: Vec<_> = n.children().filter(|c| c.is_element() && c.tag_name().name() == "stop").collect();
            if !own.is_empty() {
                let mut last = 0.0f64;
                for s in own {
                    let stop = self.stop(s, last)?;
                    last = stop.offset;
                    stops.push(stop);
                }
                break;
            }
            cur = gradient_href(n).and_then(|id| self.elements_by_id.get(id).copied());
        }
        if stops.len() > MAX_GRADIENT_STOPS {
            return Err(SvgError::UnsupportedFeature(vec![format!(
                "gradient with more than {MAX_GRADIENT_STOPS} stops"
            )]));
        }
        Ok(Some(Gradient { id, shape, units, transform, spread, stops }))
    }

    fn stop(&self, node: Node, previous: f64) -> Result<GradientStop, SvgError> {
        let offset = match node.attribute("offset") {
            None => 0.0,
            Some(raw) => {
                let raw = raw.trim();
                let v = match raw.strip_suffix('%') {
                    Some(p) => p.trim().parse::<f64>().map(|v| v / 100.0),
                    None => raw.parse::<f64>(),
                };
                v.ok().filter(|v| v.is_finite()).ok_or_else(|| Self::invalid(node, "offset", raw))?
            }
        };
        let color = presentation_value(node, "stop-color")
            .and_then(|v| svgtypes::Color::from_str(v).ok())
            .map(rgba)
            .unwrap_or(Rgba::BLACK);
        let mut opacity = presentation_value(node, "stop-opacity")
            .and_then(|v| v.parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .unwrap_or(1.0)
            .clamp(0.0, 1.0);
        // Fold an alpha channel in the color into the stop opacity.
        opacity *= color.a as f64 / 255.0;
        Ok(GradientStop {
            offset: offset.clamp(0.0, 1.0).max(previous),
            color: Rgba { a: 255, ..color },
            opacity,
        })
    }

    fn clip_path(&mut self, node: Node<'a, 'input>, root_style: &ResolvedStyle) -> Result<ClipPath, SvgError> {
        let id = node.attribute("id").unwrap_or_default().to_owned();
        let decl = self.style_decl(node)?;
        // Clip content inherits from the clipPath element only, so that the
        // folded declarations below re-parse to the same styles.
        let _ = root_style;
        let clip_style = ResolvedStyle::resolve(&decl, &ResolvedStyle::default());
        let mut children = Vec::new();
        let mut unsupported = BTreeSet::new();
        for child in node.children().filter(|c| c.is_element() && is_svg(*c)) {
            let name = child.tag_name().name();
            if IGNORED.contains(&name) {
                continue;
            }
            if matches!(name, "use" | "g" | "a") {
                unsupported.insert(format!("<{name}> inside clipPath"));
                continue;
            }
            if child.attribute("clip-path").is_some_and(|v| v.trim() != "none") {
                unsupported.insert("nested clip-path".to_owned());
                continue;
            }
            if let Some(mut n) = self.tree_node(child, &clip_style, &mut Vec::new())? {
                // Properties inherited from the clipPath element move onto
                // its children, which is where the serializer can keep them.
                n.declared = n.style.to_declarations();
                children.push(n);
            }
        }
        if node.attribute("clip-path").is_some_and(|v| v.trim() != "none") {
            unsupported.insert("nested clip-path".to_owned());
        }
        if !unsupported.is_empty() {
            return Err(SvgError::UnsupportedFeature(unsupported.into_iter().collect()));
        }
        Ok(ClipPath { id, transform: self.transform(node)?, children })
    }
}

fn gradient_href<'a, 'input>(node: Node<'a, 'input>) -> Option<&'a str> {
    node.attribute((XLINK_NS, "href"))
        .or_else(|| node.attribute("href"))
        .and_then(|h| h.strip_prefix('#'))
}

fn points(node: Node) -> Vec<Point> {
    svgtypes::PointsParser::from(node.attribute("points").unwrap_or_default())
        .map(|(x, y)| Point::new(x, y))
        .collect()
}

fn rgba(c: svgtypes::Color) -> Rgba {
    Rgba { r: c.red, g: c.green, b: c.blue, a: c.alpha }
}
