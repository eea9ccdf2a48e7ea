//! SVG document model: parsing, normalization and canonical serialization.
//!
//! Parsing resolves the inherited presentation properties of every element,
//! hoists paint servers and clip paths into document-level tables, and
//! rejects features the reconstruction pipeline cannot represent.

mod normalize;
mod number;
mod parse;
mod path;
mod serialize;
mod style;

use std::collections::BTreeMap;

pub use normalize::{normalize, normalize_with, NormalizeOptions};
pub use number::{format_number, round_half_even};
pub use parse::parse_svg;
pub use path::{PathCmd, PathData};
pub use serialize::{
    color_text, path_text, serialize, serialize_node, svg_length, transform_text, write_clip_path, write_defs,
    write_gradient, write_node,
};
pub use style::{
    DeclaredPaint, FillRule, LineCap, LineJoin, Paint, ResolvedStyle, Rgba, StyleDecl,
};

use crate::geom::{Point, Transform};

pub const SVG_NS: &str = "http://www.w3.org/2000/svg";
pub const XLINK_NS: &str = "http://www.w3.org/1999/xlink";

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SvgError {
    #[error("input is not valid UTF-8")]
    InvalidUtf8,
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("root element is <{0}>, expected <svg>")]
    NotSvg(String),
    #[error("unsupported features: {}", .0.join(", "))]
    UnsupportedFeature(Vec<String>),
    #[error("dangling reference to #{0}")]
    DanglingReference(String),
    #[error("invalid {attribute}={value:?} on <{element}>")]
    InvalidAttribute { element: String, attribute: String, value: String },
    #[error("viewBox is missing or has non-positive width or height")]
    InvalidViewBox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectGeom {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
    /// Effective corner radii after the auto/clamping rules.
    pub rx: f64,
    pub ry: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UseRef {
    pub href: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Group,
    Path(PathData),
    Rect(RectGeom),
    Circle { cx: f64, cy: f64, r: f64 },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    Line { x1: f64, y1: f64, x2: f64, y2: f64 },
    Polyline(Vec<Point>),
    Polygon(Vec<Point>),
    Use(UseRef),
}

impl NodeKind {
    pub fn tag(&self) -> &'static str {
        match self {
            NodeKind::Group => "g",
            NodeKind::Path(_) => "path",
            NodeKind::Rect(_) => "rect",
            NodeKind::Circle { .. } => "circle",
            NodeKind::Ellipse { .. } => "ellipse",
            NodeKind::Line { .. } => "line",
            NodeKind::Polyline(_) => "polyline",
            NodeKind::Polygon(_) => "polygon",
            NodeKind::Use(_) => "use",
        }
    }

    /// Leaf elements that paint pixels directly.
    pub fn is_primitive(&self) -> bool {
        !matches!(self, NodeKind::Group | NodeKind::Use(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgNode {
    pub id: Option<String>,
    pub kind: NodeKind,
    pub transform: Transform,
    /// Properties written on this element.
    pub declared: StyleDecl,
    /// Effective properties after inheritance from the element's parent.
    pub style: ResolvedStyle,
    pub clip_path: Option<String>,
    pub children: Vec<SvgNode>,
}

impl SvgNode {
    pub fn new(kind: NodeKind) -> Self {
        Self {
            id: None,
            kind,
            transform: Transform::IDENTITY,
            declared: StyleDecl::default(),
            style: ResolvedStyle::default(),
            clip_path: None,
            children: Vec::new(),
        }
    }

    /// Recomputes resolved styles of this subtree from declarations.
    pub fn resolve_styles(&mut self, parent: &ResolvedStyle) {
        self.style = ResolvedStyle::resolve(&self.declared, parent);
        let style = self.style.clone();
        for c in &mut self.children {
            c.resolve_styles(&style);
        }
    }

    /// Pre-order traversal over this node and all descendants.
    pub fn descendants(&self) -> impl Iterator<Item = &SvgNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(node)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Units {
    #[default]
    ObjectBoundingBox,
    UserSpaceOnUse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpreadMethod {
    #[default]
    Pad,
    Reflect,
    Repeat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientStop {
    pub offset: f64,
    /// Opaque stop color; `opacity` carries `stop-opacity`.
    pub color: Rgba,
    pub opacity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientShape {
    Linear { x1: f64, y1: f64, x2: f64, y2: f64 },
    Radial { cx: f64, cy: f64, r: f64, fx: f64, fy: f64 },
}

/// A linear or radial gradient with any `href` template chain already merged.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub id: String,
    pub shape: GradientShape,
    pub units: Units,
    pub transform: Transform,
    pub spread: SpreadMethod,
    pub stops: Vec<GradientStop>,
}

pub const MAX_GRADIENT_STOPS: usize = 16;

/// A `clipPath` in `userSpaceOnUse` units. Children are primitives whose
/// union (each filled with its own clip rule) forms the clip region.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipPath {
    pub id: String,
    pub transform: Transform,
    pub children: Vec<SvgNode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgDocument {
    pub view_box: ViewBox,
    pub width: Option<f64>,
    pub height: Option<f64>,
    /// The `<svg>` element itself, as a group holding the render tree.
    pub root: SvgNode,
    pub gradients: BTreeMap<String, Gradient>,
    pub clip_paths: BTreeMap<String, ClipPath>,
    /// Renderable content of `<defs>` blocks, reachable only through `use`.
    pub defs: Vec<SvgNode>,
    /// Size of the input this document was parsed from.
    pub source_bytes: usize,
}

impl SvgDocument {
    /// Looks up an element that a `use` may reference: `<defs>` content
    /// first, then the render tree.
    pub fn find_node(&self, id: &str) -> Option<&SvgNode> {
        self.defs
            .iter()
            .flat_map(SvgNode::descendants)
            .chain(self.root.descendants())
            .find(|n| n.id.as_deref() == Some(id))
    }

    /// Recomputes every resolved style after declarations changed.
    pub fn resolve_styles(&mut self) {
        self.root.resolve_styles(&ResolvedStyle::default());
        let root = self.root.style.clone();
        for n in &mut self.defs {
            n.resolve_styles(&root);
        }
        for clip in self.clip_paths.values_mut() {
            for n in &mut clip.children {
                n.resolve_styles(&ResolvedStyle::default());
            }
        }
    }

    /// Primitive elements of the render tree in document (paint) order,
    /// without expanding `use`.
    pub fn primitives(&self) -> impl Iterator<Item = &SvgNode> {
        self.root.descendants().filter(|n| n.kind.is_primitive())
    }
}
