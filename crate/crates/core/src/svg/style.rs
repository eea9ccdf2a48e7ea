use serde::{Deserialize, Serialize};

/// 8-bit sRGB color with straight alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgba {
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub a: u8,
}

impl Rgba {
    pub const BLACK: Rgba = Rgba::opaque(0, 0, 0);
    pub const WHITE: Rgba = Rgba::opaque(255, 255, 255);

    pub const fn opaque(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b, a: 255 }
    }
}

/// A paint value as written on an element.
#[derive(Debug, Clone, PartialEq)]
pub enum DeclaredPaint {
    None,
    Color(Rgba),
    CurrentColor,
    /// `url(#id)` reference to a gradient.
    Server(String),
}

/// A paint value after `currentColor` has been resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum Paint {
    None,
    Color(Rgba),
    Server(String),
}

impl Paint {
    pub fn is_none(&self) -> bool {
        matches!(self, Paint::None)
    }

    pub fn server_id(&self) -> Option<&str> {
        match self {
            Paint::Server(id) => Some(id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FillRule {
    #[default]
    NonZero,
    EvenOdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LineCap {
    #[default]
    Butt,
    Round,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LineJoin {
    #[default]
    Miter,
    Round,
    Bevel,
}

/// Presentation properties specified directly on one element, either as
/// attributes or inside its `style` attribute. `None` means "not specified".
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StyleDecl {
    pub fill: Option<DeclaredPaint>,
    pub stroke: Option<DeclaredPaint>,
    pub stroke_width: Option<f64>,
    pub opacity: Option<f64>,
    pub fill_opacity: Option<f64>,
    pub stroke_opacity: Option<f64>,
    pub fill_rule: Option<FillRule>,
    pub clip_rule: Option<FillRule>,
    pub stroke_linecap: Option<LineCap>,
    pub stroke_linejoin: Option<LineJoin>,
    pub stroke_miterlimit: Option<f64>,
    pub color: Option<Rgba>,
    pub visible: Option<bool>,
}

impl StyleDecl {
    pub fn is_empty(&self) -> bool {
        *self == StyleDecl::default()
    }

    /// Applies every numeric field through `f` (used by precision rounding).
    pub fn map_numbers(&mut self, mut f: impl FnMut(f64) -> f64) {
        for v in [
            &mut self.stroke_width,
            &mut self.opacity,
            &mut self.fill_opacity,
            &mut self.stroke_opacity,
            &mut self.stroke_miterlimit,
        ]
        .into_iter()
        .flatten()
        {
            *v = f(*v);
        }
    }
}

/// Effective style of an element after inheritance.
///
/// `opacity` is not inherited: it is the element's own group opacity. All
/// other properties take the nearest ancestor's specified value or the
/// initial value.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedStyle {
    pub fill: Paint,
    pub stroke: Paint,
    pub stroke_width: f64,
    pub opacity: f64,
    pub fill_opacity: f64,
    pub stroke_opacity: f64,
    pub fill_rule: FillRule,
    pub clip_rule: FillRule,
    pub stroke_linecap: LineCap,
    pub stroke_linejoin: LineJoin,
    pub stroke_miterlimit: f64,
    pub color: Rgba,
    pub visible: bool,
}

impl Default for ResolvedStyle {
    fn default() -> Self {
        Self {
            fill: Paint::Color(Rgba::BLACK),
            stroke: Paint::None,
            stroke_width: 1.0,
            opacity: 1.0,
            fill_opacity: 1.0,
            stroke_opacity: 1.0,
            fill_rule: FillRule::NonZero,
            clip_rule: FillRule::NonZero,
            stroke_linecap: LineCap::Butt,
            stroke_linejoin: LineJoin::Miter,
            stroke_miterlimit: 4.0,
            color: Rgba::BLACK,
            visible: true,
        }
    }
}

impl ResolvedStyle {
    /// Computes the style of an element with declarations `decl` whose
    /// parent resolved to `parent`.
    pub fn resolve(decl: &StyleDecl, parent: &ResolvedStyle) -> ResolvedStyle {
        let color = decl.color.unwrap_or(parent.color);
        let paint = |d: &Option<DeclaredPaint>, inherited: &Paint| match d {
            None => inherited.clone(),
            Some(DeclaredPaint::None) => Paint::None,
            Some(DeclaredPaint::Color(c)) => Paint::Color(*c),
            Some(DeclaredPaint::CurrentColor) => Paint::Color(color),
            Some(DeclaredPaint::Server(id)) => Paint::Server(id.clone()),
        };
        ResolvedStyle {
            fill: paint(&decl.fill, &parent.fill),
            stroke: paint(&decl.stroke, &parent.stroke),
            stroke_width: decl.stroke_width.unwrap_or(parent.stroke_width),
            opacity: decl.opacity.unwrap_or(1.0),
            fill_opacity: decl.fill_opacity.unwrap_or(parent.fill_opacity),
            stroke_opacity: decl.stroke_opacity.unwrap_or(parent.stroke_opacity),
            fill_rule: decl.fill_rule.unwrap_or(parent.fill_rule),
            clip_rule: decl.clip_rule.unwrap_or(parent.clip_rule),
            stroke_linecap: decl.stroke_linecap.unwrap_or(parent.stroke_linecap),
            stroke_linejoin: decl.stroke_linejoin.unwrap_or(parent.stroke_linejoin),
            stroke_miterlimit: decl.stroke_miterlimit.unwrap_or(parent.stroke_miterlimit),
            color,
            visible: decl.visible.unwrap_or(parent.visible),
        }
    }

    /// Declarations that reproduce this style on an element whose parent has
    /// the initial style. `currentColor` is already folded into colors.
    pub fn to_declarations(&self) -> StyleDecl {
        let d = ResolvedStyle::default();
        let paint = |p: &Paint, init: &Paint| {
            (p != init).then(|| match p {
                Paint::None => DeclaredPaint::None,
                Paint::Color(c) => DeclaredPaint::Color(*c),
                Paint::Server(id) => DeclaredPaint::Server(id.clone()),
            })
        };
        let differs = |v: f64, init: f64| (v != init).then_some(v);
        StyleDecl {
            fill: paint(&self.fill, &d.fill),
            stroke: paint(&self.stroke, &d.stroke),
            stroke_width: differs(self.stroke_width, d.stroke_width),
            opacity: differs(self.opacity, d.opacity),
            fill_opacity: differs(self.fill_opacity, d.fill_opacity),
            stroke_opacity: differs(self.stroke_opacity, d.stroke_opacity),
            fill_rule: (self.fill_rule != d.fill_rule).then_some(self.fill_rule),
            clip_rule: (self.clip_rule != d.clip_rule).then_some(self.clip_rule),
            stroke_linecap: (self.stroke_linecap != d.stroke_linecap).then_some(self.stroke_linecap),
            stroke_linejoin: (self.stroke_linejoin != d.stroke_linejoin)
                .then_some(self.stroke_linejoin),
            stroke_miterlimit: differs(self.stroke_miterlimit, d.stroke_miterlimit),
            color: None,
            visible: (!self.visible).then_some(false),
        }
    }

    pub fn has_visible_stroke(&self) -> bool {
        !self.stroke.is_none() && self.stroke_width > 0.0
    }
}
