//! Randomized properties of parsing, style resolution and serialization.

use proptest::prelude::*;
use stepsvg_core::svg::{normalize, parse_svg, serialize, FillRule, LineCap, Paint, ResolvedStyle, Rgba, SvgDocument};

const COLORS: &[(&str, Rgba)] = &[
    ("red", Rgba::opaque(255, 0, 0)),
    ("#123456", Rgba::opaque(0x12, 0x34, 0x56)),
    ("#abc", Rgba::opaque(0xaa, 0xbb, 0xcc)),
    ("rgb(10,20,30)", Rgba::opaque(10, 20, 30)),
    ("teal", Rgba::opaque(0, 128, 128)),
];

#[derive(Debug, Clone, Default)]
struct Props {
    fill: Option<Option<usize>>,
    stroke: Option<Option<usize>>,
    stroke_width: Option<f64>,
    evenodd: Option<bool>,
    fill_opacity: Option<f64>,
    opacity: Option<f64>,
    linecap: Option<usize>,
    in_style_attr: bool,
}

#[derive(Debug, Clone)]
enum Tree {
    Leaf(usize, Props),
    Group(Props, Vec<Tree>),
}

const CAPS: &[(&str, LineCap)] = &[("butt", LineCap::Butt), ("round", LineCap::Round), ("square", LineCap::Square)];

fn props() -> impl Strategy<Value = Props> {
    let paint = || proptest::option::weighted(0.3, proptest::option::weighted(0.8, 0..COLORS.len()));
    let num = |lo: f64, hi: f64| proptest::option::weighted(0.2, (lo..hi).prop_map(|v| (v * 1000.0).round() / 1000.0));
    (
        paint(),
        paint(),
        num(0.0, 5.0),
        proptest::option::weighted(0.2, any::<bool>()),
        num(0.0, 1.0),
        num(0.0, 1.0),
        proptest::option::weighted(0.2, 0..CAPS.len()),
        any::<bool>(),
    )
        .prop_map(|(fill, stroke, stroke_width, evenodd, fill_opacity, opacity, linecap, in_style_attr)| Props {
            fill,
            stroke,
            stroke_width,
            evenodd,
            fill_opacity,
            opacity,
            linecap,
            in_style_attr,
        })
}

fn tree() -> impl Strategy<Value = Tree> {
    let leaf = (0..5usize, props()).prop_map(|(k, p)| Tree::Leaf(k, p));
    // Depth at most 8: seven group levels above a leaf.
    leaf.prop_recursive(7, 48, 4, |inner| {
        (props(), prop::collection::vec(inner, 1..4)).prop_map(|(p, c)| Tree::Group(p, c))
    })
}

fn attrs(p: &Props) -> String {
    let mut decls: Vec<(&str, String)> = Vec::new();
    let paint = |v: Option<usize>| v.map_or("none".to_owned(), |i| COLORS[i].0.to_owned());
    if let Some(v) = p.fill {
        decls.push(("fill", paint(v)));
    }
    if let Some(v) = p.stroke {
        decls.push(("stroke", paint(v)));
    }
    if let Some(v) = p.stroke_width {
        decls.push(("stroke-width", v.to_string()));
    }
    if let Some(v) = p.evenodd {
        decls.push(("fill-rule", if v { "evenodd" } else { "nonzero" }.to_owned()));
    }
    if let Some(v) = p.fill_opacity {
        decls.push(("fill-opacity", v.to_string()));
    }
    if let Some(v) = p.opacity {
        decls.push(("opacity", v.to_string()));
    }
    if let Some(v) = p.linecap {
        decls.push(("stroke-linecap", CAPS[v].0.to_owned()));
    }
    if p.in_style_attr && !decls.is_empty() {
        let body: Vec<String> = decls.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        format!(" style=\"{}\"", body.join(";"))
    } else {
        decls.iter().map(|(k, v)| format!(" {k}=\"{v}\"")).collect()
    }
}

const SHAPES: &[&str] = &[
    "<rect x=\"1\" y=\"2\" width=\"3\" height=\"4\"",
    "<circle cx=\"5\" cy=\"5\" r=\"2\"",
    "<ellipse cx=\"4\" cy=\"6\" rx=\"2\" ry=\"1\"",
    "<path d=\"M1 1L8 2L4 9z\"",
    "<polygon points=\"1,1 9,1 5,8\"",
];

/// Writes the tree as SVG and, alongside, the style each leaf must resolve
/// to, computed by walking the tree directly.
fn emit(t: &Tree, parent: &ResolvedStyle, out: &mut String, expected: &mut Vec<(String, ResolvedStyle)>) {
    let (p, children) = match t {
        Tree::Leaf(_, p) | Tree::Group(p, _) => (p, if let Tree::Group(_, c) = t { c.as_slice() } else { &[] }),
    };
    let paint = |v: Option<usize>| v.map_or(Paint::None, |i| Paint::Color(COLORS[i].1));
    let mut s = parent.clone();
    s.opacity = p.opacity.unwrap_or(1.0);
    if let Some(v) = p.fill {
        s.fill = paint(v);
    }
    if let Some(v) = p.stroke {
        s.stroke = paint(v);
    }
    if let Some(v) = p.stroke_width {
        s.stroke_width = v;
    }
    if let Some(v) = p.evenodd {
        s.fill_rule = if v { FillRule::EvenOdd } else { FillRule::NonZero };
    }
    if let Some(v) = p.fill_opacity {
        s.fill_opacity = v;
    }
    if let Some(v) = p.linecap {
        s.stroke_linecap = CAPS[v].1;
    }
    match t {
        Tree::Leaf(k, _) => {
            let id = format!("n{}", expected.len());
            out.push_str(&format!("{} id=\"{id}\"{}/>", SHAPES[*k], attrs(p)));
            expected.push((id, s));
        }
        Tree::Group(..) => {
            out.push_str(&format!("<g{}>", attrs(p)));
            for c in children {
                emit(c, &s, out, expected);
            }
            out.push_str("</g>");
        }
    }
}

fn document(t: &Tree) -> (String, Vec<(String, ResolvedStyle)>) {
    let mut body = String::new();
    let mut expected = Vec::new();
    emit(t, &ResolvedStyle::default(), &mut body, &mut expected);
    (format!("<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 10 10\">{body}</svg>"), expected)
}

fn structural(mut d: SvgDocument) -> SvgDocument {
    d.source_bytes = 0;
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn resolved_style_is_nearest_declared_value(t in tree()) {
        let (text, expected) = document(&t);
        let doc = parse_svg(text.as_bytes()).unwrap();
        let leaves: Vec<_> = doc.primitives().collect();
        prop_assert_eq!(leaves.len(), expected.len());
        for (node, (id, style)) in leaves.iter().zip(&expected) {
            prop_assert_eq!(node.id.as_deref(), Some(id.as_str()), "paint order");
            prop_assert_eq!(&node.style, style, "{}", id);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn round_trip_is_structurally_equal(t in tree()) {
        let (text, _) = document(&t);
        let doc = normalize(&parse_svg(text.as_bytes()).unwrap());
        let bytes = serialize(&doc);
        let back = parse_svg(bytes.as_bytes()).unwrap();
        prop_assert_eq!(structural(back.clone()), structural(doc));
        prop_assert_eq!(serialize(&back), bytes);
    }
}
