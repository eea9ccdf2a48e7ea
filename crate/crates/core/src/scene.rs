//! Depth-first walk over a document's render tree with `use` instances
//! expanded, transforms composed and styles resolved at each visit.

use std::collections::HashSet;

use crate::geom::Transform;
use crate::svg::{NodeKind, ResolvedStyle, SvgDocument, SvgNode};

/// A clip path applied in the user space of the element that referenced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipInstance {
    pub clip_id: String,
    /// User-space-to-root transform of the referencing element.
    pub ctm: Transform,
}

/// A primitive reached by the walk.
#[derive(Debug, Clone)]
pub struct Leaf {
    /// The primitive with its style resolved through the instantiated
    /// ancestry (including `use` sites). `transform` is the element's own.
    pub node: SvgNode,
    /// Composed transform including the element's own.
    pub ctm: Transform,
    /// Clip paths of the element and its ancestors, outermost first.
    pub clips: Vec<ClipInstance>,
    /// Child indices from the root, with `use` expansions continuing the
    /// path into the referenced subtree.
    pub provenance: Vec<usize>,
    /// Product of the `opacity` of all ancestor groups and `use` elements.
    pub inherited_opacity: f64,
}

pub enum SceneEvent {
    /// Start of a group or `use` with opacity below 1: its content is
    /// composited as one layer.
    PushLayer(f64),
    Leaf(Leaf),
    PopLayer,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("cyclic reference through #{0}")]
    CyclicReference(String),
    #[error("dangling reference to #{0}")]
    DanglingReference(String),
}

/// Visits the document in paint order. Invisible leaves (`visibility:
/// hidden`) and leaves under a non-invertible transform are skipped.
pub fn walk(doc: &SvgDocument, mut visit: impl FnMut(SceneEvent)) -> Result<(), SceneError> {
    let mut walker = Walker { doc, active_uses: HashSet::new(), visit: &mut visit };
    let root_style = ResolvedStyle::resolve(&doc.root.declared, &ResolvedStyle::default());
    let mut ctx = Ctx {
        ctm: doc.root.transform,
        style: root_style,
        clips: Vec::new(),
        path: Vec::new(),
        opacity: 1.0,
    };
    if let Some(c) = &doc.root.clip_path {
        ctx.clips.push(ClipInstance { clip_id: c.clone(), ctm: ctx.ctm });
    }
    let layered = ctx.style.opacity < 1.0;
    if layered {
        (walker.visit)(SceneEvent::PushLayer(ctx.style.opacity));
        ctx.opacity = ctx.style.opacity;
    }
    for (i, child) in doc.root.children.iter().enumerate() {
        walker.node(child, &ctx, i)?;
    }
    if layered {
        (walker.visit)(SceneEvent::PopLayer);
    }
    Ok(())
}

struct Ctx {
    ctm: Transform,
    style: ResolvedStyle,
    clips: Vec<ClipInstance>,
    path: Vec<usize>,
    opacity: f64,
}

struct Walker<'d, 'v, F: FnMut(SceneEvent)> {
    doc: &'d SvgDocument,
    active_uses: HashSet<String>,
    visit: &'v mut F,
}

impl<F: FnMut(SceneEvent)> Walker<'_, '_, F> {
    fn node(&mut self, node: &SvgNode, parent: &Ctx, index: usize) -> Result<(), SceneError> {
        let style = ResolvedStyle::resolve(&node.declared, &parent.style);
        let ctm = parent.ctm.then_inner(&node.transform);
        let mut path = parent.path.clone();
        path.push(index);
        let mut clips = parent.clips.clone();
        if let Some(c) = &node.clip_path {
            clips.push(ClipInstance { clip_id: c.clone(), ctm });
        }

        if node.kind.is_primitive() {
            if !style.visible || ctm.invert().is_none() {
                return Ok(());
            }
            let mut leaf = node.clone();
            leaf.style = style;
            leaf.children.clear();
            (self.visit)(SceneEvent::Leaf(Leaf {
                node: leaf,
                ctm,
                clips,
                provenance: path,
                inherited_opacity: parent.opacity,
            }));
            return Ok(());
        }

        let layered = style.opacity < 1.0;
        let mut ctx = Ctx { ctm, style, clips, path, opacity: parent.opacity };
        if layered {
            ctx.opacity *= ctx.style.opacity;
            (self.visit)(SceneEvent::PushLayer(ctx.style.opacity));
        }
        match &node.kind {
            NodeKind::Use(u) => {
                let target = self
                    .doc
                    .find_node(&u.href)
                    .ok_or_else(|| SceneError::DanglingReference(u.href.clone()))?;
                if !self.active_uses.insert(u.href.clone()) {
                    return Err(SceneError::CyclicReference(u.href.clone()));
                }
                ctx.ctm = ctx.ctm.then_inner(&Transform::translate(u.x, u.y));
                self.node(target, &ctx, 0)?;
                self.active_uses.remove(&u.href);
            }
            _ => {
                for (i, child) in node.children.iter().enumerate() {
                    self.node(child, &ctx, i)?;
                }
            }
        }
        if layered {
            (self.visit)(SceneEvent::PopLayer);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svg::parse_svg;

    fn leaves(src: &str) -> Result<Vec<Leaf>, SceneError> {
        let doc = parse_svg(src.as_bytes()).unwrap();
        let mut out = Vec::new();
        walk(&doc, |e| {
            if let SceneEvent::Leaf(l) = e {
                out.push(l)
            }
        })?;
        Ok(out)
    }

    #[test]
    fn use_instantiates_with_use_site_style() {
        let l = leaves(
            r##"<svg viewBox="0 0 10 10"><defs><circle id="c" r="1"/></defs><use href="#c" x="3" fill="red"/><use href="#c" y="2"/></svg>"##,
        )
        .unwrap();
        assert_eq!(l.len(), 2);
        assert_eq!(l[0].ctm, Transform::translate(3.0, 0.0));
        assert_eq!(l[0].node.style.fill, crate::svg::Paint::Color(crate::svg::Rgba::opaque(255, 0, 0)));
        assert_eq!(l[1].node.style.fill, crate::svg::Paint::Color(crate::svg::Rgba::BLACK));
    }

    #[test]
    fn use_cycle_is_detected() {
        let err = leaves(r##"<svg viewBox="0 0 10 10"><g id="a"><use href="#a"/></g></svg>"##).unwrap_err();
        assert_eq!(err, SceneError::CyclicReference("a".into()));
    }

    #[test]
    fn hidden_and_singular_leaves_are_skipped() {
        let l = leaves(
            r#"<svg viewBox="0 0 10 10"><rect width="1" height="1" visibility="hidden"/><rect width="1" height="1" transform="scale(0)"/><g visibility="hidden"><rect width="1" height="1" visibility="visible"/></g></svg>"#,
        )
        .unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l[0].provenance, vec![2, 0]);
    }
}
