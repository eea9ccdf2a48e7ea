//! Flattening of a document into self-contained primitive steps whose
//! cumulative rendering reproduces the original.

use std::collections::{BTreeMap, BTreeSet};

use crate::geom::Transform;
use crate::raster::{self, RasterError, RasterImage, Resources};
use crate::scene::{walk, SceneError, SceneEvent};
use crate::svg::{
    self, ClipPath, Gradient, NodeKind, ResolvedStyle, SvgDocument, SvgNode, ViewBox, SVG_NS,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReconstructError {
    #[error("cyclic reference through #{0}")]
    CyclicReference(String),
    #[error("dangling reference to #{0}")]
    DanglingReference(String),
    #[error("document has no visible primitive")]
    EmptyDocument,
    #[error("every step leaves the canvas unchanged")]
    AllInvisible,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Render(#[from] RasterError),
}

impl From<SceneError> for ReconstructError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::CyclicReference(id) => ReconstructError::CyclicReference(id),
            SceneError::DanglingReference(id) => ReconstructError::DanglingReference(id),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderStep {
    /// 1-based position in the sequence.
    pub index: usize,
    /// The primitive with `transform` set to its composed transform,
    /// `declared` equal to its complete resolved style, no id, and
    /// `clip_path` naming a clip in the owning sequence.
    pub primitive: SvgNode,
    /// Canonical text of the element preceded by a `<defs>` holding any
    /// gradient or clip path it references.
    pub fragment: String,
    /// Child indices from the document root to the source element.
    pub provenance: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSequence {
    pub view_box: ViewBox,
    pub width: Option<f64>,
    pub height: Option<f64>,
    pub gradients: BTreeMap<String, Gradient>,
    /// Clip paths expressed in the user space of the steps using them.
    pub clip_paths: BTreeMap<String, ClipPath>,
    pub steps: Vec<RenderStep>,
}

impl StepSequence {
    pub fn n(&self) -> usize {
        self.steps.len()
    }

    pub fn resources(&self) -> Resources<'_> {
        Resources { gradients: &self.gradients, clip_paths: &self.clip_paths }
    }

    /// The steps as a flat document in the source viewBox.
    pub fn to_document(&self) -> SvgDocument {
        let mut root = SvgNode::new(NodeKind::Group);
        root.children = self.steps.iter().map(|s| s.primitive.clone()).collect();
        let mut doc = SvgDocument {
            view_box: self.view_box,
            width: self.width,
            height: self.height,
            root,
            gradients: self.gradients.clone(),
            clip_paths: self.clip_paths.clone(),
            defs: Vec::new(),
            source_bytes: 0,
        };
        doc.resolve_styles();
        doc.source_bytes = svg::svg_length(&doc);
        doc
    }

    /// Standalone document text showing only step `position` (0-based).
    pub fn fragment_document(&self, position: usize) -> String {
        let vb = self.view_box;
        format!(
            "<svg xmlns=\"{SVG_NS}\" viewBox=\"{} {} {} {}\">{}</svg>",
            svg::format_number(vb.x),
            svg::format_number(vb.y),
            svg::format_number(vb.width),
            svg::format_number(vb.height),
            self.steps[position].fragment
        )
    }

    fn renumber(&mut self) {
        for (i, s) in self.steps.iter_mut().enumerate() {
            s.index = i + 1;
        }
    }
}

/// Flattens the render tree depth-first into primitive steps.
///
/// Each leaf gets its composed transform and resolved style. Ancestor group
/// opacity is folded into the leaf's opacity, which is exact unless the
/// group's children overlap. A clip path on the leaf or an ancestor is
/// re-expressed in the leaf's user space; more than one clip in effect is
/// unsupported.
pub fn flatten(doc: &SvgDocument) -> Result<StepSequence, ReconstructError> {
    let mut leaves = Vec::new();
    walk(doc, |e| {
        if let SceneEvent::Leaf(l) = e {
            leaves.push(l);
        }
    })?;

    let mut taken_ids: BTreeSet<String> = doc.clip_paths.keys().cloned().collect();
    taken_ids.extend(doc.gradients.keys().cloned());
    taken_ids.extend(doc.root.descendants().filter_map(|n| n.id.clone()));
    let mut clip_paths: BTreeMap<String, ClipPath> = BTreeMap::new();
    let mut gradients: BTreeMap<String, Gradient> = BTreeMap::new();
    let mut steps = Vec::new();

    for leaf in leaves {
        let mut node = leaf.node;
        let mut style = node.style.clone();
        style.opacity *= leaf.inherited_opacity;
        if paints_nothing(&node, &style) {
            continue;
        }
        let clip = match leaf.clips.as_slice() {
            [] => None,
            [inst] => {
                let src = doc
                    .clip_paths
                    .get(&inst.clip_id)
                    .ok_or_else(|| ReconstructError::DanglingReference(inst.clip_id.clone()))?;
                let transform = if inst.ctm == leaf.ctm {
                    src.transform
                } else {
                    let inv = leaf.ctm.invert().expect("walk skips singular transforms");
                    inv.then_inner(&inst.ctm).then_inner(&src.transform)
                };
                Some(intern_clip(src, transform, &mut clip_paths, &mut taken_ids))
            }
            _ => return Err(ReconstructError::Unsupported("nested clip paths".into())),
        };
        for id in [style.fill.server_id(), style.stroke.server_id()].into_iter().flatten() {
            let g = doc.gradients.get(id).ok_or_else(|| ReconstructError::DanglingReference(id.to_owned()))?;
            gradients.insert(id.to_owned(), g.clone());
        }
        node.id = None;
        node.transform = leaf.ctm;
        node.declared = style.to_declarations();
        node.style = style;
        node.clip_path = clip;
        steps.push(RenderStep { index: 0, fragment: String::new(), primitive: node, provenance: leaf.provenance });
    }
    if steps.is_empty() {
        return Err(ReconstructError::EmptyDocument);
    }
    let mut seq = StepSequence {
        view_box: doc.view_box,
        width: doc.width,
        height: doc.height,
        gradients,
        clip_paths,
        steps,
    };
    for i in 0..seq.steps.len() {
        seq.steps[i].fragment = step_fragment(&seq.steps[i], &seq);
    }
    seq.renumber();
    Ok(seq)
}

fn paints_nothing(node: &SvgNode, style: &ResolvedStyle) -> bool {
    let fill = !style.fill.is_none() && !matches!(node.kind, NodeKind::Line { .. });
    !fill && !style.has_visible_stroke()
}

/// Returns the id of a clip equal to `src` under `transform`, adding one
/// when none exists yet.
fn intern_clip(
    src: &ClipPath,
    transform: Transform,
    clips: &mut BTreeMap<String, ClipPath>,
    taken: &mut BTreeSet<String>,
) -> String {
    if let Some((id, _)) = clips.iter().find(|(_, c)| c.transform == transform && c.children == src.children) {
        return id.clone();
    }
    let id = if transform == src.transform && !clips.contains_key(&src.id) {
        src.id.clone()
    } else {
        (1..).map(|k| format!("{}-{k}", src.id)).find(|c| !taken.contains(c)).expect("unbounded")
    };
    taken.insert(id.clone());
    clips.insert(id.clone(), ClipPath { id: id.clone(), transform, children: src.children.clone() });
    id
}

/// Canonical text of one step: a `<defs>` with the gradients and clip path
/// it references (if any), then the element.
pub fn step_fragment(step: &RenderStep, seq: &StepSequence) -> String {
    let node = &step.primitive;
    let mut ids: Vec<&str> = [node.style.fill.server_id(), node.style.stroke.server_id()].into_iter().flatten().collect();
    ids.sort_unstable();
    ids.dedup();
    let gradients = ids.into_iter().filter_map(|id| seq.gradients.get(id));
    let clips = node.clip_path.as_deref().and_then(|id| seq.clip_paths.get(id));
    let mut out = String::new();
    svg::write_defs(&mut out, gradients, clips, &[]);
    svg::write_node(&mut out, node);
    out
}

/// Removes steps that change no pixel at their insertion point, given the
/// frames I₁…Iₙ produced by `render_prefixes`. Steps hidden only by later
/// steps are kept.
pub fn prune_invisible<E>(
    seq: &StepSequence,
    render_prefixes: impl FnOnce(&StepSequence) -> Result<Vec<RasterImage>, E>,
) -> Result<StepSequence, PruneError<E>> {
    let frames = render_prefixes(seq).map_err(PruneError::Render)?;
    let Some(first) = frames.first() else { return Err(PruneError::Reconstruct(ReconstructError::EmptyDocument)) };
    let blank = RasterImage::white(first.width, first.height);
    let mut keep = Vec::with_capacity(seq.steps.len());
    for (i, frame) in frames.iter().enumerate() {
        let prev = if i == 0 { &blank } else { &frames[i - 1] };
        if frame != prev {
            keep.push(i);
        }
    }
    if keep.is_empty() {
        return Err(PruneError::Reconstruct(ReconstructError::AllInvisible));
    }
    let mut out = seq.clone();
    out.steps = keep.into_iter().map(|i| seq.steps[i].clone()).collect();
    out.renumber();
    let used_clips: BTreeSet<&str> = out.steps.iter().filter_map(|s| s.primitive.clip_path.as_deref()).collect();
    out.clip_paths.retain(|id, _| used_clips.contains(id.as_str()));
    let used_servers: BTreeSet<&str> = out
        .steps
        .iter()
        .flat_map(|s| [s.primitive.style.fill.server_id(), s.primitive.style.stroke.server_id()])
        .flatten()
        .collect();
    out.gradients.retain(|id, _| used_servers.contains(id.as_str()));
    Ok(out)
}

/// [`prune_invisible`] with the built-in renderer at `size`.
pub fn prune_invisible_at(seq: &StepSequence, size: u32) -> Result<StepSequence, ReconstructError> {
    prune_invisible(seq, |s| raster::render_prefixes(s, size)).map_err(|e| match e {
        PruneError::Render(r) => ReconstructError::Render(r),
        PruneError::Reconstruct(r) => r,
    })
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PruneError<E> {
    #[error("renderer failed: {0:?}")]
    Render(E),
    #[error(transparent)]
    Reconstruct(ReconstructError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svg::parse_svg;

    fn seq(src: &str) -> StepSequence {
        flatten(&parse_svg(src.as_bytes()).unwrap()).unwrap()
    }

    #[test]
    fn group_transform_is_composed() {
        let s = seq(r#"<svg viewBox="0 0 20 20"><g transform="translate(10,0)"><rect x="0" y="0" width="2" height="2"/></g></svg>"#);
        assert_eq!(s.n(), 1);
        assert_eq!(s.steps[0].primitive.transform, Transform::translate(10.0, 0.0));
        assert_eq!(s.steps[0].fragment, r#"<rect height="2" width="2" x="0" y="0" transform="translate(10 0)"/>"#);
        assert_eq!(s.steps[0].index, 1);
    }

    #[test]
    fn gradient_is_inlined_into_fragment() {
        let s = seq(
            r##"<svg viewBox="0 0 10 10"><defs><linearGradient id="g"><stop offset="0" stop-color="red"/><stop offset="1" stop-color="blue"/></linearGradient></defs><circle cx="5" cy="5" r="3" fill="url(#g)"/></svg>"##,
        );
        assert_eq!(s.n(), 1);
        let f = &s.steps[0].fragment;
        assert!(f.starts_with("<defs><linearGradient id=\"g\""), "{f}");
        assert!(f.ends_with(r##"<circle cx="5" cy="5" r="3" fill="url(#g)"/>"##), "{f}");
    }

    #[test]
    fn unpainted_and_empty_documents() {
        let err = flatten(&parse_svg(br#"<svg viewBox="0 0 10 10"><rect width="2" height="2" fill="none"/></svg>"#).unwrap())
            .unwrap_err();
        assert_eq!(err, ReconstructError::EmptyDocument);
    }

    #[test]
    fn group_opacity_folds_into_leaves() {
        let s = seq(r#"<svg viewBox="0 0 10 10"><g opacity=".5"><rect width="2" height="2" opacity=".5"/></g></svg>"#);
        assert_eq!(s.steps[0].primitive.style.opacity, 0.25);
    }

    #[test]
    fn nested_clips_are_unsupported() {
        let doc = parse_svg(
            br##"<svg viewBox="0 0 10 10"><clipPath id="a"><rect width="5" height="5"/></clipPath><g clip-path="url(#a)"><rect width="9" height="9" clip-path="url(#a)"/></g></svg>"##,
        )
        .unwrap();
        assert!(matches!(flatten(&doc), Err(ReconstructError::Unsupported(_))));
    }

    #[test]
    fn group_clip_moves_into_leaf_space() {
        let s = seq(
            r##"<svg viewBox="0 0 10 10"><clipPath id="c"><rect width="5" height="5"/></clipPath><g clip-path="url(#c)"><rect width="9" height="9" transform="translate(1 1)"/></g></svg>"##,
        );
        let id = s.steps[0].primitive.clip_path.clone().unwrap();
        assert_eq!(s.clip_paths[&id].transform, Transform::translate(-1.0, -1.0));
        assert!(s.steps[0].fragment.starts_with("<defs><clipPath"));
    }

    #[test]
    fn prune_drops_zero_delta_steps_only() {
        let s = seq(
            r#"<svg viewBox="0 0 16 16"><rect width="8" height="8"/><rect width="8" height="8"/><rect x="8" width="8" height="8" fill="red"/><rect width="16" height="16" fill="blue"/></svg>"#,
        );
        let p = prune_invisible_at(&s, 16).unwrap();
        assert_eq!(p.n(), 3);
        assert_eq!(p.steps.iter().map(|s| s.index).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(p.steps[1].provenance, vec![2]);
    }

    #[test]
    fn use_expands_with_use_site_transform() {
        let s = seq(
            r##"<svg viewBox="0 0 20 20"><defs><rect id="r" width="2" height="2"/></defs><use href="#r" x="3" transform="translate(1 0)"/><use href="#r" y="5"/></svg>"##,
        );
        assert_eq!(s.n(), 2);
        assert_eq!(s.steps[0].primitive.transform, Transform::translate(4.0, 0.0));
        assert_eq!(s.steps[1].primitive.transform, Transform::translate(0.0, 5.0));
    }
}
