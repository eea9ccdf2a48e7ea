//! Stage behavior on small hand-made corpora, driven through the library.

use std::path::Path;

use proptest::prelude::*;
use stepsvg::config::{ConfigLayer, PipelineConfig};
use stepsvg::manifest::{read_json, StageManifest};
use stepsvg::stages::annotate;
use stepsvg::stages::evaluate::{self, EvaluateArgs};
use stepsvg::stages::ingest::{self, CuratedEntry};
use stepsvg::stages::render::{self, RenderSummary};
use stepsvg::stages::{Context, StageError};
use stepsvg_client::mock::{MockConfig, MockServer};
use stepsvg_core::annotation::AnnotationRecord;
use stepsvg_core::metrics::{write_features, FeatureSet, MetricsReport};
use stepsvg_core::raster::{PixelBox, StepDiff};

const SVG_NS: &str = "http://www.w3.org/2000/svg";

fn context(root: &Path, tweak: impl FnOnce(&mut ConfigLayer), limit: Option<usize>) -> Context {
    let mut layer = ConfigLayer {
        corpus_dir: Some(root.join("corpus")),
        output_dir: Some(root.join("out")),
        ..Default::default()
    };
    tweak(&mut layer);
    Context::new(PipelineConfig::from_layer(layer).unwrap(), limit).unwrap()
}

fn write(root: &Path, name: &str, body: &str) {
    let p = root.join("corpus").join(name);
    std::fs::create_dir_all(p.parent().unwrap()).unwrap();
    std::fs::write(p, body).unwrap();
}

fn doc(inner: &str) -> String {
    format!(r#"<svg xmlns="{SVG_NS}" viewBox="0 0 100 100">{inner}</svg>"#)
}

#[test]
fn ingest_filters_by_length_and_support() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write(root, "a.svg", &doc(r#"<circle cx="50" cy="50" r="20" fill="red"/>"#));
    write(root, "nested/b.svg", &doc(r#"<rect x="10" y="10" width="30" height="40"/>"#));
    let long: String = (0..80).map(|i| format!(r#"<rect x="{i}" y="1" width="1" height="90" fill="blue"/>"#)).collect();
    write(root, "c.svg", &doc(&long));
    write(root, "d.svg", &doc(r#"<script>alert(1)</script><circle r="3"/>"#));
    write(root, "notes.txt", "not an svg");

    let ctx = context(root, |l| l.length_cutoff = Some(2000), None);
    let report = ingest::run(&ctx).unwrap();
    assert_eq!(report.counters.input, 4);
    assert_eq!(report.counters.completed, 2);
    assert_eq!(report.counters.rejected.get("length_overflow"), Some(&1));
    assert_eq!(report.counters.rejected.get("unsupported_feature"), Some(&1));
    assert!(report.counters.reconciles());

    let m: StageManifest<CuratedEntry> = read_json(&root.join("out/manifests/ingest.json")).unwrap();
    let sources: Vec<&str> = m.completed.iter().map(|e| e.source.as_str()).collect();
    assert_eq!(sources, ["a.svg", "nested/b.svg"]);
    for e in &m.completed {
        let text = std::fs::read_to_string(root.join(format!("out/curated/{}.svg", e.sample_id))).unwrap();
        assert_eq!(text.len(), e.byte_length);
        assert_eq!(e.primitive_count, 1);
    }
}

#[test]
fn ingest_rerun_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    for i in 0..4 {
        write(root, &format!("{i}.svg"), &doc(&format!(r#"<circle cx="50" cy="50" r="{}"/>"#, 10 + i)));
    }
    write(root, "dup.svg", &doc(r#"<circle cx="50" cy="50" r="10"/>"#));
    let ctx = context(root, |_| {}, None);
    let first = ingest::run(&ctx).unwrap();
    let bytes = std::fs::read(root.join("out/manifests/ingest.json")).unwrap();
    let second = ingest::run(&ctx).unwrap();
    assert_eq!(first.counters, second.counters);
    assert_eq!(first.counters.rejected.get("duplicate"), Some(&1));
    assert_eq!(bytes, std::fs::read(root.join("out/manifests/ingest.json")).unwrap());
}

#[test]
fn empty_corpus_aborts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("corpus")).unwrap();
    let ctx = context(dir.path(), |_| {}, None);
    assert!(matches!(ingest::run(&ctx), Err(StageError::Aborted { .. })));
}

#[test]
fn render_needs_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = context(dir.path(), |_| {}, None);
    assert!(matches!(render::run(&ctx), Err(StageError::Precondition { .. })));
}

#[test]
fn single_circle_renders_one_frame() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write(root, "c.svg", &doc(r#"<circle cx="50" cy="50" r="25"/>"#));
    let ctx = context(root, |l| l.canvas_size = Some(100), None);
    ingest::run(&ctx).unwrap();
    let report = render::run(&ctx).unwrap();
    assert_eq!(report.counters.completed, 1);

    let m: StageManifest<RenderSummary> = read_json(&root.join("out/manifests/render.json")).unwrap();
    let s = &m.completed[0];
    assert_eq!(s.step_count, 1);
    let frames = root.join("out/frames").join(&s.sample_id);
    assert!(frames.join("step_0001.png").is_file());
    assert!(!frames.join("step_0002.png").exists());
    let diffs: Vec<StepDiff> = read_json(&frames.join("diffs.json")).unwrap();
    assert_eq!(diffs.len(), 1);
    assert_eq!(diffs[0].step_index, 1);
    assert_eq!(diffs[0].changed_bbox, Some(PixelBox { x: 25, y: 25, width: 50, height: 50 }));
    let mask = diffs[0].coverage_mask.as_ref().expect("mask stored with the diff");
    assert!(mask.contains(50, 50) && !mask.contains(2, 2));

    // A second run finds the summary and does no work.
    let again = render::run(&ctx).unwrap();
    assert_eq!(again.resumed, 1);
}

#[test]
fn invisible_steps_are_pruned() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let body = r#"<rect width="100" height="100" fill="white"/><circle cx="50" cy="50" r="20"/><circle cx="10" cy="10" r="5" fill="white"/>"#;
    write(root, "p.svg", &doc(body));
    let ctx = context(root, |l| l.canvas_size = Some(64), None);
    ingest::run(&ctx).unwrap();
    render::run(&ctx).unwrap();
    let m: StageManifest<RenderSummary> = read_json(&root.join("out/manifests/render.json")).unwrap();
    assert_eq!(m.completed[0].step_count, 1);
    assert_eq!(m.completed[0].pruned, 2);
}

#[test]
fn all_invisible_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write(root, "w.svg", &doc(r#"<rect width="100" height="100" fill="white"/>"#));
    let ctx = context(root, |l| l.canvas_size = Some(32), None);
    ingest::run(&ctx).unwrap();
    let r = render::run(&ctx).unwrap();
    assert_eq!(r.counters.rejected.get("all_invisible"), Some(&1));
}

#[test]
fn annotate_writes_one_record_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    for i in 0..5 {
        let body = format!(r#"<rect x="5" y="5" width="40" height="40" fill="gray"/><circle cx="70" cy="70" r="{}"/><rect x="{}" y="60" width="10" height="30" fill="red"/>"#, 10 + i, 5 + i);
        write(root, &format!("{i}.svg"), &doc(&body));
    }
    let server = MockServer::start(MockConfig { capture: true, ..Default::default() }).unwrap();
    let tweak = |l: &mut ConfigLayer| {
        l.canvas_size = Some(64);
        l.annotator_endpoint = Some(server.url());
        l.services_endpoint = Some(server.url());
    };
    let ctx = context(root, tweak, None);
    ingest::run(&ctx).unwrap();
    render::run(&ctx).unwrap();
    let report = annotate::run(&ctx).unwrap();
    assert_eq!(report.counters.completed, 5, "{:?}", report.counters);

    let records: Vec<AnnotationRecord> = std::fs::read_dir(root.join("out/annotations"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .map(|p| read_json(&p).unwrap())
        .collect();
    assert_eq!(records.len(), 5);
    for r in &records {
        assert_eq!(r.step_count, 3);
        assert_eq!(r.steps.len(), 2);
        assert!(r.accepted);
    }

    // Per sample: one global request (system and user), then step k carries
    // the system prompt, the context turn, k-1 earlier exchanges and the new
    // prompt.
    let chats: Vec<_> = server.requests().into_iter().filter(|r| r.path.ends_with("/chat/completions")).collect();
    assert_eq!(chats.len(), 5 * 3);
    let mut lengths: Vec<usize> = chats.iter().map(|r| r.body["messages"].as_array().unwrap().len()).collect();
    lengths.sort();
    assert_eq!(lengths, [[2usize; 5], [3; 5], [5; 5]].concat());
    for r in &chats {
        let messages = r.body["messages"].as_array().unwrap();
        let images: Vec<usize> = messages
            .iter()
            .map(|m| m["content"].as_array().map_or(0, |parts| parts.iter().filter(|p| p["type"] == "image_url").count()))
            .collect();
        let expected = if messages.len() == 2 { 1 } else { 3 };
        assert_eq!(images.last(), Some(&expected));
        assert!(images[..images.len() - 1].iter().all(|&n| n == 0), "history stays text-only");
    }
}

fn features(path: &Path, rows: Vec<Vec<f64>>) {
    write_features(path, &FeatureSet::new(rows, "test-features").unwrap()).unwrap();
}

#[test]
fn evaluate_identical_sets_gives_zero_fid() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i * i % 7) as f64, ((i * 5) % 11) as f64]).collect();
    features(&root.join("real.f32"), rows.clone());
    features(&root.join("gen.f32"), rows);
    let ctx = context(root, |_| {}, None);
    let args = EvaluateArgs {
        real_features: Some(root.join("real.f32")),
        gen_features: Some(root.join("gen.f32")),
        ..Default::default()
    };
    let report = evaluate::run(&ctx, &args).unwrap();
    assert_eq!(report.counters.completed, 1);
    let m: MetricsReport = read_json(&evaluate::report_path(&root.join("out"))).unwrap();
    assert!(m.fid.unwrap().abs() <= 1e-6, "{:?}", m.fid);
    assert_eq!(m.sample_count, 12);
    assert_eq!(m.clip_score, None);
}

#[test]
fn evaluate_rejects_mismatched_generated_counts() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    features(&root.join("gen.f32"), (0..5).map(|i| vec![i as f64, 1.0]).collect());
    features(&root.join("img.f32"), (0..4).map(|i| vec![i as f64, 1.0]).collect());
    features(&root.join("txt.f32"), (0..4).map(|i| vec![1.0, i as f64]).collect());
    let ctx = context(root, |_| {}, None);
    let args = EvaluateArgs {
        gen_features: Some(root.join("gen.f32")),
        clip_image_features: Some(root.join("img.f32")),
        clip_text_features: Some(root.join("txt.f32")),
        ..Default::default()
    };
    assert!(matches!(evaluate::run(&ctx, &args), Err(StageError::Aborted { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Any limit leaves counters that add up, and finishing the rest
    /// yields the same manifest as one unlimited run.
    #[test]
    fn limited_runs_reconcile_and_converge(limit in 0usize..7) {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        for i in 0..5 {
            write(root, &format!("{i}.svg"), &doc(&format!(r#"<rect x="{i}" y="10" width="20" height="20"/><circle cx="60" cy="60" r="{}"/>"#, 5 + i)));
        }
        let tweak = |l: &mut ConfigLayer| l.canvas_size = Some(32);
        ingest::run(&context(root, tweak, None)).unwrap();
        let partial = render::run(&context(root, tweak, Some(limit))).unwrap();
        prop_assert!(partial.counters.reconciles());
        prop_assert_eq!(partial.counters.deferred, 5usize.saturating_sub(limit));
        let full = render::run(&context(root, tweak, None)).unwrap();
        prop_assert_eq!(full.resumed, limit.min(5));
        prop_assert_eq!(full.counters.completed, 5);
        let resumed = std::fs::read(root.join("out/manifests/render.json")).unwrap();

        let fresh = tempfile::tempdir().unwrap();
        for i in 0..5 {
            write(fresh.path(), &format!("{i}.svg"), &doc(&format!(r#"<rect x="{i}" y="10" width="20" height="20"/><circle cx="60" cy="60" r="{}"/>"#, 5 + i)));
        }
        ingest::run(&context(fresh.path(), tweak, None)).unwrap();
        render::run(&context(fresh.path(), tweak, None)).unwrap();
        prop_assert_eq!(resumed, std::fs::read(fresh.path().join("out/manifests/render.json")).unwrap());
    }
}
