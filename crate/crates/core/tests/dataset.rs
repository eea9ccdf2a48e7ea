//! Chat layout round trips, NLL against an exact-summation oracle, and the
//! train/test split.

use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stepsvg_core::annotation::{AnnotationRecord, StepText, Thresholds, TRANSITION_CONVENTION};
use stepsvg_core::dataset::*;
use stepsvg_core::reconstruct::flatten;
use stepsvg_core::svg::parse_svg;

/// Exact sum of floats via non-overlapping partials (Shewchuk), rounded once.
fn exact_sum(xs: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for &x in xs {
        let mut x = x;
        let mut kept = Vec::with_capacity(partials.len() + 1);
        for &p in &partials {
            let (hi, lo) = if x.abs() < p.abs() { (p, x) } else { (x, p) };
            let s = hi + lo;
            let err = lo - (s - hi);
            if err != 0.0 {
                kept.push(err);
            }
            x = s;
        }
        kept.push(x);
        partials = kept;
    }
    partials.iter().rev().fold(0.0, |acc, p| acc + p)
}

fn adversarial_text() -> impl Strategy<Value = String> {
    let pieces = prop::sample::select(vec![
        "<think>", "</think>", "<think", "think>", "<", "\\", "\\n", "\\x3c", "\n", "\r\n", "\r", "Step 2: ", "Step ",
        ":", " ", "draw a red circle", "é", "漢字", "\u{2028}", "\"quoted\"", "\t", "",
    ]);
    prop::collection::vec(prop_oneof![pieces.prop_map(str::to_owned), "[a-zA-Z0-9 ,.]{0,12}"], 0..8).prop_map(|v| v.concat())
}

fn metadata() -> impl Strategy<Value = SampleMetadata> {
    (0.0..1.0f64, 1.0..100.0f64, 1usize..40, 0usize..9000, any::<bool>(), "[a-f0-9]{8}").prop_map(
        |(clip, ppl, n, bytes, truncated, hash)| SampleMetadata {
            thresholds: Thresholds::default(),
            clip_score: clip,
            perplexity: ppl,
            template_hashes: BTreeMap::from([("global".to_owned(), hash)]),
            primitive_count: n,
            byte_length: bytes,
            truncated,
            transition_convention: TRANSITION_CONVENTION.to_owned(),
        },
    )
}

fn training_sample() -> impl Strategy<Value = TrainingSample> {
    (
        "[a-z0-9]{1,16}",
        adversarial_text(),
        prop::collection::vec(adversarial_text(), 0..6),
        adversarial_text(),
        metadata(),
    )
        .prop_map(|(id, t_g, trace, code, metadata)| TrainingSample {
            sample_id: id,
            prompt: instruction(&t_g),
            think_trace: trace,
            svg_code: format!("<svg>{code}</svg>"),
            metadata,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn chat_round_trip_is_exact(sample in training_sample()) {
        let chat = to_chat(&sample);
        let content = &chat.messages[2].content;
        let close = content.find(THINK_CLOSE).unwrap();
        prop_assert_eq!(content[..close].matches(THINK_OPEN).count(), 1);
        let after = format!("{}\n", THINK_CLOSE);
        prop_assert!(content[close..].starts_with(&after));
        prop_assert!(content[close..].ends_with(&sample.svg_code));

        let mut line = Vec::new();
        write_jsonl(&mut line, std::slice::from_ref(&chat)).unwrap();
        let back: Vec<ChatRecord> = read_jsonl(line.as_slice()).unwrap();
        prop_assert_eq!(&back[0], &chat);
        prop_assert_eq!(parse_chat(&back[0]).unwrap(), sample);
    }

    #[test]
    fn escaping_round_trips(text in adversarial_text()) {
        let e = escape_step(&text);
        prop_assert!(!e.contains('\n') && !e.contains('\r'));
        prop_assert!(!e.contains(THINK_OPEN) && !e.contains(THINK_CLOSE));
        prop_assert_eq!(unescape_step(&e), Some(text));
    }

    #[test]
    fn nll_matches_exact_summation(xs in prop::collection::vec(0.0..50.0f64, 0..400)) {
        let got = sequence_nll(&xs).unwrap().sum;
        let want = exact_sum(&xs);
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(f64::MIN_POSITIVE), "{} vs {}", got, want);
    }

    #[test]
    fn nll_is_additive(a in prop::collection::vec(0.0..20.0f64, 0..100), b in prop::collection::vec(0.0..20.0f64, 0..100)) {
        let joined: Vec<f64> = a.iter().chain(&b).copied().collect();
        let whole = sequence_nll(&joined).unwrap().sum;
        let parts = sequence_nll(&a).unwrap().sum + sequence_nll(&b).unwrap().sum;
        prop_assert!((whole - parts).abs() <= 1e-12 * whole.max(1.0));
    }

    #[test]
    fn lenient_split_never_panics(text in ".{0,200}") {
        let _ = split_think(&text);
    }
}

#[test]
fn uniform_model_identities() {
    for v in [2usize, 4, 17, 32_000, 151_936] {
        let ln_v = (v as f64).ln();
        for len in [1usize, 3, 10, 1000] {
            let s = sequence_nll(&vec![ln_v; len]).unwrap();
            assert!((s.sum - len as f64 * ln_v).abs() <= 1e-9, "V={v} L={len}");
            assert!((s.perplexity() - v as f64).abs() <= 1e-9 * v as f64, "V={v} L={len}");
        }
    }
}

#[test]
fn split_of_full_corpus_size() {
    let ids: Vec<String> = (0..270_436).map(|i| format!("sample-{i:06}")).collect();
    let (train, test) = split_dataset(ids.clone(), 1_000, 42, |s| s.as_str()).unwrap();
    assert_eq!((train.len(), test.len()), (269_436, 1_000));
    let (train2, test2) = split_dataset(ids.clone(), 1_000, 42, |s| s.as_str()).unwrap();
    assert_eq!((&train, &test), (&train2, &test2));
    let held: HashSet<&String> = test.iter().collect();
    assert!(train.iter().all(|s| !held.contains(s)));
    let union: HashSet<&String> = train.iter().chain(&test).collect();
    assert_eq!(union, ids.iter().collect());
    let (_, other) = split_dataset(ids, 1_000, 43, |s| s.as_str()).unwrap();
    assert_ne!(other, test);
}

fn record(id: &str, texts: &[&str], n: usize, accepted: bool) -> AnnotationRecord {
    AnnotationRecord {
        sample_id: id.into(),
        t_g: "two shapes".into(),
        steps: texts.iter().enumerate().map(|(i, t)| StepText { index: i + 1, text: t.to_string() }).collect(),
        step_count: n,
        clip_score: 0.3,
        perplexity: 10.0,
        accepted,
        truncated: false,
        thresholds: Thresholds::default(),
        perplexity_scope: Default::default(),
        template_hashes: BTreeMap::new(),
        transition_convention: TRANSITION_CONVENTION.into(),
    }
}

#[test]
fn assembly_places_trace_before_code() {
    let doc = parse_svg(
        br#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 10 10"><rect width="4" height="4" fill="blue"/><circle cx="7" cy="7" r="1" fill="red"/><path d="M0 9H9"/></svg>"#,
    )
    .unwrap();
    let seq = flatten(&doc).unwrap();
    let rec = record("a", &["draw a blue square", "add a red dot"], 3, true);
    let sample = assemble(&rec, &seq).unwrap();
    assert_eq!(sample.think_trace, vec!["draw a blue square", "add a red dot"]);
    assert_eq!(sample.prompt, "Generate an SVG matching this description: two shapes");
    assert_eq!(sample.metadata.primitive_count, 3);
    assert_eq!(parse_svg(sample.svg_code.as_bytes()).unwrap().primitives().count(), 3);
    let content = &to_chat(&sample).messages[2].content;
    let last_trace = content.find("add a red dot").unwrap();
    assert!(last_trace < content.find("<svg").unwrap());

    assert_eq!(assemble(&record("b", &["x", "y"], 3, false), &seq), Err(AssembleError::RejectedRecord("b".into())));
    assert!(matches!(assemble(&record("c", &["x"], 3, true), &seq), Err(AssembleError::StepCountMismatch { .. })));
    let long = "w".repeat(400);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let texts: Vec<String> = (0..2).map(|_| long.repeat(rng.random_range(25..30))).collect();
    let big = record("d", &[&texts[0], &texts[1]], 3, true);
    assert!(matches!(assemble(&big, &seq), Err(AssembleError::LengthOverflow { .. })));
}
