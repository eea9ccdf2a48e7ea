//! FID against the closed-form Gaussian value, CLIP score against a naive
//! oracle, and file statistics.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use stepsvg_core::metrics::*;
use stepsvg_core::svg::{parse_svg, svg_length};

fn gaussian(n: usize, d: usize, mean: f64, sd: f64, seed: u64) -> FeatureSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(mean, sd).unwrap();
    FeatureSet::new((0..n).map(|_| (0..d).map(|_| normal.sample(&mut rng)).collect()).collect(), "synthetic").unwrap()
}

#[test]
fn gaussian_fid_matches_closed_form() {
    // μ₁ = 0, Σ₁ = I and μ₂ = 𝟙, Σ₂ = 4I in 8 dimensions:
    // ‖μ₁−μ₂‖² + Σⱼ (1 + 4 − 2·√4) = 8 + 8.
    let a = gaussian(20_000, 8, 0.0, 1.0, 1);
    let b = gaussian(20_000, 8, 1.0, 2.0, 2);
    let value = fid(&a, &b).unwrap();
    assert!((value - 16.0).abs() <= 0.05 * 16.0, "{value}");
    assert_eq!(fid_clip(&a, &b).unwrap(), value);
}

#[test]
fn fid_of_a_set_with_itself_is_zero() {
    let a = gaussian(5_000, 8, 0.3, 1.5, 3);
    assert!(fid(&a, &a).unwrap() <= 1e-6);
}

#[test]
fn fid_shift_adds_squared_norm() {
    let a = gaussian(4_000, 6, 0.0, 1.0, 4);
    let v = [0.5, -1.0, 2.0, 0.0, 0.25, 1.5];
    let shifted = FeatureSet::new(
        a.vectors.iter().map(|x| x.iter().zip(&v).map(|(p, q)| p + q).collect()).collect(),
        "shifted",
    )
    .unwrap();
    let expected: f64 = v.iter().map(|x| x * x).sum();
    let got = fid(&a, &shifted).unwrap();
    assert!((got - expected).abs() <= 0.01 * expected, "{got} vs {expected}");
}

#[test]
fn too_few_vectors_is_a_rank_error() {
    let a = gaussian(8, 8, 0.0, 1.0, 5);
    let b = gaussian(100, 8, 0.0, 1.0, 6);
    assert_eq!(fid(&a, &b), Err(MetricsError::CovarianceRankError { count: 8, d: 8 }));
    let c = gaussian(100, 4, 0.0, 1.0, 7);
    assert_eq!(fid(&b, &c), Err(MetricsError::DimensionMismatch(8, 4)));
}

fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    dot / (na.sqrt() * nb.sqrt())
}

fn vectors(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0..10.0f64, d), n)
        .prop_filter("non-zero", |vs| vs.iter().all(|v| v.iter().any(|x| x.abs() > 1e-3)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fid_is_symmetric(seed in 0u64..1000, shift in -2.0..2.0f64, scale in 0.5..3.0f64) {
        let a = gaussian(60, 5, 0.0, 1.0, seed);
        let b = gaussian(80, 5, shift, scale, seed + 10_000);
        let ab = fid(&a, &b).unwrap();
        let ba = fid(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-9, "{} vs {}", ab, ba);
        prop_assert!(ab >= 0.0);
    }

    #[test]
    fn clip_score_matches_naive_oracle((img, txt) in (1usize..20).prop_flat_map(|n| (vectors(n, 6), vectors(n, 6)))) {
        let want = img.iter().zip(&txt).map(|(a, b)| naive_cosine(a, b)).sum::<f64>() / img.len() as f64;
        let a = FeatureSet::new(img, "image").unwrap();
        let b = FeatureSet::new(txt, "text").unwrap();
        let got = clip_score(&a, &b).unwrap();
        prop_assert!((got - want).abs() <= 1e-9);
    }

    #[test]
    fn clip_score_ignores_positive_scale(v in vectors(4, 5), w in vectors(4, 5), k in 0.01..100.0f64) {
        let a = FeatureSet::new(v.clone(), "i").unwrap();
        let b = FeatureSet::new(w, "t").unwrap();
        let scaled = FeatureSet::new(v.iter().map(|x| x.iter().map(|p| p * k).collect()).collect(), "i").unwrap();
        prop_assert!((clip_score(&a, &b).unwrap() - clip_score(&scaled, &b).unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn clip_score_extremes() {
    let a = FeatureSet::new(vec![vec![1.0, 0.0], vec![0.0, 2.0]], "i").unwrap();
    assert_eq!(clip_score(&a, &a).unwrap(), 1.0);
    let b = FeatureSet::new(vec![vec![0.0, 1.0], vec![3.0, 0.0]], "t").unwrap();
    assert_eq!(clip_score(&a, &b).unwrap(), 0.0);
}

/// Four primitives padded with path segments to an exact canonical length.
fn doc_of_length(target: usize) -> stepsvg_core::svg::SvgDocument {
    for segments in 0..400 {
        for last in ["1", "12", "123", "1234"] {
            let d = format!("M0 0{}L{last} 1", "L1 1".repeat(segments));
            let text = format!(
                r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 10 10"><rect width="2" height="2"/><circle cx="5" cy="5" r="1"/><ellipse cx="8" cy="8" rx="1" ry="2"/><path d="{d}" stroke="red"/></svg>"#
            );
            let doc = parse_svg(text.as_bytes()).unwrap();
            if svg_length(&doc) == target {
                return doc;
            }
        }
    }
    panic!("no padding reaches {target} bytes");
}

#[test]
fn file_size_and_primitive_averages() {
    let doc = doc_of_length(1188);
    let s = svg_stats([&doc]).unwrap();
    assert_eq!(s.file_size_text(), "1.16");
    assert_eq!(s.avg_primitives_used, 4.0);
    assert_eq!(s.primitives_text(), "4.000");

    let empty = parse_svg(br#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 10 10"/>"#).unwrap();
    let with_empty = svg_stats([&doc, &empty]).unwrap();
    assert_eq!((with_empty.count, with_empty.degenerate), (1, 1));
    assert_eq!(with_empty.avg_primitives_used, 4.0);
    assert_eq!(svg_stats(std::iter::empty()), Err(MetricsError::EmptyInput));
}

#[test]
fn stats_combine_by_count() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../testdata/golden");
    let mut paths: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    let docs: Vec<_> = paths.iter().take(30).map(|p| parse_svg(&std::fs::read(p).unwrap()).unwrap()).collect();
    let (a, b) = docs.split_at(11);
    let whole = svg_stats(&docs).unwrap();
    let merged = svg_stats(a).unwrap().merge(&svg_stats(b).unwrap());
    assert_eq!(whole.count, merged.count);
    assert!((whole.avg_file_size_kb - merged.avg_file_size_kb).abs() <= 1e-12);
    assert!((whole.avg_primitives_used - merged.avg_primitives_used).abs() <= 1e-12);
}
