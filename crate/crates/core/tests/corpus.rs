//! Properties checked over every document in testdata/golden.

use std::path::PathBuf;

use stepsvg_core::raster::{diff_images, pixel_agreement, render_document, render_prefix, render_prefixes_with_masks};
use stepsvg_core::raster::render_steps;
use stepsvg_core::reconstruct::flatten;
use stepsvg_core::svg::{normalize, parse_svg, serialize, SvgDocument};

const SIZE: u32 = 512;

fn golden() -> Vec<(String, SvgDocument)> {
    let dir = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../testdata/golden"));
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .expect("golden dir")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "svg"))
        .collect();
    files.sort();
    assert!(files.len() >= 100, "expected at least 100 golden files, found {}", files.len());
    files
        .into_iter()
        .map(|p| {
            let bytes = std::fs::read(&p).unwrap();
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let doc = parse_svg(&bytes).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, doc)
        })
        .collect()
}

#[test]
fn serialization_is_a_fixed_point() {
    for (name, doc) in golden() {
        let norm = normalize(&doc);
        let once = serialize(&norm);
        let mut back = parse_svg(once.as_bytes()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(serialize(&back), once, "{name}");
        back.source_bytes = norm.source_bytes;
        assert!(back == norm, "{name}: re-parsed tree differs");
        let again = serialize(&normalize(&back));
        assert_eq!(once, again, "{name}");
    }
}

#[test]
fn normalization_preserves_pixels() {
    let mut worst = 1.0f64;
    for (name, doc) in golden() {
        let a = render_document(&doc, SIZE).unwrap();
        let b = render_document(&normalize(&doc), SIZE).unwrap();
        let agree = pixel_agreement(&a, &b).unwrap();
        worst = worst.min(agree);
        assert!(agree >= 0.999, "{name}: {agree}");
    }
    eprintln!("worst normalization agreement {worst:.5}");
}

#[test]
fn final_prefix_matches_document() {
    let mut worst = (1.0f64, String::new());
    for (name, doc) in golden() {
        let seq = flatten(&doc).unwrap_or_else(|e| panic!("{name}: {e}"));
        let full = render_document(&doc, SIZE).unwrap();
        let last = render_prefix(&seq, seq.n(), SIZE).unwrap();
        let agree = pixel_agreement(&full, &last).unwrap();
        if agree < worst.0 {
            worst = (agree, name.clone());
        }
        assert!(agree >= 0.995, "{name}: {agree}");
        let rebuilt = render_document(&seq.to_document(), SIZE).unwrap();
        assert!(rebuilt == last, "{name}: rebuilt document differs from last prefix");
    }
    eprintln!("worst final-prefix agreement {:.5} ({})", worst.0, worst.1);
}

#[test]
fn steps_only_change_their_own_coverage() {
    for (name, doc) in golden() {
        let seq = flatten(&doc).unwrap();
        let frames = render_prefixes_with_masks(&seq, SIZE).unwrap();
        let white = stepsvg_core::raster::RasterImage::white(SIZE, SIZE);
        let d = diff_images(&white, &frames[0].0, Some(&frames[0].1)).unwrap();
        assert_eq!(d.changed_outside_mask, 0, "{name} step 0");
        for k in 1..frames.len() {
            let d = diff_images(&frames[k - 1].0, &frames[k].0, Some(&frames[k].1)).unwrap();
            assert_eq!(d.changed_outside_mask, 0, "{name} step {k}");
        }
        for k in [1, frames.len() / 2, frames.len()] {
            if k == 0 {
                continue;
            }
            assert!(render_prefix(&seq, k, SIZE).unwrap() == frames[k - 1].0, "{name} prefix {k}");
        }
    }
}

#[test]
fn fragments_render_like_their_step() {
    for (name, doc) in golden() {
        let seq = flatten(&doc).unwrap();
        let again = flatten(&doc).unwrap();
        for (i, step) in seq.steps.iter().enumerate() {
            assert_eq!(step.fragment, again.steps[i].fragment, "{name}: flatten is not deterministic");
            let alone = parse_svg(seq.fragment_document(i).as_bytes()).unwrap_or_else(|e| panic!("{name} step {i}: {e}"));
            assert_eq!(alone.primitives().count(), 1);
            let a = render_document(&alone, 128).unwrap();
            let b = render_steps(&seq, &[i], 128).unwrap();
            assert!(a == b, "{name} step {i}: fragment renders differently");
        }
    }
}
