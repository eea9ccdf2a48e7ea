//! Agreement with an independent rasterizer (resvg) on golden files.

use resvg::{tiny_skia, usvg};
use stepsvg_core::raster::{pixel_agreement, render_document, RasterImage};
use stepsvg_core::svg::parse_svg;

const SIZE: u32 = 512;

fn reference(data: &[u8], size: u32) -> RasterImage {
    let tree = usvg::Tree::from_data(data, &usvg::Options::default()).unwrap();
    let (w, h) = (tree.size().width(), tree.size().height());
    let s = (size as f32 / w).min(size as f32 / h);
    let ts = tiny_skia::Transform::from_scale(s, s).post_translate((size as f32 - w * s) / 2.0, (size as f32 - h * s) / 2.0);
    let mut pix = tiny_skia::Pixmap::new(size, size).unwrap();
    pix.fill(tiny_skia::Color::WHITE);
    resvg::render(&tree, ts, &mut pix.as_mut());
    RasterImage { width: size, height: size, pixels: pix.data().to_vec() }
}

/// Box-filters a `k·n × k·n` image down to `n × n`.
fn downsample(img: &RasterImage, k: u32) -> RasterImage {
    let n = img.width / k;
    let mut out = RasterImage::white(n, n);
    for y in 0..n {
        for x in 0..n {
            let mut acc = [0u32; 4];
            for dy in 0..k {
                for dx in 0..k {
                    let p = img.pixel(x * k + dx, y * k + dy);
                    for c in 0..4 {
                        acc[c] += p[c] as u32;
                    }
                }
            }
            let d = k * k;
            out.set_pixel(x, y, acc.map(|v| ((v + d / 2) / d) as u8));
        }
    }
    out
}

fn golden_icons(count: usize) -> Vec<(String, Vec<u8>)> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../testdata/golden");
    let mut paths: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
        .into_iter()
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("icon_"))
        .take(count)
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn geometry_agrees_with_reference_renderer() {
    // Both renderers at 4× resolution, box-filtered to the target size, so
    // that antialiasing quantization does not dominate the comparison.
    let mut total = 0.0;
    let files = golden_icons(20);
    for (name, data) in &files {
        let doc = parse_svg(data).unwrap();
        let ours = downsample(&render_document(&doc, SIZE * 4).unwrap(), 4);
        let theirs = downsample(&reference(data, SIZE * 4), 4);
        let agree = pixel_agreement(&ours, &theirs).unwrap();
        eprintln!("{name}: {agree:.5}");
        assert!(agree >= 0.99, "{name}: {agree}");
        total += agree;
    }
    let mean = total / files.len() as f64;
    eprintln!("mean supersampled agreement {mean:.5}");
    assert!(mean >= 0.995, "{mean}");
}

#[test]
fn direct_renders_stay_close_to_reference() {
    // At the native size, 16 point samples against exact area coverage
    // differ by more than 2 levels on most high-contrast edge pixels.
    let mut total = 0.0;
    let files = golden_icons(20);
    for (name, data) in &files {
        let ours = render_document(&parse_svg(data).unwrap(), SIZE).unwrap();
        let agree = pixel_agreement(&ours, &reference(data, SIZE)).unwrap();
        eprintln!("{name}: {agree:.5}");
        assert!(agree >= 0.985, "{name}: {agree}");
        total += agree;
    }
    let mean = total / files.len() as f64;
    eprintln!("mean direct agreement {mean:.5}");
    assert!(mean >= 0.99);
}
