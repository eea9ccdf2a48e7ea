//! Rendered coverage against closed-form areas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stepsvg_core::raster::render_document;
use stepsvg_core::svg::parse_svg;

/// Ink of a black-on-white render, in pixels.
fn ink(svg: &str, size: u32) -> f64 {
    let img = render_document(&parse_svg(svg.as_bytes()).unwrap(), size).unwrap();
    img.pixels.chunks(4).map(|p| (255 - p[0]) as f64 / 255.0).sum()
}

fn within_one_percent(measured: f64, expected: f64) -> bool {
    (measured - expected).abs() <= 0.01 * expected
}

#[test]
fn circle_from_docs_example() {
    let svg = r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 100 100"><circle cx="50" cy="50" r="10"/></svg>"#;
    let area = ink(svg, 100);
    assert!(within_one_percent(area, std::f64::consts::PI * 100.0), "{area}");
}

#[test]
fn random_circles_and_rects_match_scaled_area() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..20 {
        let (vw, vh) = (rng.random_range(20.0..200.0f64), rng.random_range(20.0..200.0f64));
        let size = [64u32, 128, 256, 512][case % 4];
        let scale = (size as f64 / vw).min(size as f64 / vh);
        let (svg, analytic) = if case % 2 == 0 {
            // At least 10 device pixels: smaller disks are dominated by sampling noise.
            let r = rng.random_range(0.1..0.45f64).max(10.0 / scale / vw.min(vh)) * vw.min(vh);
            let (cx, cy) = (vw / 2.0 + rng.random_range(-0.04..0.04) * vw, vh / 2.0);
            let r = r.min(cx).min(vw - cx);
            (format!(r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="{r:.3}"/>"#), std::f64::consts::PI * (r * 1e3).round().powi(2) / 1e6)
        } else {
            let (w, h) = (rng.random_range(0.2..0.9) * vw, rng.random_range(0.2..0.9) * vh);
            let (x, y) = (rng.random_range(0.0..vw - w), rng.random_range(0.0..vh - h));
            let (w, h) = ((w * 1e3).round() / 1e3, (h * 1e3).round() / 1e3);
            (format!(r#"<rect x="{x:.3}" y="{y:.3}" width="{w}" height="{h}"/>"#), w * h)
        };
        let doc = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {vw:.3} {vh:.3}">{svg}</svg>"#);
        let expected = analytic * scale * scale;
        let measured = ink(&doc, size);
        assert!(within_one_percent(measured, expected), "case {case}: {doc} measured {measured} expected {expected}");
    }
}
