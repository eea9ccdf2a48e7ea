//! Generation parsing, sampling parameters on the wire, best-of-k selection
//! and prompt edits.

use std::time::Duration;

use proptest::prelude::*;
use stepsvg_client::chat::{ChatCompletionsClient, ChatTransport};
use stepsvg_client::http::{EndpointError, RetryPolicy};
use stepsvg_client::infer::*;
use stepsvg_client::mock::{MockConfig, MockServer};
use stepsvg_client::services::{Embedder, ProviderError};
use stepsvg_client::wire::ChatRequest;
use stepsvg_core::raster::{diff_images, RasterImage};

fn config(sampling: Sampling) -> GenerationConfig {
    GenerationConfig {
        sampling,
        render_size: 64,
        retry: RetryPolicy { attempts: 3, base_delay: Duration::from_millis(1), jitter: 0.5 },
        ..Default::default()
    }
}

const VALID: &str = "<think>\nStep 1: draw a red square\n</think>\n<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 8 8\"><rect width=\"8\" height=\"8\" fill=\"red\"/></svg>";

#[test]
fn fixtures_cover_each_outcome() {
    let ok = interpret("p", VALID.into(), 32);
    assert!(ok.is_valid() && !ok.salvaged);
    assert_eq!(ok.think_trace, vec!["draw a red square"]);
    assert_eq!(ok.image.as_ref().unwrap().pixel(16, 16), [255, 0, 0, 255]);

    let trailing = interpret("p", format!("{VALID}\nHope this helps! <b>"), 32);
    assert!(trailing.is_valid() && !trailing.salvaged);
    assert!(trailing.svg_code.unwrap().ends_with("</svg>"));

    let cut = VALID.replace("</svg>", "<circle cx=");
    let salvaged = interpret("p", cut, 32);
    assert!(salvaged.is_valid() && salvaged.salvaged, "{:?}", salvaged.failure);

    let no_think = interpret("p", VALID.replace("<think>", ""), 32);
    assert_eq!(no_think.failure, Some(FailureReason::NoThinkBlock));

    let garbage = interpret("p", "<think>a</think> I cannot draw that.".into(), 32);
    assert!(matches!(garbage.failure, Some(FailureReason::UnparseableSvg(_))));

    let flat = interpret("p", VALID.replace("0 0 8 8", "0 0 0 8"), 32);
    assert!(matches!(flat.failure, Some(FailureReason::UnparseableSvg(_))), "{:?}", flat.failure);

    let tiny = interpret("p", VALID.into(), 8);
    assert!(matches!(tiny.failure, Some(FailureReason::RenderError(_))), "{:?}", tiny.failure);
    assert!(tiny.svg_code.is_some());
}

#[test]
fn sampling_parameters_are_sent_exactly() {
    let server = MockServer::start(MockConfig { capture: true, ..Default::default() }).unwrap();
    let client = ChatCompletionsClient::new(&server.url(), None, Duration::from_secs(10));
    let greedy = generate(&client, "a red circle", &config(Sampling::Greedy)).unwrap();
    assert!(greedy.is_valid(), "{:?}", greedy.failure);
    let nucleus = generate(&client, "a red circle", &config(Sampling::nucleus())).unwrap();
    assert!(nucleus.is_valid());
    let bodies: Vec<_> = server.requests().into_iter().map(|r| r.body).collect();
    assert_eq!(bodies[0]["temperature"].as_f64(), Some(0.0));
    assert!(bodies[0].get("top_p").is_none());
    assert_eq!(bodies[1]["top_p"].as_f64(), Some(0.8));
    assert_eq!(bodies[1]["temperature"].as_f64(), Some(1.0));
    assert_eq!(bodies[1]["messages"][1]["content"], "Generate an SVG matching this description: a red circle");
    assert_eq!(bodies[1]["stream"], false);
}

#[test]
fn unreachable_endpoint_is_an_error() {
    let cfg = GenerationConfig { retry: RetryPolicy { attempts: 1, ..Default::default() }, ..config(Sampling::Greedy) };
    let client = ChatCompletionsClient::new("http://127.0.0.1:9", None, Duration::from_secs(2));
    assert!(matches!(generate(&client, "x", &cfg), Err(EndpointError::Transport { .. })));
}

/// Returns a square whose red channel encodes the request seed.
struct Seeded;

impl ChatTransport for Seeded {
    fn complete(&self, req: &ChatRequest) -> Result<String, EndpointError> {
        let seed = req.seed.unwrap_or(0);
        if seed == 99 {
            return Ok("no svg at all".into());
        }
        Ok(format!(
            "<think>\nStep 1: square {seed}\n</think>\n<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 4 4\"><rect width=\"4\" height=\"4\" fill=\"rgb({seed},0,0)\"/></svg>"
        ))
    }
}

/// Image embeddings whose cosine with the text vector is a scripted score
/// chosen by the red channel of the render.
struct Scripted(Vec<f64>);

impl Embedder for Scripted {
    fn embed_image(&self, image: &RasterImage) -> Result<Vec<f64>, ProviderError> {
        let s = self.0[image.pixel(0, 0)[0] as usize];
        Ok(vec![s, (1.0 - s * s).sqrt()])
    }
    fn embed_text(&self, _: &str) -> Result<Vec<f64>, ProviderError> {
        Ok(vec![1.0, 0.0])
    }
}

#[test]
fn best_of_picks_the_highest_score() {
    let cfg = GenerationConfig { seed: Some(0), ..config(Sampling::nucleus()) };
    let pick = best_of(&Seeded, "x", &cfg, 3, &Scripted(vec![0.1, 0.9, 0.5])).unwrap();
    assert_eq!(pick.index, 1);
    assert_eq!(pick.best().think_trace, vec!["square 1"]);
    let again = best_of(&Seeded, "x", &cfg, 3, &Scripted(vec![0.1, 0.9, 0.5])).unwrap();
    assert_eq!(again.index, 1);
    assert_eq!(again.scores, pick.scores);

    let single = best_of(&Seeded, "x", &cfg, 1, &Scripted(vec![0.2])).unwrap();
    let alone = generate(&Seeded, "x", &cfg).unwrap();
    assert_eq!((single.best().raw.as_str(), single.best().svg_code.as_ref()), (alone.raw.as_str(), alone.svg_code.as_ref()));
    let narrow = GenerationConfig { max_inflight: 1, ..cfg.clone() };
    assert_eq!(best_of(&Seeded, "x", &narrow, 3, &Scripted(vec![0.1, 0.9, 0.5])).unwrap().index, 1);

    let tie = best_of(&Seeded, "x", &cfg, 3, &Scripted(vec![0.3, 0.7, 0.7])).unwrap();
    assert_eq!(tie.index, 1);

    let bad = GenerationConfig { seed: Some(99), ..cfg.clone() };
    assert_eq!(best_of(&Seeded, "x", &bad, 1, &Scripted(vec![0.5])).unwrap_err(), InferError::AllInvalid(1));
    let partly = GenerationConfig { seed: Some(98), ..cfg.clone() };
    let mut scores = vec![0.0; 100];
    scores[98] = 0.4;
    let r = best_of(&Seeded, "x", &partly, 2, &Scripted(scores)).unwrap();
    assert_eq!((r.index, r.scores[1]), (0, None));

    let greedy = config(Sampling::Greedy);
    assert_eq!(best_of(&Seeded, "x", &greedy, 3, &Scripted(vec![])).unwrap_err(), InferError::GreedyBestOf);
}

#[test]
fn editing_a_color_word_changes_only_that_step() {
    let server = MockServer::start(MockConfig::default()).unwrap();
    let client = ChatCompletionsClient::new(&server.url(), None, Duration::from_secs(10));
    let cfg = config(Sampling::Greedy);
    let prompt = "a red circle on a gray background";
    let before = generate(&client, prompt, &cfg).unwrap();
    let edited = edit_prompt(prompt, &[("red", "blue")]).unwrap();
    let after = generate(&client, &edited, &cfg).unwrap();
    assert!(before.is_valid() && after.is_valid());
    assert_eq!(before.think_trace[0], after.think_trace[0]);
    assert_ne!(before.think_trace[1], after.think_trace[1]);
    assert!(after.think_trace[1].contains("blue"));

    let (a, b) = (before.image.unwrap(), after.image.unwrap());
    let diff = diff_images(&a, &b, None).unwrap();
    let bbox = diff.changed_bbox.expect("colors differ");
    // Circle at (32, 32) r 18 in a 64 unit viewBox rendered at 64 px.
    assert!(bbox.x >= 13 && bbox.y >= 13 && bbox.x + bbox.width <= 51 && bbox.y + bbox.height <= 51, "{bbox:?}");
    assert_eq!(a.pixel(2, 2), b.pixel(2, 2));
    assert!(matches!(edit_prompt(prompt, &[("a", "the")]), Err(EditError::AmbiguousSpan { .. })));
}

fn fragment() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(vec![
            "<think>", "</think>", "\n", "Step 1: ", "<svg", "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 4 4\">",
            "</svg>", "<rect width=\"2\" height=\"2\"/>", "<g>", "</g>", "<circle r=", "\"", ">", "<", "/>", "<!--", "-->",
            "viewBox=\"0 0 0 0\"", "<path d=\"M0 0L", "&amp;", "&bogus;",
        ])
        .prop_map(str::to_owned),
        ".{0,10}",
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn interpretation_is_total(parts in prop::collection::vec(fragment(), 0..16)) {
        let raw = parts.concat();
        let r = interpret("p", raw.clone(), 16);
        prop_assert_eq!(&r.raw, &raw);
        prop_assert_eq!(r.failure.is_none(), r.image.is_some());
        let again = interpret("p", r.raw.clone(), 16);
        prop_assert_eq!(&again.failure, &r.failure);
        if let Some(code) = &r.svg_code {
            prop_assert!(code.starts_with("<svg"));
        }
    }
}

#[test]
fn inline_trace_and_greedy_determinism() {
    let raw = "<think>Step 1: draw a red circle</think>\n<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 10 10\"><circle cx=\"5\" cy=\"5\" r=\"4\" fill=\"red\"/></svg>";
    let r = interpret("a red circle", raw.into(), 32);
    assert!(r.is_valid());
    assert_eq!(r.think_trace, vec!["draw a red circle"]);

    let server = MockServer::start(MockConfig::default()).unwrap();
    let client = ChatCompletionsClient::new(&server.url(), None, Duration::from_secs(10));
    let cfg = config(Sampling::Greedy);
    let a = generate(&client, "a green triangle", &cfg).unwrap();
    let b = generate(&client, "a green triangle", &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.image, b.image);
}
