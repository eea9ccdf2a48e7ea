//! The binary's configuration layering, exit codes and generation command.

use std::path::Path;
use std::process::{Command, Output};

use stepsvg_client::mock::{MockConfig, MockServer};

fn stepsvg(root: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_stepsvg"));
    cmd.current_dir(root).args(args).env("RUST_LOG", "warn");
    for var in ["STEPSVG_CANVAS_SIZE", "STEPSVG_CONFIG", "ANNOTATOR_ENDPOINT", "SERVICES_ENDPOINT", "GEN_ENDPOINT"] {
        cmd.env_remove(var);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn corpus(root: &Path) {
    std::fs::create_dir_all(root.join("corpus")).unwrap();
    std::fs::write(
        root.join("corpus/a.svg"),
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 10 10"><rect width="5" height="5"/></svg>"#,
    )
    .unwrap();
}

fn canvas_size(root: &Path) -> u64 {
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(root.join("out/run_manifest.json")).unwrap()).unwrap();
    m["config"]["canvas_size"].as_u64().unwrap()
}

#[test]
fn flags_beat_environment_beat_file() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    corpus(root);
    std::fs::write(root.join("stepsvg.toml"), "canvas_size = 64\nannotator_api_key = \"secret-key\"\n").unwrap();

    let out = stepsvg(root, &["--config", "stepsvg.toml", "ingest"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(canvas_size(root), 64);

    stepsvg(root, &["--config", "stepsvg.toml", "ingest"], &[("STEPSVG_CANVAS_SIZE", "128")]);
    assert_eq!(canvas_size(root), 128);

    stepsvg(root, &["--config", "stepsvg.toml", "--canvas-size", "96", "ingest"], &[("STEPSVG_CANVAS_SIZE", "128")]);
    assert_eq!(canvas_size(root), 96);

    let manifest = std::fs::read_to_string(root.join("out/run_manifest.json")).unwrap();
    assert!(!manifest.contains("secret-key"));
}

#[test]
fn bad_configuration_fails_before_any_stage() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let out = stepsvg(dir.path(), &["--canvas-size", "4", "ingest"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
    std::fs::write(dir.path().join("bad.toml"), "no_such_key = 1\n").unwrap();
    let out = stepsvg(dir.path(), &["--config", "bad.toml", "ingest"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn annotate_without_endpoint_is_a_precondition_failure() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    assert!(stepsvg(dir.path(), &["ingest"], &[]).status.success());
    assert!(stepsvg(dir.path(), &["render"], &[]).status.success());
    let out = stepsvg(dir.path(), &["annotate"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("annotator endpoint"));
}

#[test]
fn generate_writes_results_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(root.join("prompts.txt"), "# icons\na flat red circle icon\n\na flat blue square icon\n").unwrap();
    let server = MockServer::start(MockConfig::default()).unwrap();
    let url = server.url();
    let env = [("GEN_ENDPOINT", url.as_str()), ("SERVICES_ENDPOINT", url.as_str())];

    let out = stepsvg(root, &["--canvas-size", "64", "generate", "--prompts", "prompts.txt"], &env);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let gens: Vec<_> = std::fs::read_dir(root.join("out/generations")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(gens.iter().filter(|p| p.extension().is_some_and(|e| e == "json")).count(), 2);
    assert_eq!(gens.iter().filter(|p| p.extension().is_some_and(|e| e == "svg")).count(), 2);
    assert_eq!(gens.iter().filter(|p| p.extension().is_some_and(|e| e == "png")).count(), 2);
    let calls = server.chat_calls();

    let args = ["--canvas-size", "64", "generate", "--prompts", "prompts.txt", "--sampling", "nucleus", "--best-of", "3"];
    let out = stepsvg(root, &args, &env);
    assert!(out.status.success());
    assert_eq!(server.chat_calls(), calls, "finished prompts are not regenerated");

    let out = stepsvg(root, &["evaluate"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(root.join("out/metrics_report.json")).unwrap()).unwrap();
    assert_eq!(report["sample_count"], 2);
    assert_eq!(report["avg_primitives_used"], 2.0);
}

#[test]
fn greedy_best_of_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.txt"), "x\n").unwrap();
    let out = stepsvg(
        dir.path(),
        &["generate", "--prompts", "p.txt", "--best-of", "2"],
        &[("GEN_ENDPOINT", "http://127.0.0.1:9"), ("SERVICES_ENDPOINT", "http://127.0.0.1:9")],
    );
    assert_eq!(out.status.code(), Some(2));
}
