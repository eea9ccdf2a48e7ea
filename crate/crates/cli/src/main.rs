use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Parser, Subcommand};
use stepsvg::config::{ConfigLayer, PipelineConfig};
use stepsvg::stages::{self, evaluate::EvaluateArgs, generate::GenerateArgs, Context, StageError, StageReport};
use stepsvg_client::mock::{MockConfig, MockServer};

/// Build step-annotated SVG datasets and run SVG generation.
#[derive(Debug, Parser)]
#[command(name = "stepsvg", version)]
struct Cli {
    /// TOML file of `key = value` settings, overridden by environment and flags.
    #[arg(long, global = true, env = "STEPSVG_CONFIG")]
    config: Option<PathBuf>,
    /// Most pending samples each stage after ingest attempts in this invocation.
    #[arg(long, global = true)]
    limit: Option<usize>,
    #[command(flatten)]
    layer: ConfigLayer,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, normalize and length-filter the corpus.
    Ingest,
    /// Flatten curated documents and write cumulative frames.
    Render,
    /// Describe frames with the annotator and filter the records.
    Annotate,
    /// Build chat records and the train/test split.
    Assemble,
    /// Ingest through assemble in one go.
    Run,
    /// Compute metrics from feature files and generated SVGs.
    Evaluate(EvaluateArgs),
    /// Generate SVGs for a prompt file.
    Generate(GenerateArgs),
    /// Serve the built-in stand-in for the model endpoints.
    MockServe {
        #[arg(long, default_value = "127.0.0.1:8700")]
        bind: String,
        /// Fixed reply to global description requests.
        #[arg(long)]
        global_text: Option<String>,
    },
}

fn run_stages(ctx: &Context, command: &Command) -> Result<Vec<StageReport>, StageError> {
    Ok(match command {
        Command::Ingest => vec![stages::ingest::run(ctx)?],
        Command::Render => vec![stages::render::run(ctx)?],
        Command::Annotate => vec![stages::annotate::run(ctx)?],
        Command::Assemble => vec![stages::assemble::run(ctx)?],
        Command::Run => {
            let mut reports = Vec::new();
            for stage in [stages::ingest::run, stages::render::run, stages::annotate::run, stages::assemble::run] {
                let report = stage(ctx)?;
                let ok = report.ok();
                reports.push(report);
                if !ok {
                    break;
                }
            }
            reports
        }
        Command::Evaluate(args) => vec![stages::evaluate::run(ctx, args)?],
        Command::Generate(args) => vec![stages::generate::run(ctx, args)?],
        Command::MockServe { .. } => Vec::new(),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<bool> {
    let cli = Cli::parse();
    if let Command::MockServe { bind, global_text } = &cli.command {
        let server = MockServer::bind(bind, MockConfig { global_text: global_text.clone(), ..Default::default() })
            .with_context(|| format!("binding {bind}"))?;
        println!("{}", server.url());
        server.wait();
        return Ok(true);
    }
    let config = PipelineConfig::resolve(cli.config.as_deref(), &cli.layer)?;
    let ctx = Context::new(config, cli.limit)?;
    let reports = run_stages(&ctx, &cli.command)?;
    for r in &reports {
        println!("{}", serde_json::to_string(&serde_json::json!({ "stage": r.stage, "counters": r.counters, "resumed": r.resumed }))?);
    }
    Ok(reports.iter().all(StageReport::ok))
}
