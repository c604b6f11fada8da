//! Command-line driver: one subcommand per pipeline stage plus reporting
//! helpers. Stage outputs are JSONL files, so stages chain by pointing one
//! command's `--out` at the next one's `--in`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use legacy_forge_core::config::PipelineConfig;
use legacy_forge_core::evalbench::{render_report_table, EvalReport};
use legacy_forge_core::filter::corpus_stats;
use legacy_forge_core::ingest::SourceUnit;
use legacy_forge_core::jsonl;
use legacy_forge_core::pipeline::{summaries_table, StageKind, StageRunner};
use legacy_forge_core::Result;

#[derive(Parser)]
#[command(
    name = "legacy-forge",
    version,
    about = "COBOL corpus curation and model evaluation pipeline"
)]
struct Cli {
    /// Pipeline configuration file (TOML). Defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override the deterministic seed (fingerprinting and hash embeddings).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Serve every model role from this transcript file (offline replay).
    #[arg(long, global = true, value_name = "FILE")]
    mock_transcript: Option<PathBuf>,

    /// Replace the compile/run backend with this scripted stub.
    #[arg(long, global = true, value_name = "FILE")]
    stub_toolchain: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// Input file (JSONL), or a directory to scan for `ingest`.
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,

    /// Output JSONL file; audit side files land next to it.
    #[arg(long = "out", value_name = "FILE")]
    output: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Collect source files from a local tree and/or the configured code host.
    Ingest(StageArgs),
    /// Drop low-quality files (length, symbol ratio, non-text content).
    Filter(StageArgs),
    /// Drop near-duplicate files via MinHash/LSH clustering.
    Dedup(StageArgs),
    /// Compile every program, repairing failures with bounded model loops.
    Repair(StageArgs),
    /// Translate Java programs into candidate COBOL pairs.
    Translate(StageArgs),
    /// Validate pairs: compile/repair, pair scoring, back-translation check.
    ValidatePairs(StageArgs),
    /// Generate instruction samples from curated programs or validated pairs.
    Instruct(StageArgs),
    /// Synthesize question-answer pairs from documentation records.
    Qa(StageArgs),
    /// Evaluate a model on a benchmark file and write the report.
    Eval {
        #[command(flatten)]
        stage: StageArgs,
        /// Override the configured number of averaged runs.
        #[arg(long, value_name = "N")]
        runs: Option<u32>,
    },
    /// Render one or more evaluation reports as a comparison table.
    Report {
        /// Report files produced by `eval`.
        #[arg(required = true, value_name = "FILE")]
        reports: Vec<PathBuf>,
    },
    /// Print corpus statistics for a unit file.
    Stats {
        #[arg(value_name = "FILE")]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_environment() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_toml_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.dedup.minhash.seed = seed;
        cfg.embedding.seed = seed;
    }

    let (kind, stage_args) = match cli.command {
        Command::Ingest(args) => (StageKind::Ingest, args),
        Command::Filter(args) => (StageKind::Filter, args),
        Command::Dedup(args) => (StageKind::Dedup, args),
        Command::Repair(args) => (StageKind::Repair, args),
        Command::Translate(args) => (StageKind::Translate, args),
        Command::ValidatePairs(args) => (StageKind::ValidatePairs, args),
        Command::Instruct(args) => (StageKind::Instruct, args),
        Command::Qa(args) => (StageKind::Qa, args),
        Command::Eval { stage, runs } => {
            if let Some(runs) = runs {
                cfg.eval.runs = runs;
                cfg.validate()?;
            }
            (StageKind::Eval, stage)
        }
        Command::Report { reports } => {
            let mut all: Vec<EvalReport> = Vec::new();
            for path in &reports {
                all.extend(jsonl::read_all::<EvalReport>(path)?);
            }
            print!("{}", render_report_table(&all));
            return Ok(());
        }
        Command::Stats { input } => {
            let units: Vec<SourceUnit> = jsonl::read_all(&input)?;
            let stats = corpus_stats(&units);
            println!("files: {}", stats.files);
            println!("tokens: {}", stats.tokens);
            return Ok(());
        }
    };

    let mut runner = StageRunner::new(cfg);
    if let Some(path) = cli.mock_transcript {
        runner = runner.with_mock_transcript(path);
    }
    if let Some(path) = cli.stub_toolchain {
        runner = runner.with_stub_toolchain(path);
    }
    let summary = runner.run_stage(kind, &stage_args.input, &stage_args.output)?;
    print!("{}", summaries_table(std::slice::from_ref(&summary)));
    Ok(())
}
