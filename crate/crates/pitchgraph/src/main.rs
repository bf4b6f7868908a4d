use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pitchgraph::config::PipelineConfig;
use pitchgraph::pipeline::{run_stage, Stage};
use pitchgraph::synth::{synth_match, SynthConfig};
use pitchgraph::PipelineError;

#[derive(Parser)]
#[command(name = "pitchgraph", version, about = "Soccer action spotting from player graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct StageArgs {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Filter frames and people, project positions, compute color histograms.
    Ingest(StageArgs),
    /// Cluster players into five classes and train the player classifier.
    Teams(StageArgs),
    /// Camera-compensated player motion.
    Motion(StageArgs),
    /// Build per-frame player graphs and 15 s windows.
    Graphs(StageArgs),
    /// Train the spotting network.
    Train(StageArgs),
    /// Run inference and non-maximum suppression.
    Spot(StageArgs),
    /// Score predictions with tolerance-windowed average-mAP.
    Eval(StageArgs),
    /// Run every stage in order.
    All(StageArgs),
    /// Generate a synthetic match with a matching config file.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SynthConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = SynthConfig::default().duration_s)]
        duration_s: f64,
    },
}

fn load(args: &StageArgs) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = PipelineConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn stages(args: &StageArgs, stages: &[Stage]) -> Result<(), PipelineError> {
    let cfg = load(args)?;
    for &stage in stages {
        let out = run_stage(stage, &cfg)?;
        let tag = if out.cached { " [cached]" } else { "" };
        println!("{}{tag}", out.summary);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Ingest(a) => stages(&a, &[Stage::Ingest]),
        Command::Teams(a) => stages(&a, &[Stage::Teams]),
        Command::Motion(a) => stages(&a, &[Stage::Motion]),
        Command::Graphs(a) => stages(&a, &[Stage::Graphs]),
        Command::Train(a) => stages(&a, &[Stage::Train]),
        Command::Spot(a) => stages(&a, &[Stage::Spot]),
        Command::Eval(a) => stages(&a, &[Stage::Eval]),
        Command::All(a) => stages(&a, &Stage::ALL),
        Command::Synth { out, seed, duration_s } => {
            if !(duration_s > 0.0 && duration_s.is_finite()) {
                return Err(PipelineError::Config("--duration-s must be positive".into()));
            }
            let s = synth_match(&out, &SynthConfig { duration_s, seed })?;
            println!(
                "synth: {} frames, {} detections, {} annotations; config at {}",
                s.frames,
                s.detections,
                s.annotations.len(),
                s.config_path.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
