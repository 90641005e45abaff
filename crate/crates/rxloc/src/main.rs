use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use rxloc::config::{load_config, PipelineConfig};
use rxloc::error::{Error, Result};
use rxloc::pipeline::{parse_stages, run_pipeline, Stage};

/// Fault-location workbench for a mixed overhead/cable transmission
/// line: simulates single-line-to-ground faults, renders the distance
/// relay's R-X impedance trajectory to images, extracts co-occurrence
/// texture features, and trains and compares distance estimators.
#[derive(Debug, Parser)]
#[command(name = "rxloc", version, about)]
struct Cli {
    /// TOML config file; every key has a documented default.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Output root for all artifacts (overrides the config value).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<String>,

    /// Master seed (overrides the config value).
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,

    /// Comma-separated stage subset for `pipeline`
    /// (simulate,render,features,train,eval).
    #[arg(long, global = true, value_name = "LIST")]
    stages: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the fault scenarios and write scenarios.csv and loci.csv.
    Simulate,
    /// Rasterize persisted loci into PGM images.
    Render,
    /// Extract texture features from persisted images.
    Features,
    /// Train every roster model on persisted features.
    Train,
    /// Score persisted models and write the report files.
    Eval,
    /// Run all stages, or the subset given with --stages.
    Pipeline,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => load_config(path)?.config,
        None => PipelineConfig::default(),
    };
    if let Some(out) = cli.out {
        config.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    let stages: Vec<Stage> = match cli.command {
        Command::Pipeline => match &cli.stages {
            Some(list) => parse_stages(list)?,
            None => Stage::ALL.to_vec(),
        },
        ref single => {
            if cli.stages.is_some() {
                return Err(Error::Config(
                    "--stages only applies to the `pipeline` subcommand".into(),
                ));
            }
            vec![match single {
                Command::Simulate => Stage::Simulate,
                Command::Render => Stage::Render,
                Command::Features => Stage::Features,
                Command::Train => Stage::Train,
                Command::Eval => Stage::Eval,
                Command::Pipeline => unreachable!("handled above"),
            }]
        }
    };

    // Warnings reach stderr and the manifest; they never block the run.
    let manifest = run_pipeline(&config, &stages)?;
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    for s in &manifest.stages {
        println!(
            "{:<9} {:>7.2}s  {} artifact(s)",
            s.stage,
            s.seconds,
            s.artifacts.len()
        );
    }
    println!("manifest content hash {}", manifest.content_hash);
    Ok(())
}
