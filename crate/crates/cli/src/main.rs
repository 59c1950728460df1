use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use squeezebeat::runner::{self, ExperimentConfig, RunOptions};
use squeezebeat::Error;

#[derive(Parser)]
#[command(name = "squeezebeat", version, about = "Squeezed-light heterodyne simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a config file. Worker threads come from
    /// $SQUEEZEBEAT_WORKERS (default: all cores).
    Run {
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        frames: Option<usize>,
        /// Output directory for config, summary and spectra.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List built-in presets.
    ListPresets,
    /// Parse and validate a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(preset: Option<String>, config: Option<PathBuf>) -> Result<ExperimentConfig, Error> {
    match (preset, config) {
        (Some(p), None) => runner::preset(&p),
        (None, Some(path)) => ExperimentConfig::from_file(&path),
        _ => Err(Error::Config {
            path: "<cli>".into(),
            message: "exactly one of --preset or --config is required".into(),
        }),
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::ListPresets => {
            for (name, desc) in runner::list_presets() {
                println!("{name:28} {desc}");
            }
        }
        Command::Validate { config } => {
            let c = ExperimentConfig::from_file(&config)?;
            c.validate()?;
            println!("ok {}", c.hash()?);
        }
        Command::Run {
            preset,
            config,
            seed,
            frames,
            out,
        } => {
            let mut c = load(preset, config)?;
            if let Some(s) = seed {
                c.seed = s;
            }
            if let Some(f) = frames {
                c.frames = f;
            }
            if out.is_some() {
                c.output_dir = out;
            }
            let s = runner::run(&c, &RunOptions::default())?;
            println!(
                "{} seed={} frames={} hash={}",
                s.preset.as_deref().unwrap_or("custom"),
                s.seed,
                s.frames,
                s.config_hash
            );
            for b in &s.bands {
                println!(
                    "  {:32} reduction {:7.3} ± {:.3} dB   predicted {:7.3} dB",
                    b.name, b.reduction_db, b.stderr_db, b.predicted_db
                );
            }
            for (k, v) in &s.metrics {
                println!("  {k:40} {v:.6e}");
            }
            println!("  wall time {:.2} s", s.wall_time_s);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
