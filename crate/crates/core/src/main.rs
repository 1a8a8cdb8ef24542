use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use oamsim::analysis::SegmentOptions;
use oamsim::runner::{analyze_frames_dir, reproduce, run_experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "oamsim", version, about = "OAM photon-state link simulator and measurement pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sent state of a config and write frames, tables, and a manifest.
    Simulate { config: PathBuf },
    /// Measure a directory of PGM frames against a sent superposition.
    Analyze {
        frames_dir: PathBuf,
        #[arg(long)]
        ell: u32,
        /// Sent relative phase, degrees.
        #[arg(long = "sent-theta", allow_negative_numbers = true)]
        sent_theta: f64,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Run a canned recipe; `list` prints the registry.
    Reproduce { name: String },
    /// Check a config and print every problem found.
    Validate { config: PathBuf },
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let manifest = run_experiment(&cfg).with_context(|| format!("simulating {}", config.display()))?;
            for s in &manifest.states {
                println!(
                    "state {:>2} {:<13} ell {:>2} frames {:>5} failures {:>4} fidelity {} deviation {}",
                    s.index,
                    s.kind,
                    s.ell,
                    s.frames,
                    s.failures,
                    s.mean_fidelity.map_or("-".into(), |v| format!("{v:.4}")),
                    s.mean_deviation_deg.map_or("-".into(), |v| format!("{v:.2}°")),
                );
            }
            println!(
                "wrote {} files to {} in {:.1} s",
                manifest.files.len() + 1,
                cfg.output_dir.display(),
                manifest.run.wall_clock_s
            );
            Ok(true)
        }
        Command::Analyze {
            frames_dir,
            ell,
            sent_theta,
            threshold,
        } => {
            let opts = SegmentOptions {
                threshold_fraction: threshold,
                ..Default::default()
            };
            let series = analyze_frames_dir(&frames_dir, ell, sent_theta, &opts)?;
            println!("frame,angle_deg,theta_deg,quality,fidelity");
            for s in &series.samples {
                match s.orientation {
                    Some(o) => println!(
                        "{},{:.4},{:.4},{:.4},{:.6}",
                        s.frame_index,
                        o.angle.to_degrees(),
                        o.theta.to_degrees(),
                        o.quality,
                        s.fidelity.unwrap_or(f64::NAN)
                    ),
                    None => println!("{},,,,", s.frame_index),
                }
            }
            eprintln!(
                "{} frames, {} failed; fidelity mean {:.4} std {:.4}; deviation mean {:.2}°",
                series.samples.len(),
                series.failures,
                series.stats.mean,
                series.stats.std,
                series.deviation_stats.mean
            );
            Ok(true)
        }
        Command::Reproduce { name } => {
            if name == "list" {
                for r in reproduce::REGISTRY {
                    println!("{:<26} {}", r.name, r.summary);
                }
                return Ok(true);
            }
            let report = reproduce::reproduce(&name)?;
            print!("{report}");
            Ok(report.passed())
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.validate()?;
            println!("{}: ok ({} states, {} frames each)", config.display(), cfg.states.len(), cfg.frames_per_state);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
