use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use precut::experiment::{default_scene, run, ArmKind, RunConfig};
use precut::scene::{validate_scene, LabeledCloud};
use precut::simworld::{truth_path, SceneTruth, VineScene};

#[derive(Parser)]
#[command(name = "precut", version, about = "Bimanual pre-cut harvesting simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArmModelArg {
    Freeflyer,
    Serial6,
}

#[derive(Subcommand)]
enum Command {
    /// Run the closed-loop experiment and write trace, metrics and snapshots.
    Run {
        /// Scene CSV (a `.truth` file with the same stem must sit next to it).
        #[arg(long)]
        scene: Option<PathBuf>,
        /// `key = value` configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated seconds.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, value_enum)]
        arm_model: Option<ArmModelArg>,
        /// Log every control step instead of every 10th.
        #[arg(long)]
        full_rate: bool,
    },
    /// Check a scene CSV and print per-label counts.
    Validate { path: PathBuf },
    /// Write a generated scene CSV and its truth sidecar.
    GenerateScene {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: Option<&PathBuf>, seed: Option<u64>) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => RunConfig::from_file(p).with_context(|| format!("reading config {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scene,
            config,
            out,
            seed,
            duration,
            arm_model,
            full_rate,
        } => {
            let mut cfg = load_config(config.as_ref(), seed)?;
            if let Some(d) = duration {
                cfg.duration = d;
            }
            if let Some(a) = arm_model {
                cfg.arm = match a {
                    ArmModelArg::Freeflyer => ArmKind::FreeFlyer,
                    ArmModelArg::Serial6 => ArmKind::Serial6,
                };
            }
            if full_rate {
                cfg.log_every = 1;
            }
            cfg.validate()?;
            let vine = match &scene {
                Some(path) => {
                    let cloud = LabeledCloud::read_csv(path).with_context(|| format!("reading scene {}", path.display()))?;
                    let tp = truth_path(path);
                    let truth = SceneTruth::read(&tp).with_context(|| format!("reading {}", tp.display()))?;
                    // the camera start comes from the generated layout for the same settings
                    let camera_start = default_scene(&cfg)?.camera_start;
                    VineScene::from_cloud(cloud, &truth, camera_start)?
                }
                None => default_scene(&cfg)?,
            };
            let started = Instant::now();
            let output = run(&cfg, &vine)?;
            output
                .write(&out)
                .with_context(|| format!("writing outputs to {}", out.display()))?;
            let m = &output.metrics;
            println!(
                "simulated {:.3} s in {:.2} s wall-clock; {} trace rows written to {}",
                m.duration,
                started.elapsed().as_secs_f64(),
                output.trace.len(),
                out.display()
            );
            match m.transition_time {
                Some(t) => println!("bimanual phase started at {t:.3} s"),
                None if !m.stem_detected => println!("stem never detected"),
                None => println!("no transition to the bimanual phase"),
            }
            println!(
                "final roi distance {:.4} m, centering angle {:.4} rad, visible stem points {}",
                m.final_roi_dist, m.final_theta, m.visible_final
            );
            Ok(())
        }
        Command::Validate { path } => {
            let report = validate_scene(&path).with_context(|| format!("validating {}", path.display()))?;
            println!("{report}");
            Ok(())
        }
        Command::GenerateScene { out, config, seed } => {
            let cfg = load_config(config.as_ref(), seed)?;
            let vine = default_scene(&cfg)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            vine.full_cloud.write_csv(&out)?;
            vine.truth().write(truth_path(&out))?;
            println!(
                "wrote {} points ({} stem) to {}",
                vine.full_cloud.len(),
                vine.stem_points.len(),
                out.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
