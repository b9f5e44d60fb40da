//! Command-line front end: runs configured experiments, refinement studies,
//! suites of configs, and single geodesic integrations.
//!
//! Artifact directories default to a subdirectory named after the config
//! file under `LAB_ARTIFACT_DIR` (or the current directory when unset).

use clap::{Parser, Subcommand, ValueEnum};
use mapflow::error::LabError;
use mapflow::geodesic::{self, GeodesicState};
use mapflow::geometry::{GeometryKind, TargetChart};
use mapflow::harness::{self, ExperimentConfig};
use mapflow::linalg;
use mapflow::potential::{Potential, PotentialKind};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "lab",
    about = "Numerical laboratory for harmonic maps with potential"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write its artifact set.
    Run {
        config: PathBuf,
        /// Artifact directory (default: <LAB_ARTIFACT_DIR>/<config stem>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun a config at halved grid spacings and report observed orders.
    Refine {
        config: PathBuf,
        #[arg(long, default_value_t = 2)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every config listed in a manifest and aggregate the summaries.
    Suite {
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a single geodesic (with potential force) and audit energy
    /// conservation.
    Geodesic {
        #[arg(long, value_enum, default_value_t = GeometryArg::Euclidean)]
        geometry: GeometryArg,
        #[arg(long, default_value_t = 2)]
        target_dim: usize,
        #[arg(long, default_value_t = 1.0)]
        curvature_scale: f64,
        #[arg(long, value_enum, default_value_t = PotentialArg::Zero)]
        potential: PotentialArg,
        /// Coefficient for the non-trivial potentials.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Frequency for the cosine-of-distance potential.
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        /// Initial chart position, comma-separated.
        #[arg(long, value_delimiter = ',', required = true)]
        position: Vec<f64>,
        /// Initial chart velocity, comma-separated.
        #[arg(long, value_delimiter = ',', required = true)]
        velocity: Vec<f64>,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        /// Optional trajectory CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GeometryArg {
    Euclidean,
    SphereStereographic,
    HyperbolicPoincare,
}

#[derive(Clone, Copy, ValueEnum)]
enum PotentialArg {
    Zero,
    QuadraticRadial,
    CosineOfDistance,
}

fn default_out_dir(config: &Path) -> PathBuf {
    let root = std::env::var_os("LAB_ARTIFACT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    let stem = config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into());
    root.join(stem)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, LabError> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let out_dir = out.unwrap_or_else(|| default_out_dir(&config));
            let outcome = harness::run_experiment(&cfg, Some(&out_dir))?;
            print!("{}", outcome.summary);
            println!("artifacts: {}", out_dir.display());
            Ok(if outcome.any_fail {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Refine { config, levels, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let out_dir = out.unwrap_or_else(|| default_out_dir(&config));
            let report = harness::refinement_study(&cfg, levels, Some(&out_dir))?;
            for level in &report.levels {
                println!("h = {:.6e}  nodes = {}", level.h, level.node_count);
                for (k, v) in &level.metrics {
                    println!("    {k} = {v:.6e}");
                }
            }
            for (k, order) in &report.final_orders {
                println!(
                    "order[{k}] = {order:.3} (window [{}, {}])",
                    report.order_min, report.order_max
                );
            }
            println!("{}", if report.pass { "PASS refinement-orders" } else { "FAIL refinement-orders" });
            Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Suite { manifest, out } => {
            let out_root = out.unwrap_or_else(|| default_out_dir(&manifest));
            let outcome = harness::run_suite(&manifest, &out_root)?;
            print!("{}", outcome.summary);
            Ok(if outcome.any_fail {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Geodesic {
            geometry,
            target_dim,
            curvature_scale,
            potential,
            c,
            kappa,
            position,
            velocity,
            dt,
            t_end,
            out,
        } => {
            let kind = match geometry {
                GeometryArg::Euclidean => GeometryKind::Euclidean,
                GeometryArg::SphereStereographic => GeometryKind::SphereStereographic,
                GeometryArg::HyperbolicPoincare => GeometryKind::HyperbolicPoincare,
            };
            let chart = TargetChart::new(kind, target_dim, curvature_scale)?;
            let potential = Potential::new(match potential {
                PotentialArg::Zero => PotentialKind::Zero,
                PotentialArg::QuadraticRadial => PotentialKind::QuadraticRadial { c },
                PotentialArg::CosineOfDistance => {
                    PotentialKind::CosineOfDistance { c, kappa }
                }
            });
            let state = GeodesicState {
                position: linalg::from_slice(&position),
                velocity: linalg::from_slice(&velocity),
                time: 0.0,
            };
            let trajectory = geodesic::integrate_trajectory(&chart, &potential, state, dt, t_end)?;
            let audit = geodesic::conservation_audit(&trajectory)?;
            if let Some(path) = &out {
                let mut text = String::from("time");
                for i in 1..=target_dim {
                    text.push_str(&format!(",y{i}"));
                }
                for i in 1..=target_dim {
                    text.push_str(&format!(",v{i}"));
                }
                text.push_str(",energy\n");
                for s in &trajectory.samples {
                    text.push_str(&format!("{:.16e}", s.time));
                    for i in 0..target_dim {
                        text.push_str(&format!(",{:.16e}", s.position[i]));
                    }
                    for i in 0..target_dim {
                        text.push_str(&format!(",{:.16e}", s.velocity[i]));
                    }
                    text.push_str(&format!(",{:.16e}\n", s.energy));
                }
                if let Some(parent) = path.parent() {
                    if !parent.as_os_str().is_empty() {
                        std::fs::create_dir_all(parent)?;
                    }
                }
                let mut f = std::fs::File::create(path)?;
                f.write_all(text.as_bytes())?;
            }
            println!(
                "samples = {}, truncated = {}, max energy drift = {:.6e}",
                trajectory.samples.len(),
                trajectory.truncated,
                audit.max_drift
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
