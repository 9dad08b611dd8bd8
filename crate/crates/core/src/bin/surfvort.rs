use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use surfvort::conformal::{CmcfParams, DEFAULT_DELTA, DEFAULT_MAX_ITERS, DEFAULT_TOLERANCE};
use surfvort::dynamics::SelfTermSign;
use surfvort::error::{Error, EXIT_CONFIG};
use surfvort::pipeline;
use surfvort::scenario::{Scenario, PRESETS};

/// Point-vortex simulation on the plane, the sphere and closed genus-zero
/// meshes.
#[derive(Parser)]
#[command(name = "surfvort", version)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trajectories, energies and maps.
    Run {
        /// Scenario JSON file.
        #[arg(required_unless_present = "preset", conflicts_with = "preset")]
        scenario: Option<PathBuf>,
        /// Use a bundled preset instead of a file.
        #[arg(long)]
        preset: Option<String>,
        /// Output directory (overrides the scenario's).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sign of the conformal self term: +1 or -1.
        #[arg(long, allow_hyphen_values = true)]
        self_term_sign: Option<SelfTermSign>,
    },
    /// Map a closed genus-zero OBJ mesh to the unit sphere.
    ConformalMap {
        mesh: PathBuf,
        #[command(flatten)]
        flow: FlowArgs,
        /// Output directory.
        #[arg(long, default_value = "conformal_out")]
        out: PathBuf,
    },
    /// Evaluate the velocity (and stream) field of a scenario's initial state.
    Field {
        scenario: PathBuf,
        /// ring:R:N[:cx:cy[:cz]], rect:x0:x1:y0:y1:nx:ny, latlon:NLAT:NLON or fibonacci:N
        #[arg(long)]
        grid: String,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw area-weighted random points on a mesh and its sphere image.
    Sample {
        mesh: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        flow: FlowArgs,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the bundled presets, or write them as JSON files.
    Presets {
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FlowArgs {
    /// Flow step.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    /// Sphericity tolerance.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
}

impl FlowArgs {
    fn params(&self) -> CmcfParams {
        CmcfParams {
            delta: self.delta,
            tol: self.tol,
            max_iters: self.max_iters,
            min_iters: 0,
        }
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<i32, Error> {
    match command {
        Command::Run {
            scenario,
            preset,
            out,
            self_term_sign,
        } => {
            let scenario = match (scenario, preset) {
                (Some(path), _) => Scenario::load(path)?,
                (None, Some(name)) => Scenario::preset(&name)
                    .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))?,
                (None, None) => return Err(Error::Config("no scenario given".into())),
            };
            let report = pipeline::run(&scenario, out.as_deref(), self_term_sign)?;
            let m = &report.manifest;
            println!(
                "{}: {} after {} steps; {} drift {}; outputs in {}",
                m.scenario,
                m.status,
                m.completed_steps,
                m.energy_quantity,
                m.final_energy_drift
                    .map_or("n/a".into(), |d| format!("{d:e}")),
                report.out_dir.display()
            );
            if let Some(e) = &m.error {
                eprintln!("error: {e}");
            }
            Ok(report.exit_code())
        }
        Command::ConformalMap { mesh, flow, out } => {
            let report = pipeline::conformal_map(&mesh, &flow.params(), &out)?;
            print!("{}", report.to_text());
            Ok(0)
        }
        Command::Field {
            scenario,
            grid,
            out,
        } => {
            let scenario = Scenario::load(scenario)?;
            emit(&pipeline::field(&scenario, &grid)?, out.as_ref())?;
            Ok(0)
        }
        Command::Sample {
            mesh,
            count,
            seed,
            flow,
            out,
        } => {
            emit(
                &pipeline::sample(&mesh, count, seed, &flow.params())?,
                out.as_ref(),
            )?;
            Ok(0)
        }
        Command::Presets { write } => {
            match write {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                    for (name, json) in PRESETS {
                        let path = dir.join(format!("{name}.json"));
                        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
                    }
                }
                None => PRESETS.iter().for_each(|(name, _)| println!("{name}")),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
