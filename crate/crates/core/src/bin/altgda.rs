use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use altgda::harness::{self, exit, figures, ExperimentConfig, Outcome};
use altgda::{Error, Result};

/// Alternating vs simultaneous gradient play in bilinear zero-sum games.
#[derive(Parser)]
#[command(name = "altgda", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Config file, or `preset:NAME` for a built-in figure setup.
    config: String,
    /// Overrides the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out the dynamics and write trajectory, metrics and report.
    Simulate(ConfigArg),
    /// Regret against a fixed strategy, summed and in closed form.
    Regret {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated fixed strategy for agent 1.
        #[arg(long, allow_hyphen_values = true)]
        fixed: String,
    },
    /// Per-round energy identities and perturbed-energy drift.
    Invariants(ConfigArg),
    /// Step-size certificate and orbit bound checks.
    Bounds(ConfigArg),
    /// Return times to a neighbourhood of the start.
    Recurrence {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Hull area of a point cloud under the configured mode (1x1 games).
    Volume {
        #[command(flatten)]
        config: ConfigArg,
        /// File with one `x1,x2` pair per line.
        #[arg(long)]
        cloud: PathBuf,
    },
    /// Regenerate the data and plots of a figure preset.
    Figures {
        /// One of fig1, fig2a, fig2b, fig3, fig4.
        preset: String,
        #[arg(long, default_value = "figures")]
        out: PathBuf,
        #[arg(long)]
        no_svg: bool,
    },
    /// Run `simulate` on several configs in parallel.
    Batch {
        configs: Vec<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn load(arg: &str, out: Option<&Path>) -> Result<ExperimentConfig> {
    let mut config = match arg.strip_prefix("preset:") {
        Some(name) => figures::preset_config(name, out.unwrap_or(Path::new(name)))?,
        None => ExperimentConfig::load(Path::new(arg))?,
    };
    if let Some(dir) = out {
        config.output_dir = dir.to_path_buf();
    }
    Ok(config)
}

fn load_arg(arg: &ConfigArg) -> Result<ExperimentConfig> {
    load(&arg.config, arg.out.as_deref())
}

fn report(outcome: &Outcome) -> i32 {
    print!("{}", outcome.summary);
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    match &outcome.status {
        harness::Status::Ok => {}
        harness::Status::Diverged { step } => eprintln!("error: diverged at step {step}"),
        harness::Status::InvariantFailure(msg) => eprintln!("error: {msg}"),
    }
    outcome.exit_code()
}

fn run(cli: Cli) -> Result<i32> {
    let outcome = match cli.command {
        Command::Simulate(arg) => harness::simulate(&load_arg(&arg)?)?,
        Command::Regret { config, fixed } => {
            let fixed = harness::config::parse_vector(&fixed).map_err(|reason| Error::Invalid {
                what: "--fixed",
                reason,
            })?;
            harness::regret(&load_arg(&config)?, &fixed)?
        }
        Command::Invariants(arg) => harness::invariants(&load_arg(&arg)?)?,
        Command::Bounds(arg) => harness::bounds(&load_arg(&arg)?)?,
        Command::Recurrence { config, epsilon } => {
            harness::recurrence(&load_arg(&config)?, epsilon)?
        }
        Command::Volume { config, cloud } => {
            let text = std::fs::read_to_string(&cloud)?;
            let points = harness::parse_cloud(&text)?;
            harness::volume(&load_arg(&config)?, &points)?
        }
        Command::Figures { preset, out, no_svg } => {
            let files = figures::generate(&preset, &out, !no_svg)?;
            for f in &files {
                println!("wrote {}", f.display());
            }
            return Ok(exit::SUCCESS);
        }
        Command::Batch { configs, jobs } => {
            let configs = configs
                .iter()
                .map(|c| load(c, None))
                .collect::<Result<Vec<_>>>()?;
            let mut code = exit::SUCCESS;
            for (config, result) in configs.iter().zip(harness::batch(&configs, jobs)?) {
                println!("[{}]", config.output_dir.display());
                let c = match result {
                    Ok(outcome) => report(&outcome),
                    Err(e) => {
                        eprintln!("error: {e}");
                        harness::error_exit_code(&e)
                    }
                };
                code = code.max(c);
            }
            return Ok(code);
        }
    };
    Ok(report(&outcome))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            harness::error_exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
