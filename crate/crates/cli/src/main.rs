use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use vapor_switch::config::RunConfig;
use vapor_switch::pipeline;
use vapor_switch::Result;

/// Warm-vapor cavity all-optical switch: optical response, detuning sweeps,
/// time-domain switching and contrast fits.
#[derive(Debug, Parser)]
#[command(name = "vapor-switch", version)]
struct Cli {
    /// JSON run configuration; built-in defaults fill anything omitted.
    #[arg(long, env = "VAPOR_SWITCH_CONFIG", global = true)]
    config: Option<PathBuf>,

    /// Override one dotted key, e.g. `--set cell.temperature_k=340`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory (replaces `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Susceptibility, index, absorption and phase versus signal detuning.
    Response,
    /// Phase-shift and transmission maps over both detunings, with contours.
    Sweep2d,
    /// Steady-state contrast and losses along equal detunings.
    Sweep1d,
    /// Time-domain switching traces and window metrics per modulation rate.
    Dynamics,
    /// Fit temperature and intra-cavity control power to contrast data.
    Fit {
        /// `detuning_ghz,contrast` CSV; synthetic data when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Finesse, ring-up time, bandwidth and resonant ports of the cavity.
    CavityInfo,
    /// Print the fully resolved configuration.
    ShowConfig,
}

/// Writes a line to stdout, treating a closed pipe (e.g. `| head`) as done.
fn emit(line: &str) {
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = writeln!(stdout, "{line}") {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            eprintln!("error: writing to stdout: {e}");
        }
    }
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        emit(&p.display().to_string());
    }
}

fn json(value: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn run(cli: Cli) -> Result<()> {
    let mut config = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    match cli.command {
        Command::Response => print_paths(&pipeline::cmd_response(&config)?),
        Command::Sweep2d => print_paths(&pipeline::cmd_sweep2d(&config)?),
        Command::Sweep1d => print_paths(&pipeline::cmd_sweep1d(&config)?),
        Command::Dynamics => {
            let (summary, paths) = pipeline::cmd_dynamics(&config)?;
            for r in &summary.rates {
                log::info!(
                    "{} Hz: contrast {:.3}, extinction {:.1} dB, insertion loss {:.2} dB",
                    r.modulation_rate_hz,
                    r.metrics.contrast,
                    r.metrics.extinction_db,
                    r.metrics.insertion_loss_db
                );
            }
            print_paths(&paths);
        }
        Command::Fit { data } => {
            let (outcome, paths) = pipeline::cmd_fit(&config, data.as_deref())?;
            for r in [&outcome.nelder_mead, &outcome.grid_refine] {
                log::info!(
                    "{:?}: T = {:.3} K, P = {:.4} W, residual {:.4e}",
                    r.method,
                    r.best_params.temperature,
                    r.best_params.intracavity_power,
                    r.residual_norm
                );
            }
            print_paths(&paths);
        }
        Command::CavityInfo => emit(&json(&pipeline::cavity_info(&config)?)?),
        Command::ShowConfig => {
            config.prepare()?;
            emit(&json(&config)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
