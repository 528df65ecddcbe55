use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use formation_cli::commands::{self, out_dir, Overrides};
use formation_cli::error::{CliError, EXIT_CERTIFICATION, EXIT_INPUT, EXIT_OK, EXIT_SIMULATION};
use formation_cli::library::{shape_names, shape_scenario};

#[derive(Parser)]
#[command(name = "formation", version, about = "Certify and simulate cyclic-pursuit formations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Default)]
struct RunFlags {
    /// Override the scenario seed (and the Monte Carlo master seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Override the integration step, in seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the simulated duration, in seconds.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Print certification margins as JSON; exit 1 if any check fails.
    Certify {
        scenario: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run a scenario and write trajectory.csv, metrics.json and events.jsonl.
    Simulate {
        scenario: PathBuf,
        /// Output directory; defaults to $FORMATION_OUT_DIR, then ./out.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run the scenario's Monte Carlo campaign and write montecarlo.json.
    Montecarlo {
        scenario: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// List built-in shapes or print a scenario file for one.
    Shapes {
        #[command(subcommand)]
        action: ShapesAction,
    },
}

#[derive(Subcommand)]
enum ShapesAction {
    List,
    Emit {
        name: String,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn overrides(flags: &RunFlags, samples: Option<usize>) -> Overrides {
    Overrides { seed: flags.seed, samples, dt: flags.dt, t_end: flags.t_end }
}

fn json(v: &impl serde::Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Schema(e.to_string()))
}

fn execute(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Certify { scenario, flags } => {
            let mut f = commands::load(&scenario)?;
            overrides(&flags, None).apply(&mut f);
            let doc = commands::certify(&f)?;
            println!("{}", json(&doc)?);
            Ok(if doc.certified { EXIT_OK } else { EXIT_CERTIFICATION })
        }
        Command::Simulate { scenario, out, flags } => {
            let mut f = commands::load(&scenario)?;
            overrides(&flags, None).apply(&mut f);
            let dir = out_dir(out);
            let doc = commands::simulate(&f, &dir)?;
            let run = doc.run.as_ref().expect("simulate fills the run metrics");
            eprintln!(
                "{}: {:?} at t = {} s, formation error {:.3e}, output in {}",
                doc.scenario,
                run.status,
                run.t_final_s,
                run.final_errors.formation_error,
                dir.display()
            );
            Ok(if run.status.is_fatal() { EXIT_SIMULATION } else { EXIT_OK })
        }
        Command::Montecarlo { scenario, samples, out, flags } => {
            let mut f = commands::load(&scenario)?;
            overrides(&flags, samples).apply(&mut f);
            let dir = out_dir(out);
            let r = commands::montecarlo(&f, &dir)?;
            eprintln!(
                "{}: {}/{} converged, {} collisions, output in {}",
                f.meta.name,
                r.converged,
                r.samples,
                r.collision_count,
                dir.display()
            );
            let fatal = r.runs.iter().any(|run| run.status.is_fatal());
            Ok(if fatal { EXIT_SIMULATION } else { EXIT_OK })
        }
        Command::Shapes { action: ShapesAction::List } => {
            for name in shape_names() {
                println!("{name}");
            }
            Ok(EXIT_OK)
        }
        Command::Shapes { action: ShapesAction::Emit { name, out } } => {
            let text = shape_scenario(&name)?.emit()?;
            match out {
                Some(p) => std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))?,
                None => print!("{text}"),
            }
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    // usage errors are input errors, not clap's default exit status
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
