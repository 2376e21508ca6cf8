use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use immunesim::commands::{CompareOptions, MeanfieldSpec};
use immunesim::{cmd_compare, cmd_meanfield, cmd_run, cmd_sweep, CliError, RunOptions, Scenario, SweepAxis};
use immunesim_core::Execution;

#[derive(Parser)]
#[command(name = "immunesim", version, about = "Infectious jailbreak and cure-sample simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run replicates on one thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario TOML file, or a manifest.json from an earlier run.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario's replicates.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also write compressed event logs.
        #[arg(long)]
        events: bool,
    },
    /// Run a scenario once per value of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// kappa, album_size, history_len, r0_count or N.
        #[arg(long)]
        axis: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<usize>,
    },
    /// Integrate the mean-field model.
    Meanfield {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a run made with --events against the mean-field prediction.
    Compare {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Start the prediction once the mean cured ratio reaches this value.
        #[arg(long, default_value_t = CompareOptions::default().start_cured)]
        start_cured: f64,
    },
}

fn load(path: &Option<PathBuf>) -> Result<Scenario, CliError> {
    match path {
        Some(p) => Scenario::load(p),
        None => Ok(Scenario::default()),
    }
}

fn options(c: &Common, events: bool, exec: Execution) -> RunOptions {
    RunOptions { seed: c.seed, replicates: c.replicates, events, out: c.out.clone(), exec }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match cli.command {
        Command::Run { common, events } => {
            let report = cmd_run(&load(&common.scenario)?, &options(&common, events, exec))?;
            let m = &report.summary.mean;
            println!(
                "{}: peak current {:.4} at round {}, final cumulative {:.4}",
                report.out.display(),
                m.peak_current,
                m.peak_round,
                report.aggregate.mean.last().map_or(0.0, |r| r[1]),
            );
        }
        Command::Sweep { common, axis, values } => {
            let axis: SweepAxis = axis.parse()?;
            let points = cmd_sweep(&load(&common.scenario)?, axis, &values, &options(&common, false, exec))?;
            for p in points {
                println!(
                    "{axis}={}: peak current {:.4} at round {}",
                    p.value, p.summary.peak_current, p.summary.peak_round
                );
            }
        }
        Command::Meanfield { params, out } => {
            let report = cmd_meanfield(&MeanfieldSpec::load(&params)?, &out, exec)?;
            println!("final r {:.6}", report.final_r);
            if let Some(g) = report.grid {
                println!("grid: {}/{} points below threshold", g.passed, g.points);
            }
        }
        Command::Compare { run_dir, out, start_cured } => {
            let report = cmd_compare(&run_dir, out.as_deref(), CompareOptions { start_cured })?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            match report.linf_rc {
                Some(rc) => println!("L-inf gap: r {:.4}, rc {rc:.4}", report.linf_r),
                None => println!("L-inf gap: r {:.4}", report.linf_r),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
