use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use safe_formation::harness::{cli, export_csv, run_scenario, RunMetrics, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "safe-formation",
    version,
    about = "Leader-follower formation runs with a field-of-view safety filter"
)]
struct Args {
    /// Output directory.
    #[arg(long, short, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write per-pair CSVs and metrics.
    Run { scenario: PathBuf },
    /// Run with the safety filter on and off using the same seeds.
    Compare { scenario: PathBuf },
    /// Re-run the scenario for each value of one parameter.
    Sweep {
        scenario: PathBuf,
        /// Dotted key path into the scenario file, e.g. `safety.gamma.0`.
        #[arg(long)]
        param: String,
        #[arg(long, num_args = 1.., required = true)]
        values: Vec<String>,
    },
    /// Print the built-in three-stage scenario as a scenario file.
    Template {
        #[arg(long, default_value_t = 2)]
        agents: usize,
    },
}

fn report(label: &str, m: &RunMetrics) {
    for p in &m.pairs {
        println!(
            "{label}pair {}: fov_violations={} blind={} infeasible={} filter_active={} min_h={:.4}",
            p.pair,
            p.fov_violation_steps,
            p.blind_steps,
            p.infeasible_steps,
            p.filter_active_steps,
            p.min_barrier()
        );
    }
    if let Some(f) = &m.fault {
        println!("{label}fault: {f}");
    }
}

fn exit_for(clean: bool) -> ExitCode {
    if clean {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> anyhow::Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let load = |p: &PathBuf| ScenarioConfig::load(p).with_context(|| format!("loading {}", p.display()));
    match args.command {
        Command::Run { scenario } => {
            let cfg = load(&scenario)?;
            let log = run_scenario(&cfg)?;
            export_csv(&log, &args.out)?;
            report("", &log.metrics);
            Ok(exit_for(log.metrics.is_clean()))
        }
        Command::Compare { scenario } => {
            let cfg = load(&scenario)?;
            let (on, off, summary) = cli::compare(&cfg, &args.out)?;
            report("[filter on]  ", &on);
            report("[filter off] ", &off);
            print!("{}", summary.to_text());
            Ok(exit_for(on.is_clean() && off.is_clean()))
        }
        Command::Sweep {
            scenario,
            param,
            values,
        } => {
            let cfg = load(&scenario)?;
            let points = cli::sweep(&cfg, &param, &values, &args.out)?;
            let mut clean = true;
            for p in &points {
                report(&format!("[{param}={}] ", p.value), &p.metrics);
                clean &= p.metrics.is_clean();
            }
            Ok(exit_for(clean))
        }
        Command::Template { agents } => {
            print!("{}", ScenarioConfig::three_stage(agents, true).to_toml_string());
            Ok(ExitCode::SUCCESS)
        }
    }
}
