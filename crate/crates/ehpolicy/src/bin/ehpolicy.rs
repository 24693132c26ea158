//! Command-line front end: loads a config, runs one study, writes artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ehpolicy::experiments::{
    self, battery_comparison_csv, compare_csv, distance_sweep_csv, mu_sweep_csv, trace_csv,
};
use ehpolicy::SystemConfig;

#[derive(Parser)]
#[command(
    name = "ehpolicy",
    about = "Distortion-minimizing transmission policies for energy-harvesting sensors",
    version
)]
struct Cli {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Simulation seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Solver stopping threshold override.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the MDP; write the policy lookup table and a JSON summary.
    Solve,
    /// Average cost vs normalized harvest rate, per battery size.
    SweepMu {
        /// Normalized harvest rates to sweep.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0])]
        mu_bar: Vec<f64>,
        /// Normalized battery sizes, one curve each.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 1.5, 2.0, 3.0])]
        b_bar: Vec<f64>,
    },
    /// Average cost vs link distance, per battery size.
    SweepDistance {
        #[arg(long, value_delimiter = ',', default_values_t = vec![40.0, 60.0, 80.0, 100.0, 150.0, 200.0])]
        distance: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 2.0, 3.0])]
        b_bar: Vec<f64>,
    },
    /// Optimal vs greedy vs outage-blind gains over a harvest sweep.
    Compare {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0])]
        mu_bar: Vec<f64>,
    },
    /// Aligned 500-slot traces for the three policies from a full battery.
    Trace,
    /// Run the structural and oracle cross-checks on this configuration.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> ehpolicy::Result<ExitCode> {
    let mut config = match &cli.config {
        Some(path) => {
            let (config, warnings) = SystemConfig::load(path)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            config
        }
        None => SystemConfig::default(),
    };
    if let Some(eps) = cli.epsilon {
        config.solver.epsilon = eps;
    }
    if let Some(seed) = cli.seed {
        config.sim.seed = seed;
    }
    config.validate()?;
    fs::create_dir_all(&cli.out)?;

    match cli.command {
        Command::Solve => {
            let out = experiments::cmd_solve(&config)?;
            write(&cli.out, "policy.csv", &out.policy_csv)?;
            write(&cli.out, "summary.json", &out.summary_json)?;
            println!(
                "J* = {:.6e}  (iterations {}, span {:.2e}, k_R* = {}, e_min/e_max = {}/{})",
                out.summary.gain,
                out.summary.iterations,
                out.summary.final_span,
                out.summary.k_r_star,
                out.summary.e_min,
                out.summary.e_max
            );
            println!(
                "threshold structure: {}",
                if out.threshold.passed { "yes" } else { "violated" }
            );
        }
        Command::SweepMu { mu_bar, b_bar } => {
            let rows = experiments::cmd_sweep_mu(&config, &mu_bar, &b_bar)?;
            write(&cli.out, "sweep_mu.csv", &mu_sweep_csv(&rows))?;
            println!("{} rows -> {}", rows.len(), cli.out.join("sweep_mu.csv").display());
        }
        Command::SweepDistance { distance, b_bar } => {
            let rows = experiments::cmd_sweep_distance(&config, &distance, &b_bar)?;
            write(&cli.out, "sweep_distance.csv", &distance_sweep_csv(&rows))?;
            println!(
                "{} rows -> {}",
                rows.len(),
                cli.out.join("sweep_distance.csv").display()
            );
        }
        Command::Compare { mu_bar } => {
            let rows = experiments::cmd_compare(&config, &mu_bar)?;
            write(&cli.out, "compare.csv", &compare_csv(&rows))?;
            println!("{} rows -> {}", rows.len(), cli.out.join("compare.csv").display());
        }
        Command::Trace => {
            let bundle = experiments::cmd_trace(&config, config.sim.seed)?;
            for run in &bundle.runs {
                let name = format!("trace_{}.csv", run.kind.to_string().to_lowercase());
                write(&cli.out, &name, &trace_csv(&run.trace))?;
            }
            write(&cli.out, "battery_traces.csv", &battery_comparison_csv(&bundle))?;
            for run in &bundle.runs {
                println!(
                    "{}: battery min/mean/max = {}/{:.1}/{}, empty-in-bad fraction = {:.3}",
                    run.kind,
                    run.stats.min,
                    run.stats.mean,
                    run.stats.max,
                    run.stats.empty_in_bad_fraction
                );
            }
            println!(
                "optimal policy kept charge through bad states: {} (seed-dependent observation)",
                bundle.op_never_empty_in_bad
            );
        }
        Command::Verify => {
            let report = experiments::run_verification(&config)?;
            print!("{report}");
            if !report.all_passed() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn write(dir: &Path, name: &str, text: &str) -> ehpolicy::Result<()> {
    fs::write(dir.join(name), text)?;
    Ok(())
}
