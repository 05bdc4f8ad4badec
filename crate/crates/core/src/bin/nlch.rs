use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nonlocal_ch::error::{Error, Result};
use nonlocal_ch::harness::{cmd_converge, cmd_dissipate, cmd_hypotheses, cmd_simulate, Options, RunConfig};
use nonlocal_ch::par::with_threads;

/// Nonlocal viscous non-isothermal Cahn-Hilliard: hypothesis audit,
/// simulation, relaxation-limit rate sweep and dissipation study.
#[derive(Parser, Debug)]
#[command(name = "nlch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output.directory`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Continue even if a hypothesis check fails.
    #[arg(long, global = true)]
    override_hypotheses: bool,

    /// Worker threads for sweeps and multi-amplitude runs.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Minimum log-log slope of sup D accepted by `converge`.
    #[arg(long, global = true)]
    slope_threshold: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Check (H1)-(H6) and write hypotheses.json.
    Hypotheses,
    /// Integrate one trajectory and write diagnostics.csv and snapshots.
    Simulate,
    /// Sweep (alpha, epsilon) and fit the rate of the trajectory difference.
    Converge,
    /// Long runs from several amplitudes: decay rate and absorbing-ball entry.
    Dissipate,
}

fn run(cli: &Cli) -> Result<()> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let config = RunConfig::load(path)?;
    let opts = Options {
        out: cli.out.clone(),
        override_hypotheses: cli.override_hypotheses,
        slope_threshold: cli.slope_threshold,
        ..Options::default()
    };
    match cli.command {
        Command::Hypotheses => {
            let report = cmd_hypotheses(&config, &opts)?;
            for c in &report.checks {
                let status = if c.pass { "pass" } else { "FAIL" };
                match c.witness {
                    Some(w) => println!("{} {status}: {} (witness s = {w})", c.hypothesis, c.detail),
                    None => println!("{} {status}: {}", c.hypothesis, c.detail),
                }
            }
            println!("c0 = {}, c_J = {}, c0 > c_J: {}", report.c0, report.c_j, report.h6.pass);
            match report.first_failure() {
                Some(err) => Err(err),
                None => Ok(()),
            }
        }
        Command::Simulate => {
            let s = cmd_simulate(&config, &opts)?;
            println!(
                "steps {} t {} rows {} max|phi| {} mass drift {:e} energy increase {:e} balance residual {:e}",
                s.steps,
                s.t_final,
                s.rows,
                s.max_abs_phi,
                s.mean_phi_drift,
                s.max_energy_increase,
                s.final_balance_residual
            );
            Ok(())
        }
        Command::Converge => {
            let report = cmd_converge(&config, &opts)?;
            for p in &report.pairs {
                println!("alpha {:e} epsilon {:e} sup D {:e}", p.alpha, p.epsilon, p.sup_d);
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "slope {} (threshold {}), r2 {} (threshold {}), norm rate {}",
                report.fit.slope, report.slope_threshold, report.fit.r2, report.r2_threshold, report.norm_rate
            );
            if report.pass {
                Ok(())
            } else {
                Err(Error::Threshold(format!(
                    "slope {} / r2 {} below thresholds {} / {}",
                    report.fit.slope, report.fit.r2, report.slope_threshold, report.r2_threshold
                )))
            }
        }
        Command::Dissipate => {
            let report = cmd_dissipate(&config, &opts)?;
            for r in &report.runs {
                println!(
                    "amplitude {} entry {:?} decay rate {:?}",
                    r.amplitude,
                    r.entry_time,
                    r.decay.map(|d| d.rate)
                );
            }
            println!("radius {} nu3 {:?}", report.radius, report.nu3);
            if report.pass {
                Ok(())
            } else {
                Err(Error::Threshold(format!(
                    "decay rates positive: {}, entry times ordered: {}",
                    report.rates_positive, report.entries_ordered
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match with_threads(cli.threads, || run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
