use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ensemble_lab::brownian::{exceedance_constants, step_constraint_slack};
use ensemble_lab::harness::{exit_code, fmt_f64, run, summarize, write_band, ExperimentConfig};
use ensemble_lab::Result;

#[derive(Parser)]
#[command(name = "ensemble-lab", version, about = "Linear ensemble sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Band statistics of regret over every trace file matching a glob.
    Summarize {
        pattern: String,
        /// Where to write the band CSV.
        #[arg(long, default_value = "band.csv")]
        out: PathBuf,
    },
    /// Print exceedance constants for a threshold and target frequency.
    Constants {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long = "tau-prime", default_value_t = 100.0)]
        tau_prime: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Step to use instead of the largest admissible one.
        #[arg(long)]
        h: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run(&cfg)?;
            println!("config_hash = {}", report.config_hash);
            println!("output_dir = {}", cfg.output_dir.display());
            for (k, v) in &report.pooled {
                println!("{k} = {}", fmt_f64(*v));
            }
        }
        Command::Summarize { pattern, out } => {
            let s = summarize(&pattern)?;
            write_band(&out, &s.band)?;
            println!("reps = {}", s.reps);
            println!("rounds = {}", s.band.len());
            println!("final_mean = {}", fmt_f64(s.last.mean));
            println!("final_median = {}", fmt_f64(s.last.median));
            println!("final_q05 = {}", fmt_f64(s.last.q05));
            println!("final_q95 = {}", fmt_f64(s.last.q95));
            if let Some(slope) = s.slope {
                println!("loglog_slope = {}", fmt_f64(slope));
            }
        }
        Command::Constants { c, p, tau, tau_prime, delta, h } => {
            let k = exceedance_constants(c, p, tau, tau_prime, delta, h).map_err(as_config)?;
            let (drift, fluct) = step_constraint_slack(k.c, k.eps, k.h);
            for (name, v) in [
                ("p0", k.p0),
                ("eps", k.eps),
                ("h_star", k.h_star),
                ("h", k.h),
                ("drift_slack", drift),
                ("fluctuation_slack", fluct),
            ] {
                println!("{name} = {}", fmt_f64(v));
            }
            println!("k = {}", k.k);
            println!("m_min = {}", k.m_min);
        }
    }
    Ok(())
}

/// Bad command-line parameters are configuration errors.
fn as_config(e: ensemble_lab::Error) -> ensemble_lab::Error {
    match e {
        ensemble_lab::Error::ParameterDomain(message) => ensemble_lab::Error::Config {
            line: 0,
            field: "constants".into(),
            message,
        },
        other => other,
    }
}
