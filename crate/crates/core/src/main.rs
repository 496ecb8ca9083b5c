use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use l96_closure::experiment::{
    build_regime_closure, load_summaries, render_tables, run_regime, run_suite, RegimeSpec, SuiteConfig,
};
use l96_closure::model::{calibrate, CalibrationPlan};

#[derive(Parser)]
#[command(name = "l96-closure", version, about = "Linear-response closure experiments on the two-scale Lorenz 96 model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Long-run mean and standard deviation of the uncoupled model.
    Calibrate {
        #[arg(long)]
        forcing: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = CalibrationPlan::default().t_total)]
        t_total: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build the closure of one regime and write it as JSON.
    Closure {
        #[arg(long)]
        regime: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one regime end to end.
    Run {
        #[arg(long)]
        regime: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use 10000 time units of statistics instead of the configured value.
        #[arg(long)]
        full: bool,
    },
    /// Run a suite of regimes in parallel.
    Suite {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        full: bool,
    },
    /// Print the error tables from persisted regime summaries.
    Tables {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Write a reference regime (or with --suite, all eight) as JSON.
    Preset {
        #[arg(long, default_value_t = 0.3)]
        lambda: f64,
        #[arg(long, default_value_t = 6.0)]
        fx: f64,
        #[arg(long, default_value_t = 8.0)]
        fy: f64,
        #[arg(long)]
        suite: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

const FULL_T_STATS: f64 = 10_000.0;

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Calibrate {
            forcing,
            out,
            t_total,
            seed,
        } => {
            let plan = CalibrationPlan {
                t_total,
                seed,
                ..CalibrationPlan::default()
            };
            let r = calibrate(forcing, &plan)?;
            fs::write(&out, serde_json::to_string_pretty(&r)?).with_context(|| format!("writing {}", out.display()))?;
            println!("F = {forcing}: mean = {:.6}, beta = {:.6}", r.mean, r.beta);
        }
        Command::Closure { regime, out } => {
            let spec = RegimeSpec::load(&regime)?;
            let c = build_regime_closure(&spec)?;
            c.save(&out)?;
            let (r, l) = c.min_symmetric_eigenvalues();
            println!("{}: min eig sym(R*) = {r:.6e}, min eig sym(L R* L^T) = {l:.6e}", spec.id());
        }
        Command::Run { regime, out, full } => {
            let mut spec = RegimeSpec::load(&regime)?;
            if full {
                spec.t_stats = FULL_T_STATS;
            }
            let r = run_regime(&spec, Some(&out))?;
            print!("{}", render_tables(&[&r]));
        }
        Command::Suite {
            config,
            jobs,
            out,
            full,
        } => {
            let mut cfg = SuiteConfig::load(&config)?;
            if full {
                cfg.regimes.iter_mut().for_each(|s| s.t_stats = FULL_T_STATS);
            }
            let summary = run_suite(&cfg.regimes, jobs, Some(&out))?;
            print!("{}", summary.table());
            let failed = summary.failures().count();
            if failed > 0 {
                bail!("{failed} of {} regimes failed", summary.entries.len());
            }
        }
        Command::Tables { input } => {
            let results = load_summaries(&input)?;
            print!("{}", render_tables(&results.iter().collect::<Vec<_>>()));
        }
        Command::Preset {
            lambda,
            fx,
            fy,
            suite,
            out,
        } => {
            if suite {
                SuiteConfig {
                    regimes: RegimeSpec::reference_suite(),
                }
                .save(&out)?;
            } else {
                RegimeSpec::reference(lambda, fx, fy).save(&out)?;
            }
        }
    }
    Ok(())
}
