use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use qot_cli::config::{ExperimentConfig, UsageError};
use qot_cli::simulate::{reconcile_bench, simulate, Adversary, Which};
use qot_cli::{checks, figures, table};

/// Quantum oblivious transfer and bit commitment: analytics and simulation.
#[derive(Debug, Parser)]
#[command(name = "qot", version)]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials per experiment.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat TOML file of `key = value` settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set mu=4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Regenerate the parameter table for mu = 2..6.
    Table1,
    /// Write fig1.csv .. fig5.csv.
    Figures,
    /// Run a protocol repeatedly and report rates against predictions.
    Simulate {
        #[arg(long, value_enum)]
        which: Which,
        #[arg(long, value_enum, default_value = "none")]
        adversary: Adversary,
    },
    /// Estimate the bit-error rate left after reconciliation.
    ReconcileBench,
    /// Check splitting-attack resistance of the physical parameters.
    ParamsCheck,
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut overrides = cli.overrides;
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(trials) = cli.trials {
        overrides.push(format!("trials={trials}"));
    }
    if let Some(out) = &cli.out {
        let quoted = toml::Value::String(out.to_string_lossy().into_owned());
        overrides.push(format!("out={quoted}"));
    }
    let config = ExperimentConfig::load(cli.config.as_deref(), &overrides)?;

    match cli.command {
        Command::Table1 => {
            let entries = table::table1(&config)?;
            print!("{}", table::render(&entries));
            write(&config.out, "table1.csv", &table::table_csv(&config, &entries))?;
        }
        Command::Figures => {
            for path in figures::write_figures(&config, &config.out)? {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Simulate { which, adversary } => {
            let out = simulate(&config, which, adversary)?;
            let text = out.report.render();
            print!("{text}");
            let name = |v: &dyn Fn() -> Option<clap::builder::PossibleValue>| {
                v().map(|p| p.get_name().to_string()).unwrap_or_default()
            };
            let stem = format!(
                "simulate-{}-{}",
                name(&|| which.to_possible_value()),
                name(&|| adversary.to_possible_value())
            );
            write(&config.out, &format!("{stem}.txt"), &text)?;
            if let Some(json) = out.transcript {
                write(&config.out, "bc-transcript-0.json", &json)?;
            }
        }
        Command::ReconcileBench => {
            let report = reconcile_bench(&config)?;
            let text = report.render();
            print!("{text}");
            write(&config.out, "reconcile-bench.txt", &text)?;
        }
        Command::ParamsCheck => {
            let checks = checks::params_check(&config)?;
            print!("{}", checks::render(&config, &checks));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
