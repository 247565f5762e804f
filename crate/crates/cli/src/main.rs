//! `fenlo`: Gaussian MI benchmarks, the discrete oracle report, meta-learning
//! runs and SVG plots. Exit status is 0 on success, 1 for configuration or
//! input errors and 2 for numeric aborts.

mod commands;
mod config;
mod error;
mod plot;
mod table;

use std::fs;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::commands::{meta, mi, oracle};
use crate::config::{with_keys, Key, Settings};
use crate::error::{CliError, Result};

static PLOT_KEYS: [Key; 3] = [
    config::key("input", "", "CSV written by mi or meta (required)"),
    config::key("kind", "trace", "Plot kind: trace, quantile-band or adaptation"),
    config::output("output", "SVG path (required)"),
];

fn cli() -> Command {
    Command::new("fenlo")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Variational mutual-information estimators and MI-regularized meta-learning")
        .subcommand_required(true)
        .subcommand(
            Command::new("mi")
                .about("Estimator benchmarks on correlated Gaussians")
                .subcommand_required(true)
                .subcommand(with_keys(
                    Command::new("gaussian").about("Train one estimator and write its trace"),
                    &mi::GAUSSIAN_KEYS,
                ))
                .subcommand(with_keys(
                    Command::new("sweep").about("Bias and variance over a grid of rho and estimators"),
                    &mi::SWEEP_KEYS,
                )),
        )
        .subcommand(with_keys(
            Command::new("oracle").about("Exact MI and bound values at the optimal critics of discrete joints"),
            &oracle::KEYS,
        ))
        .subcommand(
            Command::new("meta")
                .about("Few-shot sine regression")
                .subcommand_required(true)
                .subcommand(
                    with_keys(Command::new("train").about("Train and save a checkpoint"), &meta::TRAIN_KEYS).arg(
                        Arg::new("assert-lambda0")
                            .long("assert-lambda0")
                            .action(ArgAction::SetTrue)
                            .help("Require lambda = 0 and check the gradient equals the regression gradient"),
                    ),
                )
                .subcommand(with_keys(
                    Command::new("eval").about("Query MSE of a checkpoint on held-out tasks"),
                    &meta::EVAL_KEYS,
                )),
        )
        .subcommand(with_keys(Command::new("plot").about("Render a CSV as SVG"), &PLOT_KEYS))
}

fn threads() -> Result<()> {
    let Ok(v) = std::env::var("FENLO_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("FENLO_THREADS: expected a thread count, got {v:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("FENLO_THREADS: {e}")))?;
    }
    Ok(())
}

fn write(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn plot(s: &Settings) -> Result<()> {
    let input = s.path("input").ok_or_else(|| CliError::key("input", "required"))?;
    let output = s.path("output").ok_or_else(|| CliError::key("output", "required"))?;
    let kind: plot::PlotKind = s.get("kind")?;
    let svg = plot::render(kind, &table::Table::read(input)?)?;
    write(output, svg.as_bytes())
}

fn run(m: &ArgMatches) -> Result<()> {
    threads()?;
    match m.subcommand() {
        Some(("mi", m)) => match m.subcommand() {
            Some(("gaussian", m)) => {
                let s = Settings::resolve(&mi::GAUSSIAN_KEYS, m)?;
                table::emit(s.path("out"), &mi::gaussian(&s)?)
            }
            Some(("sweep", m)) => {
                let s = Settings::resolve(&mi::SWEEP_KEYS, m)?;
                table::emit(s.path("out"), &mi::sweep(&s)?)
            }
            _ => unreachable!("subcommand required"),
        },
        Some(("oracle", m)) => {
            let s = Settings::resolve(&oracle::KEYS, m)?;
            let (report, failure) = oracle::run(&s)?;
            print!("{report}");
            failure.map_or(Ok(()), Err)
        }
        Some(("meta", m)) => match m.subcommand() {
            Some(("train", m)) => {
                let s = Settings::resolve(&meta::TRAIN_KEYS, m)?;
                let (csv, gap) = meta::train(&s, m.get_flag("assert-lambda0"))?;
                if let Some(g) = gap {
                    eprintln!("lambda=0 gradient gap {g:e}");
                }
                table::emit(s.path("out"), &csv)
            }
            Some(("eval", m)) => {
                let s = Settings::resolve(&meta::EVAL_KEYS, m)?;
                let out = meta::eval(&s)?;
                if let (Some(path), Some(bytes)) = (s.path("adaptation"), &out.adaptation) {
                    write(path, bytes)?;
                }
                eprintln!("mean query mse {}", out.mean_mse);
                table::emit(s.path("out"), &out.csv)
            }
            _ => unreachable!("subcommand required"),
        },
        Some(("plot", m)) => plot(&Settings::resolve(&PLOT_KEYS, m)?),
        _ => unreachable!("subcommand required"),
    }
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
