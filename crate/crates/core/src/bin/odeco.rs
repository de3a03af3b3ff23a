//! Command-line front end. Exit status: 0 when every check passes, 2 when a
//! bound or golden value is violated (or a decomposition is incomplete), 1 for
//! usage and I/O errors.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use odeco::decompose::{decompose_odeco, Deflation, IterationConfig};
use odeco::experiments::{self, ExperimentConfig, RatesConfig};
use odeco::norm::NormConfig;
use odeco::odeco::singular_residual;
use odeco::perturb::{verify_bounds, VerifyConfig};
use odeco::{DenseTensor, OdecoTensor};

#[derive(Parser)]
#[command(
    name = "odeco",
    version,
    about = "Odeco tensor decomposition and perturbation studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Seed for every random draw.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restart count (spectral-norm starts, or starts per tuple for `decompose`).
    #[arg(long)]
    restarts: Option<usize>,
    /// Convergence tolerance for both the norm sweeps and the gradient iteration.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeflationArg {
    Complement,
    Subtract,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a dense tensor file into an odeco file.
    Decompose {
        input: PathBuf,
        /// Number of components to extract.
        #[arg(long)]
        rank: usize,
        #[arg(long, value_enum, default_value_t = DeflationArg::Complement)]
        deflation: DeflationArg,
        #[command(flatten)]
        common: Common,
    },
    /// Angle error against relative perturbation size for correlated odeco pairs.
    Figure1 {
        /// Use the 200-point grid and 1000 norm restarts.
        #[arg(long)]
        full: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Recovery of a diagonal odeco tensor from Gaussian noise.
    Figure2 {
        #[arg(long)]
        full: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Golden values: value-gap example, matricization ratio, min-max value.
    Counterexamples {
        #[command(flatten)]
        common: Common,
    },
    /// Error scaling under the signal-plus-noise model across dimensions.
    SvdRates {
        #[arg(long)]
        full: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Table of c_epsilon and the objective max{1+eps, 1/c_eps}.
    Constants {
        /// Explicit epsilon values (default grid 0.01, 0.02, ..., 6).
        #[arg(long, value_delimiter = ',')]
        epsilon: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check perturbation bounds between two odeco files.
    Perturb {
        reference: PathBuf,
        perturbed: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Violation(String),
    Usage(String),
}

impl From<odeco::Error> for Failure {
    fn from(e: odeco::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display()))),
        // A closed pipe (e.g. `| head`) is not an error worth reporting.
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                Err(Failure::Usage(format!("stdout: {e}")))
            }
            _ => Ok(()),
        },
    }
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn norm_config(common: &Common, default_restarts: usize) -> NormConfig {
    let mut cfg = NormConfig::with_restarts(common.restarts.unwrap_or(default_restarts));
    if let Some(t) = common.tol {
        cfg.tol = t;
    }
    cfg
}

fn apply_overrides(cfg: &mut ExperimentConfig, common: &Common) {
    if let Some(r) = common.restarts {
        cfg.norm.restarts = r;
    }
    if let Some(t) = common.tol {
        cfg.norm.tol = t;
        cfg.iteration.tol = t;
    }
}

fn violation_if(failed: bool, what: &str) -> Outcome {
    if failed {
        Err(Failure::Violation(what.to_string()))
    } else {
        Ok(())
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Decompose {
            input,
            rank,
            deflation,
            common,
        } => {
            let t = DenseTensor::from_text(&read(&input)?)?;
            let mut cfg = IterationConfig {
                deflation: match deflation {
                    DeflationArg::Complement => Deflation::OrthogonalComplement,
                    DeflationArg::Subtract => Deflation::Subtract,
                },
                ..IterationConfig::default()
            };
            if let Some(r) = common.restarts {
                cfg.restarts = r;
            }
            if let Some(tol) = common.tol {
                cfg.tol = tol;
            }
            let dec = decompose_odeco(&t, rank, &cfg, common.seed)?;
            let mut summary = format!(
                "found {} of {} (failed attempts {}, duplicates {})\n",
                dec.found, rank, dec.failed_attempts, dec.duplicates
            );
            for k in 0..dec.found {
                let res = singular_residual(&t, dec.odeco.lambdas()[k], &dec.odeco.component(k))?;
                summary.push_str(&format!(
                    "tuple {}: lambda={} residual={}\n",
                    k + 1,
                    dec.odeco.lambdas()[k],
                    res
                ));
            }
            let fit = t.sub(&dec.odeco.to_dense())?.frobenius_norm();
            summary.push_str(&format!("frobenius residual={fit}\n"));
            eprint!("{summary}");
            emit(common.out.as_deref(), &dec.odeco.to_text())?;
            violation_if(
                dec.is_partial(rank),
                "decomposition did not converge for every tuple",
            )
        }
        Command::Figure1 { full, common } => {
            let mut cfg = ExperimentConfig::figure1(full, common.seed);
            apply_overrides(&mut cfg, &common);
            let rows = experiments::figure1(&cfg)?;
            emit(
                common.out.as_deref(),
                &experiments::figure1_csv(&cfg, &rows),
            )?;
            let bad = rows.iter().filter(|r| !r.pass()).count();
            violation_if(bad > 0, &format!("{bad} rows exceed the angle bound"))
        }
        Command::Figure2 { full, common } => {
            let mut cfg = ExperimentConfig::figure2(full, common.seed);
            apply_overrides(&mut cfg, &common);
            let rows = experiments::figure2(&cfg)?;
            emit(
                common.out.as_deref(),
                &experiments::figure2_csv(&cfg, &rows),
            )
        }
        Command::Counterexamples { common } => {
            let norm = norm_config(&common, experiments::DESK_RESTARTS);
            let report = experiments::counterexamples(&norm, common.seed)?;
            emit(common.out.as_deref(), &report.render())?;
            violation_if(!report.pass(), "a golden value was not reproduced")
        }
        Command::SvdRates { full, common } => {
            let mut cfg = RatesConfig::new(full, common.seed);
            if let Some(r) = common.restarts {
                cfg.norm.restarts = r;
            }
            if let Some(t) = common.tol {
                cfg.norm.tol = t;
                cfg.iteration.tol = t;
            }
            let rows = experiments::svd_rates(&cfg)?;
            emit(
                common.out.as_deref(),
                &experiments::svd_rates_csv(&cfg, &rows),
            )?;
            violation_if(rows.iter().any(|r| !r.pass()), "a rate check failed")
        }
        Command::Constants {
            epsilon,
            order,
            out,
        } => {
            let grid = if epsilon.is_empty() {
                experiments::epsilon_grid(0.01, 6.0)
            } else {
                epsilon
            };
            let table = experiments::constants_table(&grid, order)?;
            emit(out.as_deref(), &table.to_csv())
        }
        Command::Perturb {
            reference,
            perturbed,
            epsilon,
            common,
        } => {
            let a = OdecoTensor::from_text(&read(&reference)?)?;
            let b = OdecoTensor::from_text(&read(&perturbed)?)?;
            let cfg = VerifyConfig {
                norm: norm_config(&common, experiments::DESK_RESTARTS),
                seed: common.seed,
                ..VerifyConfig::default()
            };
            let report = verify_bounds(&a, &b, epsilon, &cfg)?;
            emit(common.out.as_deref(), &report.to_csv())?;
            violation_if(!report.all_pass(), "perturbation bound violated")
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation(msg)) => {
            eprintln!("violation: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
