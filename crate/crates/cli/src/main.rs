#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use revsob_core::field::{FieldSpec, SphereField};
use revsob_core::specialfn::Constants;
use revsob_core::sphere::zonal;
use revsob_core::stability::{
    bubble_study, explore_min, probe_local, probe_sharpness, probe_strict, quotient, richardson_ratios,
    ExploreOptions, ExploreStart,
};
use revsob_core::verify::{self, Suite, VerifyOptions, DEFAULT_MATRIX};
use revsob_core::{decompose, Error, SpectralParams};
use serde::Serialize;

use config::{io_error, to_csv, to_json, Format, RunConfig};

const EXIT_INVALID: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

#[derive(Parser)]
#[command(name = "revsob", version, about = "Reverse Sobolev stability numerics on S^1 and S^2")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues, sharp constant, exponent and expansion constants.
    Constants(#[command(flatten)] RunConfig),
    /// Run an invariant suite; exits 4 if any check fails.
    Verify {
        #[command(flatten)]
        config: RunConfig,
        #[arg(long, default_value = "all")]
        suite: String,
        /// Run only the (n, s) given by --n/--s instead of the default matrix.
        #[arg(long)]
        single: bool,
        #[arg(long, hide = true)]
        tamper_alpha: Option<f64>,
    },
    /// Stability quotient of one field.
    Quotient(FieldArgs),
    /// Critical points of the decomposition and the modified distance.
    Decompose(FieldArgs),
    /// Local, sharpness and strict-inequality probes.
    Probe {
        #[command(subcommand)]
        kind: Probe,
    },
    /// Two-bubble family study.
    Bubble {
        #[command(flatten)]
        config: RunConfig,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.1,0.5,0.8,0.95")]
        beta_list: Vec<f64>,
    },
    /// Projected descent on the quotient over degrees 2..=L.
    Explore {
        #[command(flatten)]
        config: RunConfig,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        /// Positivity margin for accepted steps.
        #[arg(long, default_value_t = 1e-3)]
        margin: f64,
        /// Size of the initial perturbation along w1 w2 + w2 w3 + w3 w1; 0 starts at the constant.
        #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
        init: f64,
        /// Random initial coefficients of this size instead.
        #[arg(long)]
        random_init: Option<f64>,
    },
}

#[derive(Args)]
struct FieldArgs {
    #[command(flatten)]
    config: RunConfig,
    /// Field description in JSON.
    #[arg(long)]
    field: PathBuf,
}

#[derive(Subcommand)]
enum Probe {
    /// E(1 + eps rho) against its limit as eps -> 0.
    Local {
        #[command(flatten)]
        config: RunConfig,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.04,0.02,0.01")]
        eps_list: Vec<f64>,
        /// Perturbation rho in JSON (harmonic type, degrees >= 2); defaults to Y_2.
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// E(1 + eps Y_ell) across degrees, for s - n/2 in (1, 2).
    Sharpness {
        #[command(flatten)]
        config: RunConfig,
        #[arg(long, value_delimiter = ',', default_value = "2,4,6,10")]
        ell_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.01")]
        eps_list: Vec<f64>,
    },
    /// Cubic expansion along w1 w2 + w2 w3 + w3 w1, for n = 2 and s - n/2 in (0, 1).
    Strict {
        #[command(flatten)]
        config: RunConfig,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.05,-0.05,0.02,-0.02")]
        eps_list: Vec<f64>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParams(_) | Error::InvalidInput(_) | Error::NonPositive { .. } => EXIT_INVALID,
        Error::OnManifold { .. } | Error::Invariant(_) => EXIT_INVARIANT,
        _ => EXIT_NUMERICAL,
    }
}

fn read_field(path: &PathBuf, params: &SpectralParams) -> Result<SphereField, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    FieldSpec::from_json(&text)?.build(params)
}

fn json_only(config: &RunConfig, command: &str) -> Result<(), Error> {
    if config.format == Format::Csv {
        return Err(Error::InvalidInput(format!("{command} produces structured output; use --format json")));
    }
    Ok(())
}

#[derive(Serialize)]
struct NoArgs {}

fn emit_table<R: Serialize, A: Serialize, S: Serialize>(
    config: &RunConfig,
    command: &str,
    args: A,
    rows: &[R],
    summary: S,
) -> Result<(), Error> {
    #[derive(Serialize)]
    struct Table<'a, R, S> {
        rows: &'a [R],
        summary: S,
    }
    let body = match config.format {
        Format::Csv => to_csv(rows)?,
        Format::Json => to_json(command, config, args, Table { rows, summary })?,
    };
    config.emit(command, &body)
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Constants(config) => {
            json_only(&config, "constants")?;
            let params = config.params()?;
            let c = Constants::compute(&params, config.max_degree.unwrap_or(10));
            config.emit("constants", &to_json("constants", &config, NoArgs {}, c)?)?;
            Ok(0)
        }
        Command::Verify { config, suite, single, tamper_alpha } => {
            json_only(&config, "verify")?;
            let suite: Suite = suite.parse()?;
            let pairs: Vec<(usize, f64)> = if single { vec![(config.n, config.s)] } else { DEFAULT_MATRIX.to_vec() };
            let opts = VerifyOptions {
                seed: config.seed,
                solver: revsob_core::decompose::SolverOptions { budget: config.budget.min(8), ..config.solver()? },
                tamper_alpha,
            };
            let mut reports = Vec::new();
            for (n, s) in pairs {
                let params = SpectralParams::new(n, s)?;
                let r = verify::run(&params, suite, &opts);
                for c in &r.checks {
                    eprintln!("{} n={n} s={s} {}/{}: {}", if c.passed { "PASS" } else { "FAIL" }, c.suite, c.name, c.detail);
                }
                reports.push(r);
            }
            let passed = reports.iter().all(|r| r.passed);
            #[derive(Serialize)]
            struct Args {
                suite: Suite,
                single: bool,
                tamper_alpha: Option<f64>,
            }
            #[derive(Serialize)]
            struct Out {
                passed: bool,
                reports: Vec<verify::VerifyReport>,
            }
            let args = Args { suite, single, tamper_alpha };
            config.emit("verify", &to_json("verify", &config, args, Out { passed, reports })?)?;
            Ok(if passed { 0 } else { EXIT_INVARIANT })
        }
        Command::Quotient(FieldArgs { config, field }) => {
            json_only(&config, "quotient")?;
            let engine = config.engine()?;
            let u = read_field(&field, &engine.params)?;
            let r = quotient(&engine, &u, &config.solver()?, Some(config.seed))?;
            config.emit("quotient", &to_json("quotient", &config, FieldName::new(&field), r)?)?;
            Ok(0)
        }
        Command::Decompose(FieldArgs { config, field }) => {
            json_only(&config, "decompose")?;
            let engine = config.engine()?;
            let u = read_field(&field, &engine.params)?;
            let d = decompose::distance(&engine, &u, &config.solver()?)?;
            config.emit("decompose", &to_json("decompose", &config, FieldName::new(&field), d)?)?;
            Ok(0)
        }
        Command::Probe { kind } => probe(kind),
        Command::Bubble { config, beta_list } => {
            let engine = config.engine()?;
            let rows = bubble_study(&engine, &beta_list, &config.solver()?)?;
            #[derive(Serialize)]
            struct Args<'a> {
                beta_list: &'a [f64],
            }
            emit_table(&config, "bubble", Args { beta_list: &beta_list }, &rows, NoArgs {})?;
            Ok(0)
        }
        Command::Explore { config, iterations, margin, init, random_init } => {
            json_only(&config, "explore")?;
            let engine = config.engine()?;
            if !(margin > 0.0) {
                return Err(Error::InvalidInput(format!("--margin {margin} must be positive")));
            }
            let start = match random_init {
                Some(a) => ExploreStart::Random(a),
                None if init == 0.0 => ExploreStart::Zero,
                None => ExploreStart::Strict(init),
            };
            let opts = ExploreOptions {
                degree: config.max_degree.unwrap_or(6),
                iterations,
                seed: config.seed,
                margin,
                start,
                solver: config.solver()?,
                ..Default::default()
            };
            let t = explore_min(&engine, &opts)?;
            config.emit("explore", &to_json("explore", &config, NoArgs {}, t)?)?;
            Ok(0)
        }
    }
}

#[derive(Serialize)]
struct FieldName {
    field: String,
}

impl FieldName {
    fn new(path: &std::path::Path) -> Self {
        Self { field: path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default() }
    }
}

fn probe(kind: Probe) -> Result<u8, Error> {
    match kind {
        Probe::Local { config, eps_list, field } => {
            let engine = config.engine()?;
            let n = engine.n();
            let rho = match &field {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
                    match FieldSpec::from_json(&text)? {
                        spec @ FieldSpec::Harmonic { .. } => spec.build(&engine.params)?,
                        _ => return Err(Error::InvalidInput("the local probe perturbation must be of type harmonic".into())),
                    }
                }
                None => SphereField::new(n, "Y_2", move |p| zonal(n, 2, p)),
            };
            let rows = probe_local(&engine, &rho, &eps_list, &config.solver()?)?;
            #[derive(Serialize)]
            struct Summary {
                halving_ratios: Vec<f64>,
            }
            #[derive(Serialize)]
            struct Args<'a> {
                eps_list: &'a [f64],
                field: Option<FieldName>,
            }
            let args = Args { eps_list: &eps_list, field: field.as_deref().map(FieldName::new) };
            emit_table(&config, "probe_local", args, &rows, Summary { halving_ratios: richardson_ratios(&rows) })?;
            Ok(0)
        }
        Probe::Sharpness { config, ell_list, eps_list } => {
            let engine = config.engine()?;
            let eps = match eps_list.as_slice() {
                [e] => *e,
                _ => return Err(Error::InvalidInput("the sharpness probe takes a single --eps-list value".into())),
            };
            let rows = probe_sharpness(&engine, &ell_list, eps, &config.solver()?)?;
            #[derive(Serialize)]
            struct Summary {
                strictly_decreasing: bool,
                all_above_one: bool,
            }
            let summary = Summary {
                strictly_decreasing: rows.windows(2).all(|w| w[1].quotient < w[0].quotient),
                all_above_one: rows.iter().all(|r| r.quotient > 1.0),
            };
            #[derive(Serialize)]
            struct Args<'a> {
                ell_list: &'a [usize],
                epsilon: f64,
            }
            emit_table(&config, "probe_sharpness", Args { ell_list: &ell_list, epsilon: eps }, &rows, summary)?;
            Ok(0)
        }
        Probe::Strict { config, eps_list } => {
            let engine = config.engine()?;
            let r = probe_strict(&engine, &eps_list, &config.solver()?)?;
            #[derive(Serialize)]
            struct Args<'a> {
                eps_list: &'a [f64],
            }
            let body = match config.format {
                Format::Csv => to_csv(&r.rows)?,
                Format::Json => to_json("probe_strict", &config, Args { eps_list: &eps_list }, &r)?,
            };
            config.emit("probe_strict", &body)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
