use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use revsob_core::decompose::SolverOptions;
use revsob_core::quadform::SpectralEngine;
use revsob_core::{Error, SpectralParams};
use serde::Serialize;

/// Directory for reports when `--out` is not given.
pub const OUT_DIR_ENV: &str = "REVSOB_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunConfig {
    /// Sphere dimension (1 or 2).
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Operator order; s - n/2 must lie in (0, 1) or (1, 2).
    #[arg(long, default_value_t = 1.5)]
    pub s: f64,
    /// Lowest truncation degree tried by the adaptive spectral ladder.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Largest harmonic degree: eigenvalue table size, explorer space, or ladder cap.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub max_degree: Option<usize>,
    /// Random multistart count for the decomposition solver.
    #[arg(long, default_value_t = 16)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Newton residual tolerance relative to the field's spectral scale.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

impl RunConfig {
    pub fn params(&self) -> Result<SpectralParams, Error> {
        if !(self.n == 1 || self.n == 2) {
            return Err(Error::InvalidParams(format!("n = {} (grids exist for n = 1 and n = 2)", self.n)));
        }
        SpectralParams::new(self.n, self.s)
    }

    pub fn engine(&self) -> Result<SpectralEngine, Error> {
        let params = self.params()?;
        let mut engine = match self.grid {
            Some(g) if g < 8 => return Err(Error::InvalidInput(format!("--grid {g} is below 8"))),
            Some(g) => SpectralEngine::with_start_degree(params, g),
            None => SpectralEngine::new(params),
        };
        if let Some(cap) = self.max_degree {
            let ladder: Vec<usize> = engine.ladder().iter().copied().filter(|&l| l <= cap).collect();
            if ladder.is_empty() {
                return Err(Error::InvalidInput(format!("--L {cap} is below the smallest truncation degree")));
            }
            engine = SpectralEngine::with_ladder(params, ladder);
        }
        Ok(engine)
    }

    pub fn solver(&self) -> Result<SolverOptions, Error> {
        if !(self.tol > 0.0 && self.tol < 1e-2) {
            return Err(Error::InvalidInput(format!("--tol {} must lie in (0, 1e-2)", self.tol)));
        }
        Ok(SolverOptions { budget: self.budget, seed: self.seed, tol: self.tol, ..Default::default() })
    }

    fn destination(&self, command: &str) -> Option<PathBuf> {
        let ext = match self.format {
            Format::Json => "json",
            Format::Csv => "csv",
        };
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(|d| Path::new(&d).join(format!("{command}.{ext}"))))
    }

    /// Writes `body` to the configured destination, or stdout.
    pub fn emit(&self, command: &str, body: &str) -> Result<(), Error> {
        match self.destination(command) {
            Some(path) => {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
                }
                fs::write(&path, body).map_err(|e| io_error(&path, e))?;
                eprintln!("wrote {}", path.display());
                Ok(())
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(body.as_bytes()).map_err(|e| io_error(Path::new("<stdout>"), e))
            }
        }
    }
}

pub fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidInput(format!("{}: {e}", path.display()))
}

/// Every JSON report: tool identity, the full configuration, then the payload.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize, E: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub args: E,
    pub result: T,
}

pub fn to_json<T: Serialize, E: Serialize>(command: &str, config: &RunConfig, args: E, result: T) -> Result<String, Error> {
    let env = Envelope { tool: "revsob", version: env!("CARGO_PKG_VERSION"), command, config, args, result };
    serde_json::to_string_pretty(&env)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Error::InvalidInput(format!("serializing report: {e}")))
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(format!("csv: {e}")))
}
