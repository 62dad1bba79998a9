use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "contactkit",
    version,
    about = "Contact Hamiltonian flows, momentum maps and stratification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate the atlas, contact condition, sections and commutation residuals.
    Check(CommonArgs),
    /// Integrate the Hamiltonian flow and write the trajectory.
    Flow(CommonArgs),
    /// Classify sample points into strata.
    Classify(CommonArgs),
    /// Fit winding frequencies of the angles along a trajectory.
    Freq(CommonArgs),
    /// Loop integrals of the contact form along coordinate circles.
    Actions(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check(_) => "check",
            Command::Flow(_) => "flow",
            Command::Classify(_) => "classify",
            Command::Freq(_) => "freq",
            Command::Actions(_) => "actions",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Check(a) | Command::Flow(a) | Command::Classify(a) | Command::Freq(a) | Command::Actions(a) => a,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltIn {
    Canonical,
    Primer,
    Primer2,
    #[value(name = "primer2-reduced", alias = "primer2_reduced")]
    Primer2Reduced,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Built-in model.
    #[arg(long, value_enum, conflicts_with = "config", required_unless_present = "config")]
    pub model: Option<BuiltIn>,
    /// TOML model document.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Half-dimension parameter of the built-in model.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Frequencies ω₀,…,ω_{n−1} (default √1, √2, …).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub omega: Option<Vec<f64>>,
    /// Function of `phi` for the primer models, or the Hamiltonian of `canonical`.
    #[arg(long, allow_hyphen_values = true)]
    pub f: Option<String>,
    /// Index of the section multiplied by `f` in `primer`.
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    #[arg(long = "t-final", default_value_t = 10.0, allow_hyphen_values = true)]
    pub t_final: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub atol: f64,
    /// Tolerance of the load-time checks.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long = "strata-tol", default_value_t = 1e-8)]
    pub strata_tol: f64,
    #[arg(long = "rank-tol", default_value_t = 1e-9)]
    pub rank_tol: f64,
    /// Sample count: check points, classification points, or output times of flow/freq.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Initial point, comma separated chart coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// Chart of the initial point, by id or index.
    #[arg(long)]
    pub chart: Option<String>,
    /// Indices of the periodic coordinates used by freq and actions.
    #[arg(long, value_delimiter = ',')]
    pub angles: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum ModelSource {
    BuiltIn {
        name: BuiltIn,
        n: usize,
        omegas: Vec<f64>,
        f: Option<String>,
        k: usize,
    },
    Config {
        path: String,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub validation: f64,
    pub strata: f64,
    pub rank: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputSpec {
    pub path: Option<String>,
    pub format: Format,
}

/// Fully resolved parameters of one run; embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub version: String,
    pub model: ModelSource,
    pub t_final: f64,
    pub samples: usize,
    pub seed: u64,
    pub chart: Option<String>,
    pub x0: Option<Vec<f64>>,
    pub angles: Option<Vec<usize>>,
    pub tolerances: Tolerances,
    pub output: OutputSpec,
    pub threads: Option<usize>,
}
