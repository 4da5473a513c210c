//! Front end for `neqt-core`: reads a JSON configuration, runs one
//! computation and writes a CSV table plus a JSON report.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use neqt_core::SystemConfig;

pub mod commands;
pub mod manifest;
pub mod table;

use manifest::{unix_now, RunManifest};
use table::{emit_csv, gnuplot_stub, to_csv, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) | CliError::Io(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<neqt_core::Error> for CliError {
    fn from(e: neqt_core::Error) -> Self {
        use neqt_core::Error as E;
        match e {
            E::SingularMatrix { .. }
            | E::SpectralViolation(_)
            | E::QuadratureFailure { .. }
            | E::UndecayedWindow { .. }
            | E::NotConverged { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "neqt",
    version,
    about = "Steady-state transport through a sample coupled to tight-binding leads"
)]
pub struct Cli {
    /// JSON system configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// CSV output path; stdout if omitted. Writes `<out>.gp` and
    /// `<out>.manifest.json` next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Absolute quadrature tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol: f64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "NEQT_THREADS")]
    pub threads: Option<usize>,
    /// Seed for randomized initial states.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan for bound states and real resonances.
    CheckSpectral(SpectralArgs),
    /// Transmission probabilities on an energy grid.
    Transmission(TransmissionArgs),
    /// Steady charge and energy currents.
    Currents(CurrentsArgs),
    /// Entropy production and its per-lead contributions.
    Entropy,
    /// Finite-difference Onsager matrix at equilibrium.
    Onsager(OnsagerArgs),
    /// Green-Keldysh functions between two sites.
    Greens(GreensArgs),
    /// Hartree-Fock corrected currents.
    HartreeFock,
    /// Finite-lead time evolution.
    Oracle(OracleArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CheckSpectral(_) => "check-spectral",
            Command::Transmission(_) => "transmission",
            Command::Currents(_) => "currents",
            Command::Entropy => "entropy",
            Command::Onsager(_) => "onsager",
            Command::Greens(_) => "greens",
            Command::HartreeFock => "hartree-fock",
            Command::Oracle(_) => "oracle",
        }
    }
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[arg(long, default_value_t = 2048)]
    pub points: usize,
    /// Scan range beyond the outer band edges.
    #[arg(long)]
    pub margin: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TransmissionArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub emin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub emax: Option<f64>,
    #[arg(long, default_value_t = 401)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct CurrentsArgs {
    /// Evaluate from the steady-state correlation matrix instead of the
    /// transmission integrals.
    #[arg(long)]
    pub from_lesser: bool,
}

#[derive(Debug, Args)]
pub struct OnsagerArgs {
    /// Chemical potential step.
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
}

#[derive(Debug, Args)]
pub struct GreensArgs {
    /// Site `s<k>` (sample site k, from 1) or `l<j>:<p>` (lead j, p sites from the contact).
    #[arg(long, default_value = "s1")]
    pub x: String,
    #[arg(long, default_value = "s1")]
    pub y: String,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub tmin: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 20.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Sample the Fourier transforms on [wmin, wmax] instead.
    #[arg(long)]
    pub frequency: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub wmin: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub wmax: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OracleMode {
    Free,
    Interacting,
    Adiabatic,
    MeanField,
    Independence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Sudden,
    Linear,
    Smooth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StateArg {
    Half,
    Empty,
    Full,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum, default_value_t = OracleMode::Free)]
    pub mode: OracleMode,
    /// Sites per truncated lead (default 400; many-body runs default to ten
    /// sites in total).
    #[arg(long = "lead-len")]
    pub lead_len: Option<usize>,
    /// End time (default: 0.9 of the recurrence time after the start).
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub dt: f64,
    #[arg(long, value_enum, default_value_t = ProfileArg::Linear)]
    pub profile: ProfileArg,
    /// Ramp start (negative; default -0.4 of the recurrence time).
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    /// Initial sample filling.
    #[arg(long, value_enum, default_value_t = StateArg::Half)]
    pub state: StateArg,
    /// Fillings compared in independence mode.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [StateArg::Half, StateArg::Empty, StateArg::Full])]
    pub states: Vec<StateArg>,
    /// Extra random sample densities in independence mode (uses --seed).
    #[arg(long, default_value_t = 0)]
    pub random_states: usize,
    /// Repeat the ramp at half the step and report the change.
    #[arg(long)]
    pub check_dt: bool,
}

/// Result of one subcommand: the table, a JSON report, the parameters for
/// the manifest, and a failure to report after the output is written.
pub struct Outcome {
    pub table: Table,
    pub report: serde_json::Value,
    pub parameters: BTreeMap<String, String>,
    pub failure: Option<CliError>,
}

pub fn load_config(path: &Path) -> Result<(Vec<u8>, SystemConfig), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    let text =
        String::from_utf8(bytes.clone()).map_err(|_| CliError::Validation(format!("{}: not UTF-8", path.display())))?;
    let config =
        SystemConfig::from_json(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    config
        .ensure_valid()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok((bytes, config))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config_path = cli
        .config
        .clone()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    if !(cli.tol > 0.0) {
        return Err(CliError::Usage(format!("--tol must be positive (got {})", cli.tol)));
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // fails only if a pool already exists, e.g. in tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (bytes, config) = load_config(&config_path)?;
    let outcome = commands::dispatch(&cli, &config)?;

    let mut parameters = outcome.parameters.clone();
    parameters.insert("tol".into(), format!("{:e}", cli.tol));
    parameters.insert("seed".into(), cli.seed.to_string());
    let mut manifest = RunManifest::new(cli.command.name(), &config_path.to_string_lossy(), &bytes, parameters);
    let report = serde_json::to_string_pretty(&outcome.report).expect("report serializes");

    match &cli.out {
        Some(out) => {
            let sidecar = sibling(out, ".manifest.json");
            emit_csv(&outcome.table, &manifest.comment_lines(Some(&file_name(&sidecar))), out)?;
            let gp = sibling(out, ".gp");
            fs::write(&gp, gnuplot_stub(&outcome.table, &file_name(out)))
                .map_err(|e| CliError::Io(format!("{}: {e}", gp.display())))?;
            manifest.finished_unix = Some(unix_now());
            fs::write(&sidecar, manifest.to_json()).map_err(|e| CliError::Io(format!("{}: {e}", sidecar.display())))?;
            println!("{report}");
        }
        None => {
            let csv = to_csv(&outcome.table, &manifest.comment_lines(None))?;
            std::io::stdout()
                .write_all(&csv)
                .map_err(|e| CliError::Io(format!("stdout: {e}")))?;
            eprintln!("{report}");
        }
    }
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
