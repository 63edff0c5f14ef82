//! Command-line front end.
//!
//! Every option can also come from a TOML file given with `--config`; keys
//! are the long flag names (`state`, `parties`, `dicke-n`, ...) and flags
//! given on the command line win.

mod commands;
mod config;
mod report;
pub mod tables;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::bell::ExpressionKind;
use crate::error::Error;
use crate::optimizer::{OptimizationConfig, DEFAULT_SEED};
use crate::states::{StateFamily, StateSpec};

pub use commands::{cmd_bound, cmd_certify, cmd_ssr_check, cmd_tables, cmd_violate};
pub use config::FileConfig;
pub use report::{
    format_sig, BoundReport, CertifyReport, SsrCheckReport, TablesReport, ViolateReport,
};
pub use tables::{compute_table2, compute_table3, Table2Row, Table3Row, TABLE2_HEADER, TABLE3_HEADER};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::SectorTooLarge { .. }) => 3,
            CliError::Core(Error::NotApplicable(_)) => 5,
            CliError::Core(_) | CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Csv(_) | CliError::Json(_) => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ssr-bell", version, about = "Bell inequality violations of mode-entangled states under number super-selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Maximize one inequality on one state.
    Violate,
    /// Recompute both result tables and write them as CSV.
    Tables,
    /// Brute-force classical and hybrid bounds of an inequality.
    Bound,
    /// Twirl diagnostics and observable compliance for a state.
    SsrCheck,
    /// Check that every surviving partition leaves some party empty.
    Certify,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Violate => "violate",
            Command::Tables => "tables",
            Command::Bound => "bound",
            Command::SsrCheck => "ssr-check",
            Command::Certify => "certify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

const STATES: [&str; 7] = ["bell", "w", "w2", "w-doubled", "dicke", "dual-rail-bell", "vacuum"];
const INEQUALITIES: [&str; 4] = ["chsh", "mabk", "bancal", "zb"];

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    #[arg(long, global = true, value_parser = clap::builder::PossibleValuesParser::new(STATES))]
    pub state: Option<String>,

    #[arg(long, global = true)]
    pub parties: Option<usize>,

    /// Excitations of a Dicke state [default: ⌊M/2⌋].
    #[arg(long = "dicke-n", global = true)]
    pub dicke_n: Option<usize>,

    /// [default: 2, or 1 for dual-rail-bell and --no-ssr]
    #[arg(long, global = true)]
    pub copies: Option<usize>,

    #[arg(long, global = true, value_parser = clap::builder::PossibleValuesParser::new(INEQUALITIES))]
    pub inequality: Option<String>,

    /// Unrestricted qubit observables on a single copy.
    #[arg(long = "no-ssr", global = true)]
    pub no_ssr: bool,

    #[arg(long, global = true)]
    pub restarts: Option<usize>,

    #[arg(long = "max-iterations", global = true)]
    pub max_iterations: Option<usize>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,

    /// Output file (a directory for `tables`) [default: stdout, or `.`].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// TOML file with the same keys as the flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Fully resolved invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRequest {
    pub command: Command,
    pub state: Option<StateSpec>,
    pub inequality: Option<ExpressionKind>,
    pub parties: usize,
    pub no_ssr: bool,
    pub optimizer: OptimizationConfig,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
}

impl RunRequest {
    pub fn state(&self) -> Result<StateSpec, CliError> {
        self.state
            .ok_or_else(|| CliError::Usage(format!("{} needs --state", self.command.name())))
    }

    pub fn inequality(&self) -> Result<ExpressionKind, CliError> {
        self.inequality
            .ok_or_else(|| CliError::Usage(format!("{} needs --inequality", self.command.name())))
    }
}

/// Merge flags over the optional config file and fill in defaults.
pub fn resolve(cli: &Cli) -> Result<RunRequest, CliError> {
    let file = match &cli.options.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let o = &cli.options;
    let no_ssr = o.no_ssr || file.no_ssr.unwrap_or(false);
    let parties = o.parties.or(file.parties).unwrap_or(2);
    let family = match o.state.as_deref().or(file.state.as_deref()) {
        Some(name) => Some(name.parse::<StateFamily>()?),
        None => None,
    };
    let state = family.map(|family| {
        let copies = o.copies.or(file.copies).unwrap_or(match family {
            StateFamily::DualRailBell => 1,
            _ if no_ssr => 1,
            _ => 2,
        });
        let particles = match family {
            StateFamily::Dicke => o.dicke_n.or(file.dicke_n).unwrap_or(parties / 2),
            StateFamily::Vacuum => 0,
            StateFamily::W2 | StateFamily::DualRailBell => 2,
            StateFamily::Bell | StateFamily::W => 1,
        };
        StateSpec::new(family, parties, particles, copies)
    });
    let inequality = match o.inequality.as_deref().or(file.inequality.as_deref()) {
        Some(name) => Some(name.parse::<ExpressionKind>()?),
        None => None,
    };
    let defaults = OptimizationConfig::default();
    let optimizer = OptimizationConfig {
        restarts: o.restarts.or(file.restarts).unwrap_or(defaults.restarts),
        max_iterations: o.max_iterations.or(file.max_iterations).unwrap_or(defaults.max_iterations),
        tolerance: defaults.tolerance,
        seed: o.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
    };
    optimizer.validate()?;
    Ok(RunRequest {
        command: cli.command,
        state,
        inequality,
        parties: state.map_or(parties, |s| s.parties),
        no_ssr,
        optimizer,
        format: o.format.or(file.format).unwrap_or(match cli.command {
            Command::Tables => OutputFormat::Text,
            _ => OutputFormat::Json,
        }),
        out: o.out.clone().or(file.out),
    })
}

/// Run one resolved request, writing its report.
pub fn execute(request: &RunRequest) -> Result<(), CliError> {
    match request.command {
        Command::Violate => report::emit(request, &cmd_violate(request)?),
        Command::Tables => {
            let summary = cmd_tables(request)?;
            report::emit_to(request, &summary, None)
        }
        Command::Bound => report::emit(request, &cmd_bound(request)?),
        Command::SsrCheck => report::emit(request, &cmd_ssr_check(request)?),
        Command::Certify => report::emit(request, &cmd_certify(request)?),
    }
}

/// Parse `args` (program name first) and run; returns the process exit code.
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match resolve(&cli).and_then(|request| execute(&request)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
