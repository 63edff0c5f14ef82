use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::tables::{Table2Row, Table3Row};
use super::{CliError, OutputFormat, RunRequest};
use crate::bell::{BoundType, ExpressionKind};
use crate::correlator::PartyAngles;
use crate::ssr::PartitionEntry;

pub const SIGNIFICANT_DIGITS: usize = 6;

/// `%g`-style rendering with six significant digits and no trailing zeros.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIGNIFICANT_DIGITS as i32 {
        format!("{}e{exp}", trim_zeros(mantissa))
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A report printable in every output format.
pub trait Render: Serialize {
    fn csv(&self) -> Result<String, CliError>;
    fn text(&self) -> String;
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_default()
}

pub(crate) fn render<R: Render>(format: OutputFormat, report: &R) -> Result<String, CliError> {
    Ok(match format {
        OutputFormat::Json => serde_json::to_string_pretty(report)? + "\n",
        OutputFormat::Csv => report.csv()?,
        OutputFormat::Text => report.text(),
    })
}

pub(crate) fn emit<R: Render>(request: &RunRequest, report: &R) -> Result<(), CliError> {
    emit_to(request, report, request.out.as_deref())
}

pub(crate) fn emit_to<R: Render>(request: &RunRequest, report: &R, path: Option<&Path>) -> Result<(), CliError> {
    let text = render(request.format, report)?;
    match path {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolateReport {
    pub command: &'static str,
    pub state: String,
    pub state_label: String,
    pub inequality: ExpressionKind,
    #[serde(rename = "M")]
    pub m: usize,
    pub copies: usize,
    pub no_ssr: bool,
    pub best_value: f64,
    pub bound: f64,
    pub violated: bool,
    pub margin_percent: f64,
    pub angles: Vec<PartyAngles>,
    pub seed: u64,
    pub restarts: usize,
    pub restarts_converged: usize,
    pub evaluations: u64,
    pub expression_scale: f64,
    pub runtime_ms: u128,
}

impl Render for ViolateReport {
    fn csv(&self) -> Result<String, CliError> {
        let angles: Vec<String> = PartyAngles::flatten(&self.angles).iter().map(|a| format_sig(*a)).collect();
        csv_string(
            &["command", "state", "inequality", "M", "copies", "best_value", "bound", "violated", "margin_percent", "angles", "seed", "runtime_ms"],
            &[vec![
                self.command.into(),
                self.state.clone(),
                self.inequality.to_string(),
                self.m.to_string(),
                self.copies.to_string(),
                format_sig(self.best_value),
                format_sig(self.bound),
                self.violated.to_string(),
                format_sig(self.margin_percent),
                angles.join(";"),
                self.seed.to_string(),
                self.runtime_ms.to_string(),
            ]],
        )
    }

    fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} on {}", self.inequality, self.state_label);
        let _ = writeln!(
            s,
            "best value {}  bound {}  ({}%{})",
            format_sig(self.best_value),
            format_sig(self.bound),
            format_sig(self.margin_percent),
            if self.violated { ", violated" } else { ", not violated" }
        );
        for (k, a) in self.angles.iter().enumerate() {
            let _ = writeln!(
                s,
                "party {}: alpha ({}, {})  beta ({}, {})",
                k + 1,
                format_sig(a.alpha[0]),
                format_sig(a.alpha[1]),
                format_sig(a.beta[0]),
                format_sig(a.beta[1])
            );
        }
        let _ = writeln!(
            s,
            "{} restarts ({} converged), seed {}, {} ms",
            self.restarts, self.restarts_converged, self.seed, self.runtime_ms
        );
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub command: &'static str,
    pub inequality: ExpressionKind,
    #[serde(rename = "M")]
    pub m: usize,
    pub declared_bound: f64,
    pub bound_type: BoundType,
    pub local_bound: Option<f64>,
    pub hybrid_bound: Option<f64>,
    pub algebraic_max: f64,
    pub terms: Option<usize>,
    pub scale: f64,
}

impl Render for BoundReport {
    fn csv(&self) -> Result<String, CliError> {
        csv_string(
            &["inequality", "M", "declared_bound", "local_bound", "hybrid_bound", "algebraic_max"],
            &[vec![
                self.inequality.to_string(),
                self.m.to_string(),
                format_sig(self.declared_bound),
                opt(self.local_bound),
                opt(self.hybrid_bound),
                format_sig(self.algebraic_max),
            ]],
        )
    }

    fn text(&self) -> String {
        let mut s = format!("{} with M={}: declared bound {}\n", self.inequality, self.m, format_sig(self.declared_bound));
        if let Some(b) = self.local_bound {
            let _ = writeln!(s, "local bound {}", format_sig(b));
        }
        if let Some(b) = self.hybrid_bound {
            let _ = writeln!(s, "hybrid bound {}", format_sig(b));
        }
        let _ = writeln!(s, "algebraic maximum {}", format_sig(self.algebraic_max));
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionWeight {
    pub partition: Vec<usize>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SsrCheckReport {
    pub command: &'static str,
    pub state: String,
    pub state_label: String,
    #[serde(rename = "M")]
    pub m: usize,
    pub copies: usize,
    pub particles: usize,
    pub dimension: usize,
    pub partitions: Vec<PartitionWeight>,
    /// Largest entry removed by the twirl.
    pub coherence_removed: f64,
    pub trace_residual: f64,
    pub idempotence_residual: f64,
    pub observables_checked: usize,
    pub max_commutator: f64,
    pub observables_compliant: bool,
    /// Largest `|Tr[ρ O] - Tr[twirl(ρ) O]|` over the sampled products.
    pub max_expectation_gap: f64,
    pub seed: u64,
}

impl Render for SsrCheckReport {
    fn csv(&self) -> Result<String, CliError> {
        let rows: Vec<Vec<String>> = self
            .partitions
            .iter()
            .map(|p| {
                let part: Vec<String> = p.partition.iter().map(|n| n.to_string()).collect();
                vec![part.join(";"), format_sig(p.weight)]
            })
            .collect();
        csv_string(&["partition", "weight"], &rows)
    }

    fn text(&self) -> String {
        let mut s = format!("{} ({} basis states)\n", self.state_label, self.dimension);
        for p in &self.partitions {
            let _ = writeln!(s, "partition {:?}: weight {}", p.partition, format_sig(p.weight));
        }
        let _ = writeln!(s, "coherence removed by twirl {:e}", self.coherence_removed);
        let _ = writeln!(
            s,
            "{} observables, max commutator {:e}, compliant {}",
            self.observables_checked, self.max_commutator, self.observables_compliant
        );
        let _ = writeln!(s, "max expectation change under twirl {:e}", self.max_expectation_gap);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyReport {
    pub command: &'static str,
    pub state: String,
    pub state_label: String,
    #[serde(rename = "M")]
    pub m: usize,
    pub copies: usize,
    pub particles: usize,
    pub holds: bool,
    pub partitions: Vec<PartitionEntry>,
}

impl Render for CertifyReport {
    fn csv(&self) -> Result<String, CliError> {
        let rows: Vec<Vec<String>> = self
            .partitions
            .iter()
            .map(|p| {
                let part: Vec<String> = p.partition.iter().map(|n| n.to_string()).collect();
                vec![part.join(";"), format_sig(p.weight), p.vacuum_party.map(|k| k.to_string()).unwrap_or_default()]
            })
            .collect();
        csv_string(&["partition", "weight", "vacuum_party"], &rows)
    }

    fn text(&self) -> String {
        let mut s = format!("{}: N={} < M={}\n", self.state_label, self.particles, self.m);
        for p in &self.partitions {
            let _ = match p.vacuum_party {
                Some(k) => writeln!(s, "partition {:?}: party {} is empty", p.partition, k + 1),
                None => writeln!(s, "partition {:?}: no empty party", p.partition),
            };
        }
        let _ = writeln!(s, "holds: {}", self.holds);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TablesReport {
    pub command: &'static str,
    pub table2: Vec<Table2Row>,
    pub table3: Vec<Table3Row>,
    pub files: Vec<PathBuf>,
    pub seed: u64,
    pub restarts: usize,
    pub runtime_ms: u128,
}

impl Render for TablesReport {
    fn csv(&self) -> Result<String, CliError> {
        let rows: Vec<Vec<String>> = self.files.iter().map(|f| vec![f.display().to_string()]).collect();
        csv_string(&["file"], &rows)
    }

    fn text(&self) -> String {
        let mut s = String::from("W x W, MABK\n  M  nongenuine  bound  above\n");
        for r in &self.table2 {
            let _ = writeln!(
                s,
                "  {}  {:>10}  {:>5}  {}%",
                r.m,
                format_sig(r.nongenuine),
                format_sig(r.bound),
                format_sig(r.percent_above)
            );
        }
        s.push_str("Dicke x Dicke\n  M  genuine  nongenuine  bound\n");
        for r in &self.table3 {
            let _ = writeln!(
                s,
                "  {}  {:>7}  {:>10}  {:>5}",
                r.m,
                format_sig(r.genuine),
                format_sig(r.nongenuine),
                format_sig(r.bound)
            );
        }
        for f in &self.files {
            let _ = writeln!(s, "wrote {}", f.display());
        }
        let _ = writeln!(s, "seed {}, {} restarts, {} ms", self.seed, self.restarts, self.runtime_ms);
        s
    }
}
