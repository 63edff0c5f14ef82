//! The two result tables: MABK on two copies of W states, and Bancal plus
//! MABK on two copies of half-filled Dicke states.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::report::format_sig;
use super::CliError;
use crate::bell::{build_bancal, build_mabk};
use crate::error::Result;
use crate::optimizer::{maximize_spec, OptimizationConfig};
use crate::states::StateSpec;

pub const TABLE2_HEADER: [&str; 4] = ["M", "nongenuine", "bound", "percent_above"];
pub const TABLE3_HEADER: [&str; 4] = ["M", "genuine", "nongenuine", "bound"];

pub const TABLE2_PARTIES: [usize; 4] = [2, 3, 4, 5];
pub const TABLE3_PARTIES: [usize; 3] = [3, 4, 5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    #[serde(rename = "M")]
    pub m: usize,
    pub nongenuine: f64,
    pub bound: f64,
    pub percent_above: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table3Row {
    #[serde(rename = "M")]
    pub m: usize,
    pub genuine: f64,
    pub nongenuine: f64,
    pub bound: f64,
}

pub fn compute_table2(config: &OptimizationConfig) -> Result<Vec<Table2Row>> {
    TABLE2_PARTIES
        .iter()
        .map(|&m| {
            let r = maximize_spec(&build_mabk(m)?, &StateSpec::w(m, 2), false, config)?;
            Ok(Table2Row { m, nongenuine: r.best_value, bound: r.bound, percent_above: r.margin_percent })
        })
        .collect()
}

pub fn compute_table3(config: &OptimizationConfig) -> Result<Vec<Table3Row>> {
    TABLE3_PARTIES
        .iter()
        .map(|&m| {
            let spec = StateSpec::half_dicke(m, 2);
            let genuine = maximize_spec(&build_bancal(m)?, &spec, false, config)?;
            let nongenuine = maximize_spec(&build_mabk(m)?, &spec, false, config)?;
            Ok(Table3Row { m, genuine: genuine.best_value, nongenuine: nongenuine.best_value, bound: nongenuine.bound })
        })
        .collect()
}

pub fn write_table2<W: Write>(out: W, rows: &[Table2Row]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE2_HEADER)?;
    for r in rows {
        w.write_record([r.m.to_string(), format_sig(r.nongenuine), format_sig(r.bound), format_sig(r.percent_above)])?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(())
}

pub fn write_table3<W: Write>(out: W, rows: &[Table3Row]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE3_HEADER)?;
    for r in rows {
        w.write_record([r.m.to_string(), format_sig(r.genuine), format_sig(r.nongenuine), format_sig(r.bound)])?;
    }
    w.flush().map_err(|e| CliError::Csv(e.into()))?;
    Ok(())
}

pub fn read_table2<R: Read>(input: R) -> Result<Vec<Table2Row>, CliError> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(CliError::from)).collect()
}

pub fn read_table3<R: Read>(input: R) -> Result<Vec<Table3Row>, CliError> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(CliError::from)).collect()
}
