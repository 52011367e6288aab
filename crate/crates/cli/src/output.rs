//! Result documents: versioned JSON with a full config echo, plus the CSV
//! table schema for sweeps and tipping scans.

use std::path::Path;

use clborrow_core::study::{SweepRow, TippingReport};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

pub fn tool_info() -> ToolInfo {
    ToolInfo {
        name: "clborrow",
        version: env!("CARGO_PKG_VERSION"),
    }
}

/// Successful-run document: schema version, tool identity, the resolved
/// configuration, and the command-specific result.
#[derive(Debug, Serialize)]
pub struct Document<'a, T: Serialize> {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub result: T,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub exit_code: u8,
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct ErrorDocument {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub error: ErrorBody,
}

pub fn error_document(err: &CliError) -> ErrorDocument {
    ErrorDocument {
        schema_version: SCHEMA_VERSION,
        tool: tool_info(),
        error: ErrorBody {
            exit_code: err.exit_code(),
            kind: err.kind(),
            message: err.to_string(),
        },
    }
}

pub fn render_json<T: Serialize>(doc: &T) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("results are serializable");
    text.push('\n');
    text
}

/// Writes to the path when given, otherwise to stdout.
pub fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| {
            CliError::data(format!("cannot write '{}': {e}", path.display()))
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn push_float(line: &mut String, value: Option<f64>) {
    line.push(',');
    match value {
        Some(v) => line.push_str(&format!("{v}")),
        None => line.push_str("NA"),
    }
}

/// Sweep table: one row per grid point with the fixed column schema
/// `<axis>,w1,w2,w3,w_npp,p_w1,p_w2,p_w3,p_npp,pval_w1,pval_w2,pval_w3,prob_npp`.
pub fn sweep_csv(axis_name: &str, rows: &[SweepRow]) -> String {
    let mut out = format!(
        "{axis_name},w1,w2,w3,w_npp,p_w1,p_w2,p_w3,p_npp,pval_w1,pval_w2,pval_w3,prob_npp\n"
    );
    for row in rows {
        let mut line = format!("{}", row.axis);
        push_float(&mut line, row.w1.map(|c| c.weight));
        push_float(&mut line, row.w2.map(|c| c.weight));
        push_float(&mut line, row.w3.map(|c| c.weight));
        push_float(&mut line, row.npp.map(|c| c.weight));
        push_float(&mut line, row.w1.map(|c| c.estimate));
        push_float(&mut line, row.w2.map(|c| c.estimate));
        push_float(&mut line, row.w3.map(|c| c.estimate));
        push_float(&mut line, row.npp.map(|c| c.estimate));
        push_float(&mut line, row.w1.map(|c| c.p_value));
        push_float(&mut line, row.w2.map(|c| c.p_value));
        push_float(&mut line, row.w3.map(|c| c.p_value));
        push_float(&mut line, row.npp.map(|c| c.prob_le_null));
        line.push('\n');
        out.push_str(&line);
    }
    out
}

/// Tipping table: `weight,p_value,reject`.
pub fn tipping_csv(report: &TippingReport) -> String {
    let mut out = String::from("weight,p_value,reject\n");
    for row in &report.rows {
        let mut line = format!("{}", row.weight);
        push_float(&mut line, row.p_value);
        line.push(',');
        match row.reject {
            Some(true) => line.push_str("reject"),
            Some(false) => line.push_str("accept"),
            None => line.push_str("NA"),
        }
        line.push('\n');
        out.push_str(&line);
    }
    out
}
