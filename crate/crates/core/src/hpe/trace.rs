//! Per-iteration records and their JSON-lines / CSV export.
//!
//! A JSON-lines trace is one `{"type":"header",...}` line followed by one
//! `{"type":"step",...}` line per iteration.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::HpeParams;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Fixed CSV column order.
pub const CSV_COLUMNS: [&str; 11] = [
    "k",
    "norm_v",
    "eps",
    "lambda",
    "error_ratio",
    "step_norm",
    "s_k",
    "dist_to_solution",
    "Lambda",
    "norm_v_a",
    "eps_a",
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: steps must be preceded by a header")]
    MissingHeader { line: usize },
    #[error("unsupported trace schema version {0}")]
    Schema(u32),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `α_{k−1}` used to form `w_{k−1}`.
    pub alpha: f64,
    pub norm_v: f64,
    pub eps: f64,
    pub lambda: f64,
    pub error_ratio: f64,
    /// `‖z_k − z_{k−1}‖`.
    pub step_norm: f64,
    pub s_k: f64,
    /// `‖z_k − z*‖`.
    pub dist_to_solution: Option<f64>,
    /// `Λ_k`.
    pub lambda_sum: f64,
    pub norm_v_a: f64,
    /// Raw `ε_k^a`.
    pub eps_a: f64,
    /// `‖λv + z̃ − w‖²`.
    pub residual_sq: f64,
    /// `‖z̃ − w‖²`.
    pub gap_sq: f64,
    pub floor_sq: f64,
    /// `‖λv‖²`.
    pub lambda_v_sq: f64,
    /// `‖w_{k−1} − z*‖`.
    pub dist_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub params: HpeParams,
    pub lambda_floor: f64,
    pub tol: f64,
    /// `‖z₀ − z*‖` when a solution is known.
    pub d0: Option<f64>,
    /// Free-form run description (problem, instance, seed).
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(TraceHeader),
    Step(IterationRecord),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    /// `None` only for an empty file.
    pub header: Option<TraceHeader>,
    pub records: Vec<IterationRecord>,
}

impl Trace {
    pub fn new(header: TraceHeader, records: Vec<IterationRecord>) -> Self {
        Self { header: Some(header), records }
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), TraceError> {
        if let Some(h) = &self.header {
            let line = serde_json::to_string(&Line::Header(h.clone()))
                .map_err(|e| TraceError::Parse { line: 1, message: e.to_string() })?;
            writeln!(out, "{line}")?;
        }
        for (i, r) in self.records.iter().enumerate() {
            let line = serde_json::to_string(&Line::Step(r.clone()))
                .map_err(|e| TraceError::Parse { line: i + 2, message: e.to_string() })?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, TraceError> {
        let mut trace = Trace::default();
        for (i, line) in input.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line)
                .map_err(|e| TraceError::Parse { line: line_no, message: e.to_string() })?;
            match parsed {
                Line::Header(h) => {
                    if trace.header.is_some() {
                        return Err(TraceError::Parse {
                            line: line_no,
                            message: "duplicate header".into(),
                        });
                    }
                    if h.schema_version != TRACE_SCHEMA_VERSION {
                        return Err(TraceError::Schema(h.schema_version));
                    }
                    trace.header = Some(h);
                }
                Line::Step(r) => {
                    if trace.header.is_none() {
                        return Err(TraceError::MissingHeader { line: line_no });
                    }
                    let expected = trace.records.len() + 1;
                    if r.k != expected {
                        return Err(TraceError::Parse {
                            line: line_no,
                            message: format!("expected k = {expected}, found {}", r.k),
                        });
                    }
                    trace.records.push(r);
                }
            }
        }
        Ok(trace)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TraceError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        for r in &self.records {
            w.write_record([
                r.k.to_string(),
                r.norm_v.to_string(),
                r.eps.to_string(),
                r.lambda.to_string(),
                r.error_ratio.to_string(),
                r.step_norm.to_string(),
                r.s_k.to_string(),
                r.dist_to_solution.map(|d| d.to_string()).unwrap_or_default(),
                r.lambda_sum.to_string(),
                r.norm_v_a.to_string(),
                r.eps_a.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
