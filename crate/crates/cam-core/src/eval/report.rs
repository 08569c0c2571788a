//! Report structures and machine-readable emission (JSON and CSV).
//!
//! The JSON report carries full provenance (config echo, seed, format
//! versions) and round-trips losslessly through serde. Output bytes are a
//! pure function of the report, so equal configurations produce identical
//! files regardless of parallelism.

use crate::cam::MethodId;
use crate::error::{Error, Result};
use crate::metrics::{Curve, MetricRecord};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::EvalConfig;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub report_version: u32,
    pub tensor_format: String,
    pub model_format: String,
    pub seed: u64,
    pub config: EvalConfig,
}

/// One evaluated (image, method) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub image_id: String,
    pub method: MethodId,
    pub class_index: usize,
    pub metrics: MetricRecord,
    pub warnings: Vec<String>,
}

/// Per-method aggregation over all images: arithmetic means, with ADCC both
/// as the mean of per-image scores (headline) and re-derived from the mean
/// (drop, coherency, complexity) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: MethodId,
    pub images: usize,
    pub avg_drop: Option<f64>,
    pub avg_increase: Option<f64>,
    pub insertion_auc: Option<f64>,
    pub deletion_auc: Option<f64>,
    pub coherency: Option<f64>,
    pub complexity: Option<f64>,
    pub adcc: Option<f64>,
    pub adcc_of_mean_triple: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub provenance: Provenance,
    pub notices: Vec<String>,
    pub rows: Vec<EvalRow>,
    pub aggregates: Vec<AggregateRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Insertion,
    Deletion,
}

impl CurveKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveKind::Insertion => "insertion",
            CurveKind::Deletion => "deletion",
        }
    }
}

/// A curve retained for figure emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    pub image_id: String,
    pub method: MethodId,
    pub kind: CurveKind,
    pub curve: Curve,
}

pub const CSV_HEADER: &str =
    "image_id,method,avg_drop,avg_increase,insertion_auc,deletion_auc,coherency,complexity,adcc";

fn csv_cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => String::new(),
    }
}

/// Renders the per-image table as CSV with 6-decimal fixed-point values.
pub fn render_csv(report: &EvalReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        let m = &row.metrics;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.image_id,
            row.method,
            csv_cell(m.avg_drop),
            csv_cell(m.avg_increase),
            csv_cell(m.insertion_auc),
            csv_cell(m.deletion_auc),
            csv_cell(m.coherency),
            csv_cell(m.complexity),
            csv_cell(m.adcc),
        ));
    }
    out
}

/// Renders the report as pretty JSON with a trailing newline.
pub fn render_json(report: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Writes the JSON and/or CSV renderings.
pub fn emit_report(
    report: &EvalReport,
    json_path: Option<&Path>,
    csv_path: Option<&Path>,
) -> Result<()> {
    if let Some(path) = json_path {
        fs::write(path, render_json(report)).map_err(|e| Error::io(path, e))?;
    }
    if let Some(path) = csv_path {
        fs::write(path, render_csv(report)).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
