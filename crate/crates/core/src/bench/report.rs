//! Result tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::algorithms::AlgorithmSpec;
use crate::error::{Error, Result};

use super::ResidualReport;

/// One table row. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub method: String,
    /// 1 for spectral runs.
    pub spectral: u8,
    pub lambda: f64,
    pub alpha0: f64,
    #[serde(rename = "J")]
    pub j: Option<usize>,
    pub theta2: Option<f64>,
    pub cpu_sec: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "Linf")]
    pub linf: f64,
    pub iter: usize,
    /// 1 when converged.
    pub conv: u8,
}

impl Row {
    pub fn new(spec: &AlgorithmSpec, j: Option<usize>, theta2: Option<f64>, report: &ResidualReport) -> Self {
        Self {
            method: spec.label(),
            spectral: spec.spectral as u8,
            lambda: spec.cfg.lambda,
            alpha0: spec.cfg.alpha0,
            j,
            theta2,
            cpu_sec: report.cpu_sec,
            l1: report.l1,
            linf: report.linf,
            iter: report.n_iter,
            conv: report.converged as u8,
        }
    }

    /// Equality that treats NaN sentinels as equal.
    pub fn same_as(&self, other: &Row) -> bool {
        let eq = |a: f64, b: f64| a == b || (a.is_nan() && b.is_nan());
        self.method == other.method
            && self.spectral == other.spectral
            && eq(self.lambda, other.lambda)
            && eq(self.alpha0, other.alpha0)
            && self.j == other.j
            && match (self.theta2, other.theta2) {
                (Some(a), Some(b)) => eq(a, b),
                (a, b) => a == b,
            }
            && eq(self.cpu_sec, other.cpu_sec)
            && eq(self.l1, other.l1)
            && eq(self.linf, other.linf)
            && self.iter == other.iter
            && self.conv == other.conv
    }
}

pub fn to_csv(rows: &[Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(["method", "spectral", "lambda", "alpha0", "J", "theta2", "cpu_sec", "L1", "Linf", "iter", "conv"])
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

pub fn parse_csv(text: &str) -> Result<Vec<Row>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<Row>, _>>()
        .map_err(|e| Error::Io(e.to_string()))
}

fn fmt_opt<T: std::fmt::Display>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_else(|| "-".into())
}

fn fmt_acc(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.3}")
    }
}

pub fn to_markdown(rows: &[Row]) -> String {
    let mut s = String::from("| Method | λ | α₀ | J | θ₂ | CPU | L1 | L∞ | Iter. | Conv. |\n");
    s.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {:e} | {:e} | {} | {} | {:.3} | {} | {} | {} | {} |",
            r.method,
            r.lambda,
            r.alpha0,
            fmt_opt(r.j),
            fmt_opt(r.theta2),
            r.cpu_sec,
            fmt_acc(r.l1),
            fmt_acc(r.linf),
            r.iter,
            r.conv
        );
    }
    s
}
