//! Flat numeric tables for plotting, written as CSV.
//!
//! Floats are printed in shortest round-trip form, so identical inputs give
//! byte-identical files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::induction::{InducedSystem, TailProfile};
use crate::maps::MarkovLadder;
use crate::montecarlo::gof::GofReport;
use crate::montecarlo::variance::VarianceGrowth;
use crate::renewal::{EnvelopeReport, RenewalSolution, ScalingRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    /// File stem.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| x.to_string()))?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// A set of tables written side by side into one directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CsvBundle {
    pub tables: Vec<Table>,
}

impl CsvBundle {
    pub fn push(&mut self, table: Table) {
        self.tables.push(table);
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        self.tables.iter().map(|t| t.write_csv(dir)).collect()
    }
}

/// `(x, empirical CDF, predicted CDF)`.
pub fn gof_overlay(name: &str, r: &GofReport) -> Table {
    let mut t = Table::new(name, &["x", "empirical", "predicted"]);
    for &(x, e, p) in &r.overlay {
        t.push(vec![x, e, p]);
    }
    t
}

pub fn gof_qq(name: &str, r: &GofReport) -> Table {
    let mut t = Table::new(name, &["level", "empirical", "predicted"]);
    let k = r.qq.len() + 1;
    for (i, &(e, p)) in r.qq.iter().enumerate() {
        t.push(vec![(i + 1) as f64 / k as f64, e, p]);
    }
    t
}

/// Long form `(n, t, D)`.
pub fn envelope(name: &str, r: &EnvelopeReport) -> Table {
    let mut t = Table::new(name, &["n", "t", "d"]);
    for (n, row) in r.d.iter().enumerate() {
        for (&tt, &d) in r.ts.iter().zip(row) {
            t.push(vec![n as f64, tt, d]);
        }
    }
    t
}

pub fn scaling(name: &str, rows: &[ScalingRow]) -> Table {
    let mut t = Table::new(name, &["n", "t", "s", "deviation", "envelope", "value"]);
    for r in rows {
        t.push(vec![r.n as f64, r.t, r.s, r.deviation, r.envelope, r.value]);
    }
    t
}

pub fn renewal(name: &str, sol: &RenewalSolution) -> Table {
    let mut t = Table::new(name, &["n", "norm", "envelope"]);
    for (n, (m, e)) in sol.t_seq.iter().zip(&sol.envelope).enumerate() {
        t.push(vec![n as f64, m.norm(), *e]);
    }
    t
}

pub fn variance(name: &str, g: &VarianceGrowth) -> Table {
    let mut t = Table::new(name, &["n", "variance", "stderr", "per_n", "per_n_log_n"]);
    for r in &g.rows {
        t.push(vec![
            r.n as f64,
            r.variance,
            r.stderr,
            r.per_n,
            r.per_n_log_n,
        ]);
    }
    t
}

/// Survival function of `f_Y`, with the censored count in every row.
pub fn tail(name: &str, p: &TailProfile) -> Table {
    let mut t = Table::new(name, &["x", "survival", "censored"]);
    for &(x, s) in &p.survival {
        t.push(vec![x, s, p.censored as f64]);
    }
    t
}

/// Return-time law with the ladder prediction for its tail.
pub fn return_pmf(name: &str, sys: &InducedSystem, k_limit: usize) -> Table {
    let mut t = Table::new(name, &["k", "lo", "hi", "pmf", "tail", "predicted_tail"]);
    let mut tail = sys.tail(0);
    for b in sys.branches.iter().take(k_limit) {
        tail -= b.mass;
        t.push(vec![
            b.k as f64,
            b.lo,
            b.hi,
            b.mass,
            tail,
            sys.predicted_tail(b.k),
        ]);
    }
    t
}

pub fn ladder(name: &str, l: &MarkovLadder) -> Table {
    let mut t = Table::new(name, &["k", "x", "gap", "scaled"]);
    for k in 1..l.depth() {
        t.push(vec![k as f64, l.points[k], l.gaps[k], l.scaled(k)]);
    }
    t
}
