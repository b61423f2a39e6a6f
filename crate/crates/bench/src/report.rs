//! Sweep records, their CSV form, and the markdown iteration table.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Converged,
    /// Iteration budget exhausted.
    InfIter,
    /// Non-finite values or gradient blow-up.
    InfDiv,
    /// The run could not be set up or panicked.
    Err,
}

/// One (variant, cell, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: String,
    pub cell: String,
    pub seed: u64,
    pub status: Outcome,
    pub iterations: usize,
    pub descent_violations: usize,
    pub skipped: usize,
    pub note: String,
}

impl RunRecord {
    /// Iterations to tolerance, or `None` for every kind of Inf.
    pub fn count(&self) -> Option<usize> {
        (self.status == Outcome::Converged).then_some(self.iterations)
    }
}

pub fn write_records<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for r in rd.deserialize() {
        out.push(r?);
    }
    Ok(out)
}

/// Median with Inf entries (`None`) ordered last; `None` if the median
/// itself falls on an Inf.
pub fn median(counts: &[Option<usize>]) -> Option<f64> {
    if counts.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = counts.iter().map(|c| c.map_or(f64::INFINITY, |x| x as f64)).collect();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    let m = if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    };
    m.is_finite().then_some(m)
}

pub fn render_median(m: Option<f64>) -> String {
    match m {
        None => "Inf".into(),
        Some(x) if x.fract() == 0.0 => format!("{x:.0}"),
        Some(x) => format!("{x:.1}"),
    }
}

/// Rows and columns in first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub variants: Vec<String>,
    pub cells: Vec<String>,
    /// `medians[row][col]`.
    pub medians: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn from_records(records: &[RunRecord]) -> Table {
        let mut variants: Vec<String> = Vec::new();
        let mut cells: Vec<String> = Vec::new();
        for r in records {
            if !variants.contains(&r.variant) {
                variants.push(r.variant.clone());
            }
            if !cells.contains(&r.cell) {
                cells.push(r.cell.clone());
            }
        }
        let medians = variants
            .iter()
            .map(|v| {
                cells
                    .iter()
                    .map(|c| {
                        let counts: Vec<_> = records
                            .iter()
                            .filter(|r| &r.variant == v && &r.cell == c)
                            .map(RunRecord::count)
                            .collect();
                        median(&counts)
                    })
                    .collect()
            })
            .collect();
        Table {
            variants,
            cells,
            medians,
        }
    }

    pub fn get(&self, variant: &str, cell: &str) -> Option<Option<f64>> {
        let i = self.variants.iter().position(|v| v == variant)?;
        let j = self.cells.iter().position(|c| c == cell)?;
        Some(self.medians[i][j])
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Method |");
        for c in &self.cells {
            let _ = write!(s, " {c} |");
        }
        s.push_str("\n|---|");
        for _ in &self.cells {
            s.push_str("---:|");
        }
        s.push('\n');
        for (v, row) in self.variants.iter().zip(&self.medians) {
            let _ = write!(s, "| {v} |");
            for m in row {
                let _ = write!(s, " {} |", render_median(*m));
            }
            s.push('\n');
        }
        s
    }
}
