//! Monte Carlo result tables.

use serde::{Deserialize, Serialize};

use crate::regression::Z_95;

/// One `(n, key)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub n: usize,
    pub key: String,
    pub mean_beta: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub rmse: Option<f64>,
    pub failures: usize,
}

impl TableRow {
    /// Mean and 95% Monte Carlo band `mean -+ 1.96 sd / sqrt(R)` of the
    /// successful replicates. Values are sorted before summation so the result
    /// depends only on the multiset of estimates.
    pub fn summarize(n: usize, key: impl Into<String>, mut values: Vec<f64>, failures: usize) -> Self {
        values.sort_by(f64::total_cmp);
        let r = values.len();
        let (mean, half) = if r == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let mean = values.iter().sum::<f64>() / r as f64;
            let half = if r > 1 {
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1) as f64;
                Z_95 * (var / r as f64).sqrt()
            } else {
                0.0
            };
            (mean, half)
        };
        Self { n, key: key.into(), mean_beta: mean, band_lo: mean - half, band_hi: mean + half, rmse: None, failures }
    }

    pub fn band_width(&self) -> f64 {
        self.band_hi - self.band_lo
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub name: String,
    pub rows: Vec<TableRow>,
}

impl ExperimentTable {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: TableRow) {
        self.rows.push(row);
    }

    pub fn get(&self, n: usize, key: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.n == n && r.key == key)
    }

    /// Distinct keys in first-seen order.
    pub fn keys(&self) -> Vec<&str> {
        let mut keys: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !keys.contains(&r.key.as_str()) {
                keys.push(&r.key);
            }
        }
        keys
    }

    /// Rows of one key ordered by `n`.
    pub fn series(&self, key: &str) -> Vec<&TableRow> {
        let mut rows: Vec<&TableRow> = self.rows.iter().filter(|r| r.key == key).collect();
        rows.sort_by_key(|r| r.n);
        rows
    }

    /// Mean estimates of one key ordered by `n`.
    pub fn means(&self, key: &str) -> Vec<f64> {
        self.series(key).iter().map(|r| r.mean_beta).collect()
    }

    pub fn total_failures(&self) -> usize {
        self.rows.iter().map(|r| r.failures).sum()
    }
}
