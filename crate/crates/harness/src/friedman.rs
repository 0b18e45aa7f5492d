//! Friedman rank test and the Nemenyi critical difference over a
//! settings × methods metric table.

use std::path::Path;

use riloss_core::stats::average_ranks;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Two-tailed Nemenyi `q` at alpha = 0.05 for k = 2..=10 methods.
const NEMENYI_Q05: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];

pub fn nemenyi_q05(k: usize) -> Option<f64> {
    k.checked_sub(2).and_then(|i| NEMENYI_Q05.get(i)).copied()
}

/// `q · sqrt(k (k + 1) / (6 N))`
pub fn critical_difference(k: usize, n: usize, q: f64) -> f64 {
    let (k, n) = (k as f64, n as f64);
    q * (k * (k + 1.0) / (6.0 * n)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub settings: Vec<String>,
    pub methods: Vec<String>,
    /// `values[i][j]`: metric of method `j` on setting `i`.
    pub values: Vec<Vec<f64>>,
}

impl MetricTable {
    /// First column labels the setting; every other column is a method.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let key = Some("friedman.table");
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| HarnessError::new("io", key, format!("{}: {e}", path.display())))?;
        let headers = rdr
            .headers()
            .map_err(|e| HarnessError::new("csv", key, format!("{}: {e}", path.display())))?
            .clone();
        let methods: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut settings = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| HarnessError::new("csv", key, format!("{}: {e}", path.display())))?;
            settings.push(rec.get(0).unwrap_or_default().to_string());
            let row = rec
                .iter()
                .skip(1)
                .zip(&methods)
                .map(|(cell, m)| {
                    cell.parse::<f64>().map_err(|_| {
                        HarnessError::new(
                            "csv",
                            key,
                            format!("line {}, column `{m}`: cannot parse {cell:?}", i + 2),
                        )
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            values.push(row);
        }
        let table = MetricTable {
            settings,
            methods,
            values,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        let degenerate = |msg: String| HarnessError::new("degenerate_table", Some("friedman.table"), msg);
        let k = self.methods.len();
        if k < 2 {
            return Err(degenerate(format!("need at least 2 methods, got {k}")));
        }
        if self.values.len() < 2 {
            return Err(degenerate(format!(
                "need at least 2 settings, got {}",
                self.values.len()
            )));
        }
        for (i, row) in self.values.iter().enumerate() {
            if row.len() != k {
                return Err(degenerate(format!(
                    "setting {i} has {} values, expected {k}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(degenerate(format!("setting {i} holds non-finite value {v}")));
            }
        }
        Ok(())
    }

    /// Per-setting ranks, 1 = best.
    pub fn ranks(&self, lower_is_better: bool) -> Vec<Vec<f64>> {
        self.values
            .iter()
            .map(|row| {
                if lower_is_better {
                    average_ranks(row)
                } else {
                    average_ranks(&row.iter().map(|v| -v).collect::<Vec<_>>())
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanStats {
    pub n: usize,
    pub k: usize,
    pub mean_ranks: Vec<f64>,
    pub tau_chi2: f64,
    /// `None` when every setting ranks the methods identically (the F
    /// denominator vanishes).
    pub tau_f: Option<f64>,
}

/// Statistics from an `N × k` table of within-setting ranks.
pub fn friedman_from_ranks(ranks: &[Vec<f64>]) -> Result<FriedmanStats> {
    let degenerate = |msg: String| HarnessError::new("degenerate_table", Some("friedman.table"), msg);
    let n = ranks.len();
    let k = ranks.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(degenerate(format!("need N >= 2 and k >= 2, got N = {n}, k = {k}")));
    }
    let expected = (k * (k + 1)) as f64 / 2.0;
    for (i, row) in ranks.iter().enumerate() {
        if row.len() != k {
            return Err(degenerate(format!(
                "rank row {i} has {} entries, expected {k}",
                row.len()
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - expected).abs() > 1e-9 || row.iter().any(|r| !(1.0..=k as f64).contains(r)) {
            return Err(degenerate(format!("rank row {i} is not a ranking of {k} methods")));
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    let mean_ranks: Vec<f64> = (0..k)
        .map(|j| ranks.iter().map(|row| row[j]).sum::<f64>() / nf)
        .collect();
    let sum_sq: f64 = mean_ranks.iter().map(|r| r * r).sum();
    let tau_chi2 = 12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0) * (kf + 1.0) / 4.0);
    let denom = nf * (kf - 1.0) - tau_chi2;
    let tau_f = (denom.abs() > 1e-12 * nf * kf).then(|| (nf - 1.0) * tau_chi2 / denom);
    Ok(FriedmanStats {
        n,
        k,
        mean_ranks,
        tau_chi2,
        tau_f,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanReport {
    pub methods: Vec<String>,
    pub lower_is_better: bool,
    #[serde(flatten)]
    pub stats: FriedmanStats,
    pub q_alpha: f64,
    pub critical_difference: f64,
}

pub fn friedman(table: &MetricTable, lower_is_better: bool, q_alpha: Option<f64>) -> Result<FriedmanReport> {
    table.validate()?;
    let stats = friedman_from_ranks(&table.ranks(lower_is_better))?;
    let q = match q_alpha {
        Some(q) => q,
        None => nemenyi_q05(stats.k).ok_or_else(|| {
            HarnessError::config(
                "friedman.q_alpha",
                format!("no built-in q for k = {}; supply one", stats.k),
            )
        })?,
    };
    Ok(FriedmanReport {
        methods: table.methods.clone(),
        lower_is_better,
        critical_difference: critical_difference(stats.k, stats.n, q),
        q_alpha: q,
        stats,
    })
}
