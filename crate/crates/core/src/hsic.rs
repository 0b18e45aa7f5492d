//! HSIC estimators between two paired sample sets.
//!
//! * [`hsic_plugin`]: biased V-statistic `tr(K̃ L̃) / (n-1)^2`, always `>= 0`.
//! * [`hsic_ustat`]: the unbiased U-statistic, evaluated in `O(n^2)`.
//! * [`hsic_oracle`]: literal enumeration of the U-statistic over distinct
//!   index tuples, for cross-checking small instances.
//! * [`hsic_gradient`] / [`plugin_value_and_gradient`]: derivative of the
//!   plug-in estimator with respect to the first sample set.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{center, gram, sq_dist, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    #[default]
    Plugin,
    Ustat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct HsicConfig {
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default)]
    pub kernel_r: KernelSpec,
    #[serde(default)]
    pub kernel_s: KernelSpec,
}

impl HsicConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel_r.validate()?;
        self.kernel_s.validate()
    }

    /// Same configuration with the roles of the two kernels exchanged.
    pub fn swapped(&self) -> Self {
        HsicConfig {
            estimator: self.estimator,
            kernel_r: self.kernel_s,
            kernel_s: self.kernel_r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsicEstimate {
    pub value: f64,
    pub n: usize,
    pub estimator: Estimator,
}

fn check_pair(r: &ArrayView2<f64>, s: &ArrayView2<f64>, needed: usize, name: &'static str) -> Result<usize> {
    if r.nrows() != s.nrows() {
        return Err(Error::ShapeMismatch {
            left: r.shape().to_vec(),
            right: s.shape().to_vec(),
        });
    }
    let n = r.nrows();
    if n < needed {
        return Err(Error::InsufficientSamples {
            estimator: name,
            needed,
            got: n,
        });
    }
    Ok(n)
}

/// Dispatches on `cfg.estimator`.
pub fn hsic(r: ArrayView2<f64>, s: ArrayView2<f64>, cfg: &HsicConfig) -> Result<HsicEstimate> {
    match cfg.estimator {
        Estimator::Plugin => hsic_plugin(r, s, cfg),
        Estimator::Ustat => hsic_ustat(r, s, cfg),
    }
}

fn all_rows_equal(x: &ArrayView2<f64>) -> bool {
    let first = x.row(0);
    x.rows().into_iter().all(|row| row == first)
}

pub fn hsic_plugin(r: ArrayView2<f64>, s: ArrayView2<f64>, cfg: &HsicConfig) -> Result<HsicEstimate> {
    cfg.validate()?;
    let n = check_pair(&r, &s, 2, "plug-in HSIC")?;
    if all_rows_equal(&r) {
        // the centred Gram of a constant sample is exactly zero
        return Ok(HsicEstimate {
            value: 0.0,
            n,
            estimator: Estimator::Plugin,
        });
    }
    let k = gram(r, &cfg.kernel_r)?;
    let l_centered = center(&gram(s, &cfg.kernel_s)?);
    // tr(HKH HLH) = tr(K HLH) since H is idempotent
    let trace: f64 = k
        .values()
        .iter()
        .zip(l_centered.values().iter())
        .map(|(a, b)| a * b)
        .sum();
    let nf = (n - 1) as f64;
    Ok(HsicEstimate {
        value: (trace / (nf * nf)).max(0.0),
        n,
        estimator: Estimator::Plugin,
    })
}

pub fn hsic_ustat(r: ArrayView2<f64>, s: ArrayView2<f64>, cfg: &HsicConfig) -> Result<HsicEstimate> {
    cfg.validate()?;
    let n = check_pair(&r, &s, 4, "U-statistic HSIC")?;
    let mut k = gram(r, &cfg.kernel_r)?.into_inner();
    let mut l = gram(s, &cfg.kernel_s)?.into_inner();
    k.diag_mut().fill(0.0);
    l.diag_mut().fill(0.0);
    let k_rows = k.sum_axis(Axis(1));
    let l_rows = l.sum_axis(Axis(1));
    let trace: f64 = k.iter().zip(l.iter()).map(|(a, b)| a * b).sum();
    let cross = k_rows.dot(&l_rows);
    let (sk, sl) = (k_rows.sum(), l_rows.sum());
    let nf = n as f64;
    let value = (trace + sk * sl / ((nf - 1.0) * (nf - 2.0)) - 2.0 * cross / (nf - 2.0)) / (nf * (nf - 3.0));
    Ok(HsicEstimate {
        value,
        n,
        estimator: Estimator::Ustat,
    })
}

/// Averages of the three U-statistic sums, each taken over ordered tuples of
/// pairwise distinct indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleTerms {
    /// mean of `k_ij l_ij`
    pub pair_mean: f64,
    /// mean of `k_ij l_qr`
    pub quad_mean: f64,
    /// mean of `k_ij l_iq`
    pub triple_mean: f64,
    pub pairs: usize,
    pub triples: usize,
    pub quads: usize,
}

impl OracleTerms {
    pub fn value(&self) -> f64 {
        self.pair_mean + self.quad_mean - 2.0 * self.triple_mean
    }
}

pub fn hsic_oracle_terms(r: ArrayView2<f64>, s: ArrayView2<f64>, cfg: &HsicConfig) -> Result<OracleTerms> {
    cfg.validate()?;
    let n = check_pair(&r, &s, 4, "HSIC oracle")?;
    if n > 10 {
        return Err(Error::invalid(
            "n",
            format!("oracle enumerates at most 10 samples, got {n}"),
        ));
    }
    let k = |i: usize, j: usize| cfg.kernel_r.from_sq_dist(sq_dist(r.row(i), r.row(j)));
    let l = |i: usize, j: usize| cfg.kernel_s.from_sq_dist(sq_dist(s.row(i), s.row(j)));

    let (mut pair_sum, mut pairs) = (0.0, 0usize);
    let (mut triple_sum, mut triples) = (0.0, 0usize);
    let (mut quad_sum, mut quads) = (0.0, 0usize);
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            pair_sum += k(i, j) * l(i, j);
            pairs += 1;
            for q in (0..n).filter(|&q| q != i && q != j) {
                triple_sum += k(i, j) * l(i, q);
                triples += 1;
                for t in (0..n).filter(|&t| t != i && t != j && t != q) {
                    quad_sum += k(i, j) * l(q, t);
                    quads += 1;
                }
            }
        }
    }
    Ok(OracleTerms {
        pair_mean: pair_sum / pairs as f64,
        quad_mean: quad_sum / quads as f64,
        triple_mean: triple_sum / triples as f64,
        pairs,
        triples,
        quads,
    })
}

/// Brute-force U-statistic HSIC for `4 <= n <= 10`.
pub fn hsic_oracle(r: ArrayView2<f64>, s: ArrayView2<f64>, cfg: &HsicConfig) -> Result<f64> {
    hsic_oracle_terms(r, s, cfg).map(|t| t.value())
}

/// Gradient of [`hsic_plugin`] with respect to every row of `r`.
pub fn hsic_gradient(r: ArrayView2<f64>, s: ArrayView2<f64>, cfg: &HsicConfig) -> Result<Array2<f64>> {
    plugin_value_and_gradient(r, s, cfg).map(|(_, g)| g)
}

/// Plug-in HSIC and its gradient in one pass, without materialising any
/// `n × n` matrix.
///
/// Both kernels are re-evaluated on the fly, which keeps memory linear in
/// `n` for the batch sizes seen in training. Each output is a sequential sum,
/// so results do not depend on scheduling.
pub fn plugin_value_and_gradient(
    r: ArrayView2<f64>,
    s: ArrayView2<f64>,
    cfg: &HsicConfig,
) -> Result<(f64, Array2<f64>)> {
    cfg.validate()?;
    let n = check_pair(&r, &s, 2, "plug-in HSIC")?;
    if all_rows_equal(&r) {
        return Ok((0.0, Array2::zeros(r.raw_dim())));
    }
    let r = r.as_standard_layout();
    let s = s.as_standard_layout();
    let (dr, ds) = (r.ncols(), s.ncols());
    let rs = r.as_slice().expect("standard layout");
    let ss = s.as_slice().expect("standard layout");
    let row = |dim: usize, i: usize| i * dim..(i + 1) * dim;
    let sq = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum() };
    let gr = cfg.kernel_r.inv_scale();
    let gs = cfg.kernel_s.inv_scale();

    // row means of L
    let mut l_rows = Array1::<f64>::zeros(n);
    for i in 0..n {
        let si = &ss[row(ds, i)];
        for j in (i + 1)..n {
            let v = (-gs * sq(si, &ss[row(ds, j)])).exp();
            l_rows[i] += v;
            l_rows[j] += v;
        }
        l_rows[i] += 1.0;
    }
    let nf = n as f64;
    let l_means = l_rows / nf;
    let l_grand = l_means.sum() / nf;

    let scale = 1.0 / ((nf - 1.0) * (nf - 1.0));
    let mut trace = 0.0;
    let mut grad = Array2::<f64>::zeros((n, dr));
    {
        let gslice = grad.as_slice_mut().expect("standard layout");
        for i in 0..n {
            let ri = &rs[row(dr, i)];
            let si = &ss[row(ds, i)];
            // diagonal: k_ii = 1, no gradient contribution
            trace += 1.0 - 2.0 * l_means[i] + l_grand;
            for j in (i + 1)..n {
                let rj = &rs[row(dr, j)];
                let kij = (-gr * sq(ri, rj)).exp();
                let lij = (-gs * sq(si, &ss[row(ds, j)])).exp();
                let lc = lij - l_means[i] - l_means[j] + l_grand;
                trace += 2.0 * kij * lc;
                // d/dr_i of the (i,j) and (j,i) entries: 2 * lc * k_ij * (-2 g)(r_i - r_j)
                let w = -4.0 * gr * scale * lc * kij;
                for c in 0..dr {
                    let d = w * (ri[c] - rj[c]);
                    gslice[i * dr + c] += d;
                    gslice[j * dr + c] -= d;
                }
            }
        }
    }
    Ok(((trace * scale).max(0.0), grad))
}
