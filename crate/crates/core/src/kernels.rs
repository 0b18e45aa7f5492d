//! Gaussian kernels, Gram matrices and the empirical Hoeffding split.
//!
//! Sample sets are `n × dim` matrices: one sample per row. Distances between
//! multivariate samples are joint Euclidean over the whole row.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    #[default]
    Gaussian,
}

/// Where the factor 2 sits in the Gaussian exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScaleConvention {
    /// `exp(-|u - v|^2 / (2 h^2))`
    #[default]
    Half,
    /// `exp(-|u - v|^2 / h^2)`
    Unit,
}

impl ScaleConvention {
    fn divisor(self) -> f64 {
        match self {
            ScaleConvention::Half => 2.0,
            ScaleConvention::Unit => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default)]
    pub family: KernelFamily,
    pub bandwidth: f64,
    #[serde(default)]
    pub convention: ScaleConvention,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            family: KernelFamily::Gaussian,
            bandwidth: 1.0,
            convention: ScaleConvention::Half,
        }
    }
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64, convention: ScaleConvention) -> Result<Self> {
        let spec = KernelSpec {
            family: KernelFamily::Gaussian,
            bandwidth,
            convention,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::invalid(
                "bandwidth",
                format!("must be positive and finite, got {}", self.bandwidth),
            ));
        }
        Ok(())
    }

    /// Coefficient `g` such that `k(u, v) = exp(-g |u - v|^2)`.
    pub fn inv_scale(&self) -> f64 {
        1.0 / (self.convention.divisor() * self.bandwidth * self.bandwidth)
    }

    /// Kernel value from a squared distance.
    #[inline]
    pub fn from_sq_dist(&self, sq: f64) -> f64 {
        (-self.inv_scale() * sq).exp()
    }

    /// Lower and upper bounds `(c1, c2)` of the kernel's range.
    pub fn range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

#[inline]
pub(crate) fn sq_dist(u: ArrayView1<f64>, v: ArrayView1<f64>) -> f64 {
    u.iter().zip(v.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn kernel_eval(u: &[f64], v: &[f64], spec: &KernelSpec) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::MalformedSamples(format!(
            "kernel arguments have dimensions {} and {}",
            u.len(),
            v.len()
        )));
    }
    spec.validate()?;
    let sq: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(spec.from_sq_dist(sq))
}

/// Stacks a list of sample vectors into an `n × dim` matrix.
pub fn samples_from_rows(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let first = rows
        .first()
        .ok_or_else(|| Error::MalformedSamples("empty sample list".into()))?;
    let dim = first.len();
    let mut out = Array2::zeros((rows.len(), dim));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::MalformedSamples(format!(
                "sample {i} has dimension {}, sample 0 has {dim}",
                row.len()
            )));
        }
        out.row_mut(i).assign(&ArrayView1::from(row.as_slice()));
    }
    Ok(out)
}

/// Scalar samples as an `n × 1` matrix.
pub fn scalar_samples(values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((values.len(), 1), values.to_vec()).expect("n x 1 shape")
}

/// Symmetric `n × n` matrix of kernel evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix(Array2<f64>);

impl GramMatrix {
    /// Wraps a square matrix. Symmetry is the caller's responsibility.
    pub fn from_array(values: Array2<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::ShapeMismatch {
                left: vec![values.nrows()],
                right: vec![values.ncols()],
            });
        }
        Ok(GramMatrix(values))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

pub fn gram(samples: ArrayView2<f64>, spec: &KernelSpec) -> Result<GramMatrix> {
    spec.validate()?;
    let n = samples.nrows();
    if n == 0 {
        return Err(Error::MalformedSamples("empty sample list".into()));
    }
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = 1.0;
        let ri = samples.row(i);
        for j in (i + 1)..n {
            let v = spec.from_sq_dist(sq_dist(ri, samples.row(j)));
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    Ok(GramMatrix(k))
}

/// Double centering `H K H` with `H = I - 11ᵀ/n`.
pub fn center(g: &GramMatrix) -> GramMatrix {
    let k = &g.0;
    let n = k.nrows() as f64;
    let row_means = k.sum_axis(Axis(1)) / n;
    let col_means = k.sum_axis(Axis(0)) / n;
    let grand = row_means.sum() / n;
    let mut out = k.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        *v = *v - row_means[i] - col_means[j] + grand;
    }
    GramMatrix(out)
}

/// Empirical first- and second-order Hoeffding projections of the pairwise
/// kernel U-statistic over one sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct HoeffdingComponents {
    pub f1: Array1<f64>,
    pub f2: Array2<f64>,
    pub grand_mean: f64,
}

/// Splits `k(x_i, x_j)` into `grand_mean + f1[i] + f1[j] + f2[i][j]`.
///
/// The projections use off-diagonal (U-)centering, so `f1` sums to zero and
/// every off-diagonal row of `f2` sums to zero. For `n = 2` the split is
/// forced: `f1 = 0`, `f2 = 0`.
pub fn hoeffding_components(samples: ArrayView2<f64>, spec: &KernelSpec) -> Result<HoeffdingComponents> {
    let n = samples.nrows();
    if n < 2 {
        return Err(Error::InsufficientSamples {
            estimator: "hoeffding decomposition",
            needed: 2,
            got: n,
        });
    }
    let k = gram(samples, spec)?.into_inner();
    // off-diagonal row sums
    let a: Array1<f64> = k.sum_axis(Axis(1)) - 1.0;
    let total = a.sum();
    let nf = n as f64;
    let grand_mean = total / (nf * (nf - 1.0));
    let f1 = if n == 2 {
        Array1::zeros(2)
    } else {
        a.mapv(|ai| (ai - total / nf) / (nf - 2.0))
    };
    let mut f2 = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = k[[i, j]] - f1[i] - f1[j] - grand_mean;
            f2[[i, j]] = v;
            f2[[j, i]] = v;
        }
    }
    if n == 2 {
        f2.fill(0.0);
    }
    Ok(HoeffdingComponents { f1, f2, grand_mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_samples(n: usize, dim: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, dim), |_| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn kernel_identity_and_analytic_value() {
        let spec = KernelSpec::default();
        assert_eq!(kernel_eval(&[0.3, -1.2], &[0.3, -1.2], &spec).unwrap(), 1.0);
        let v = kernel_eval(&[0.0], &[1.0], &spec).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
        assert!((v - 0.60653).abs() < 1e-5);
        let unit = KernelSpec::gaussian(1.0, ScaleConvention::Unit).unwrap();
        let v = kernel_eval(&[0.0], &[1.0], &unit).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn kernel_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = KernelSpec::gaussian(0.7, ScaleConvention::Half).unwrap();
        for _ in 0..50 {
            let u: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert_eq!(kernel_eval(&u, &v, &spec).unwrap(), kernel_eval(&v, &u, &spec).unwrap());
        }
    }

    #[test]
    fn kernel_dimension_mismatch() {
        let err = kernel_eval(&[1.0], &[1.0, 2.0], &KernelSpec::default()).unwrap_err();
        assert!(matches!(err, Error::MalformedSamples(_)));
    }

    #[test]
    fn invalid_bandwidth() {
        assert!(KernelSpec::gaussian(0.0, ScaleConvention::Half).is_err());
        assert!(KernelSpec::gaussian(f64::NAN, ScaleConvention::Half).is_err());
    }

    #[test]
    fn gram_single_and_identical() {
        let spec = KernelSpec::default();
        let g = gram(scalar_samples(&[4.2]).view(), &spec).unwrap();
        assert_eq!(g.values(), &Array2::from_elem((1, 1), 1.0));
        let g = gram(scalar_samples(&[1.5; 6]).view(), &spec).unwrap();
        assert!(g.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn gram_matches_scalar_loop() {
        let spec = KernelSpec::gaussian(0.8, ScaleConvention::Half).unwrap();
        let x = random_samples(4, 3, 11);
        let g = gram(x.view(), &spec).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mut sq = 0.0;
                for c in 0..3 {
                    sq += (x[[i, c]] - x[[j, c]]).powi(2);
                }
                let expect = (-sq / (2.0 * 0.8 * 0.8)).exp();
                assert!((g.values()[[i, j]] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gram_errors() {
        let spec = KernelSpec::default();
        assert!(gram(Array2::<f64>::zeros((0, 2)).view(), &spec).is_err());
        let err = samples_from_rows(&[vec![1.0, 2.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::MalformedSamples(_)));
        assert!(samples_from_rows(&[]).is_err());
    }

    #[test]
    fn gram_invariants() {
        let spec = KernelSpec::default();
        let g = gram(random_samples(12, 2, 5).view(), &spec).unwrap();
        let k = g.values();
        for i in 0..12 {
            assert_eq!(k[[i, i]], 1.0);
            for j in 0..12 {
                assert_eq!(k[[i, j]], k[[j, i]]);
                assert!((0.0..=1.0).contains(&k[[i, j]]));
            }
        }
    }

    #[test]
    fn center_trivial_cases() {
        let ones = GramMatrix::from_array(Array2::from_elem((5, 5), 1.0)).unwrap();
        assert!(center(&ones).values().iter().all(|&v| v == 0.0));
        let one = GramMatrix::from_array(Array2::from_elem((1, 1), 1.0)).unwrap();
        assert_eq!(center(&one).values()[[0, 0]], 0.0);
    }

    #[test]
    fn center_matches_triple_product() {
        let g = gram(random_samples(5, 1, 8).view(), &KernelSpec::default()).unwrap();
        let n = 5;
        let h = Array2::from_shape_fn(
            (n, n),
            |(i, j)| {
                if i == j {
                    1.0 - 1.0 / n as f64
                } else {
                    -1.0 / n as f64
                }
            },
        );
        let explicit = h.dot(g.values()).dot(&h);
        let c = center(&g);
        for (a, b) in c.values().iter().zip(explicit.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        // zero margins, idempotent
        let max = g.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for s in c.values().sum_axis(Axis(0)).iter() {
            assert!(s.abs() <= 1e-10 * n as f64 * max);
        }
        let cc = center(&c);
        for (a, b) in cc.values().iter().zip(c.values().iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn hoeffding_identical_samples() {
        let h = hoeffding_components(scalar_samples(&[0.4; 7]).view(), &KernelSpec::default()).unwrap();
        assert_eq!(h.grand_mean, 1.0);
        assert!(h.f1.iter().all(|&v| v == 0.0));
        assert!(h.f2.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hoeffding_three_scalars_by_hand() {
        let x = [0.3, -0.9, 1.4];
        let spec = KernelSpec::default();
        let k = |a: f64, b: f64| (-(a - b) * (a - b) / 2.0).exp();
        let (k01, k02, k12) = (k(x[0], x[1]), k(x[0], x[2]), k(x[1], x[2]));
        // n = 3: grand mean over the six ordered pairs, f1 divides by n - 2 = 1
        let total = 2.0 * (k01 + k02 + k12);
        let gm = total / 6.0;
        let f1 = [
            k01 + k02 - total / 3.0,
            k01 + k12 - total / 3.0,
            k02 + k12 - total / 3.0,
        ];
        let h = hoeffding_components(scalar_samples(&x).view(), &spec).unwrap();
        assert!((h.grand_mean - gm).abs() < 1e-12);
        for i in 0..3 {
            assert!((h.f1[i] - f1[i]).abs() < 1e-12);
        }
        assert!((h.f2[[0, 1]] - (k01 - f1[0] - f1[1] - gm)).abs() < 1e-12);
        assert!((h.f2[[0, 2]] - (k02 - f1[0] - f1[2] - gm)).abs() < 1e-12);
        assert!((h.f2[[1, 2]] - (k12 - f1[1] - f1[2] - gm)).abs() < 1e-12);
        assert_eq!(h.f2[[1, 1]], 0.0);
    }

    #[test]
    fn hoeffding_pair_is_degenerate() {
        let h = hoeffding_components(scalar_samples(&[0.0, 1.0]).view(), &KernelSpec::default()).unwrap();
        assert!((h.grand_mean - (-0.5f64).exp()).abs() < 1e-15);
        assert!(h.f1.iter().chain(h.f2.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn hoeffding_properties_random() {
        let spec = KernelSpec::default();
        for seed in 0..20 {
            let n = 3 + seed as usize % 9;
            let x = random_samples(n, 2, seed);
            let k = gram(x.view(), &spec).unwrap().into_inner();
            let h = hoeffding_components(x.view(), &spec).unwrap();
            assert!(h.f1.sum().abs() < 1e-10);
            let max = h.f2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..n {
                assert_eq!(h.f2[[i, i]], 0.0);
                let row: f64 = h.f2.row(i).sum();
                assert!(row.abs() < 1e-12, "n={n} row={row} max={max}");
                for j in 0..n {
                    assert_eq!(h.f2[[i, j]], h.f2[[j, i]]);
                    if i != j {
                        let rebuilt = h.f2[[i, j]] + h.f1[i] + h.f1[j] + h.grand_mean;
                        assert!((rebuilt - k[[i, j]]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn hoeffding_needs_two() {
        assert!(hoeffding_components(scalar_samples(&[1.0]).view(), &KernelSpec::default()).is_err());
    }
}
