use ndarray::{Array2, Array3, ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Moving-average trend extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionSpec {
    pub kernel_size: usize,
}

impl Default for DecompositionSpec {
    fn default() -> Self {
        DecompositionSpec { kernel_size: 25 }
    }
}

impl DecompositionSpec {
    pub fn new(kernel_size: usize) -> Result<Self> {
        let spec = DecompositionSpec { kernel_size };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::invalid(
                "kernel_size",
                format!("must be odd and positive, got {}", self.kernel_size),
            ));
        }
        Ok(())
    }

    /// The `w × w` matrix `M` with `trend = M · x` for one channel.
    pub fn trend_operator(&self, w: usize) -> Result<Array2<f64>> {
        self.validate()?;
        let half = (self.kernel_size / 2) as isize;
        let inv = 1.0 / self.kernel_size as f64;
        let mut m = Array2::zeros((w, w));
        for t in 0..w as isize {
            for o in -half..=half {
                let src = (t + o).clamp(0, w as isize - 1);
                m[[t as usize, src as usize]] += inv;
            }
        }
        Ok(m)
    }
}

/// Splits a `w × d` window into trend (centred moving average with edge
/// replication) and seasonal (`x - trend`) parts.
pub fn decompose(x: ArrayView2<f64>, spec: &DecompositionSpec) -> Result<(Array2<f64>, Array2<f64>)> {
    spec.validate()?;
    let w = x.nrows();
    if w == 0 {
        return Err(Error::invalid("window", "empty series"));
    }
    if spec.kernel_size == 1 {
        return Ok((x.to_owned(), Array2::zeros(x.raw_dim())));
    }
    let half = (spec.kernel_size / 2) as isize;
    let k = spec.kernel_size as f64;
    let mut trend = Array2::zeros(x.raw_dim());
    for (c, col) in x.axis_iter(Axis(1)).enumerate() {
        for t in 0..w as isize {
            let mut acc = 0.0;
            for o in -half..=half {
                acc += col[(t + o).clamp(0, w as isize - 1) as usize];
            }
            trend[[t as usize, c]] = acc / k;
        }
    }
    let seasonal = &x - &trend;
    Ok((trend, seasonal))
}

/// [`decompose`] applied to every window of a `B × w × d` batch.
pub fn decompose_batch(x: ArrayView3<f64>, spec: &DecompositionSpec) -> Result<(Array3<f64>, Array3<f64>)> {
    let mut trend = Array3::zeros(x.raw_dim());
    let mut seasonal = Array3::zeros(x.raw_dim());
    for (b, window) in x.axis_iter(Axis(0)).enumerate() {
        let (t, s) = decompose(window, spec)?;
        trend.index_axis_mut(Axis(0), b).assign(&t);
        seasonal.index_axis_mut(Axis(0), b).assign(&s);
    }
    Ok((trend, seasonal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Pads by hand and averages with an explicit loop.
    fn naive_trend(x: &[f64], k: usize) -> Vec<f64> {
        let p = (k - 1) / 2;
        let mut padded = vec![x[0]; p];
        padded.extend_from_slice(x);
        padded.extend(std::iter::repeat_n(x[x.len() - 1], p));
        (0..x.len())
            .map(|t| padded[t..t + k].iter().sum::<f64>() / k as f64)
            .collect()
    }

    #[test]
    fn constant_and_identity_filter() {
        let x = Array2::from_elem((10, 2), 3.5);
        let (t, s) = decompose(x.view(), &DecompositionSpec::new(5).unwrap()).unwrap();
        assert!(t.iter().all(|v| (v - 3.5).abs() < 1e-15));
        assert!(s.iter().all(|v| v.abs() < 1e-15));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Array2::from_shape_simple_fn((7, 3), || rng.random_range(-1.0..1.0));
        let (t, s) = decompose(x.view(), &DecompositionSpec::new(1).unwrap()).unwrap();
        assert_eq!(t, x);
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ramp_kernel_three() {
        let ramp: Vec<f64> = (0..10).map(f64::from).collect();
        let x = Array1::from(ramp.clone()).insert_axis(Axis(1));
        let (t, _) = decompose(x.view(), &DecompositionSpec::new(3).unwrap()).unwrap();
        let oracle = naive_trend(&ramp, 3);
        for i in 0..10 {
            assert!((t[[i, 0]] - oracle[i]).abs() < 1e-14);
        }
        for i in 1..9 {
            assert!((t[[i, 0]] - ramp[i]).abs() < 1e-14);
        }
        // replicated edges: (0 + 0 + 1) / 3 and (8 + 9 + 9) / 3
        assert!((t[[0, 0]] - 1.0 / 3.0).abs() < 1e-15);
        assert!((t[[9, 0]] - 26.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn random_against_naive_and_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for &(w, k) in &[(16, 5), (30, 25), (4, 9), (1, 3)] {
            let x = Array2::from_shape_simple_fn((w, 2), || rng.random_range(-3.0..3.0));
            let spec = DecompositionSpec::new(k).unwrap();
            let (t, s) = decompose(x.view(), &spec).unwrap();
            let m = spec.trend_operator(w).unwrap();
            let via_matrix = m.dot(&x);
            for c in 0..2 {
                let col: Vec<f64> = x.column(c).to_vec();
                let oracle = naive_trend(&col, k);
                for i in 0..w {
                    assert!((t[[i, c]] - oracle[i]).abs() < 1e-12);
                    assert!((via_matrix[[i, c]] - t[[i, c]]).abs() < 1e-12);
                    assert!((t[[i, c]] + s[[i, c]] - x[[i, c]]).abs() <= 1e-15 * x[[i, c]].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(DecompositionSpec::new(4).is_err());
        assert!(DecompositionSpec::new(0).is_err());
        let x = Array2::<f64>::zeros((5, 1));
        assert!(decompose(x.view(), &DecompositionSpec { kernel_size: 2 }).is_err());
    }
}
