use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SeriesFrame;
use crate::error::{Error, Result};

/// A sum of sinusoids with a slow trend and Gaussian observation noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub length: usize,
    #[serde(default = "default_channels")]
    pub channels: usize,
    #[serde(default = "default_periods")]
    pub periods: Vec<f64>,
    #[serde(default = "default_amplitudes")]
    pub amplitudes: Vec<f64>,
    /// Slope per 1000 rows.
    #[serde(default)]
    pub trend: f64,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_channels() -> usize {
    1
}
fn default_periods() -> Vec<f64> {
    vec![24.0, 168.0]
}
fn default_amplitudes() -> Vec<f64> {
    vec![1.0, 0.5]
}
fn default_noise() -> f64 {
    0.3
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            length: 2000,
            channels: default_channels(),
            periods: default_periods(),
            amplitudes: default_amplitudes(),
            trend: 0.0,
            noise_std: default_noise(),
            seed: 0,
        }
    }
}

/// Generates the series. Each channel gets its own random phases.
pub fn seasonal_series(spec: &SyntheticSpec) -> Result<SeriesFrame> {
    if spec.length == 0 || spec.channels == 0 {
        return Err(Error::invalid("synthetic", "length and channels must be positive"));
    }
    if spec.periods.len() != spec.amplitudes.len() {
        return Err(Error::invalid("synthetic", "periods and amplitudes differ in length"));
    }
    if spec.periods.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::invalid("synthetic", "periods must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tau = 2.0 * std::f64::consts::PI;
    let phases: Vec<Vec<f64>> = (0..spec.channels)
        .map(|_| spec.periods.iter().map(|_| rng.random_range(0.0..tau)).collect())
        .collect();
    let mut values = Array2::zeros((spec.length, spec.channels));
    for t in 0..spec.length {
        for c in 0..spec.channels {
            let mut v = spec.trend * t as f64 / 1000.0;
            for (k, (p, a)) in spec.periods.iter().zip(&spec.amplitudes).enumerate() {
                v += a * (tau * t as f64 / p + phases[c][k]).sin();
            }
            let z: f64 = rng.sample(StandardNormal);
            values[[t, c]] = v + spec.noise_std * z;
        }
    }
    let columns = (0..spec.channels).map(|c| format!("x{c}")).collect();
    SeriesFrame::new((0..spec.length).map(|t| t.to_string()).collect(), values, columns)
}
