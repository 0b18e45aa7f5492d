use ndarray::Axis;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SeriesFrame;
use crate::error::Result;

/// Adds zero-mean Gaussian noise column by column so that every column has
/// the requested signal-to-noise ratio. Signal power is the mean square of
/// the column as given (callers standardize first).
pub fn inject_noise_snr(frame: &SeriesFrame, snr_db: f64, seed: u64) -> Result<SeriesFrame> {
    if frame.is_empty() {
        return Err(crate::Error::EmptyDataset);
    }
    if !snr_db.is_finite() {
        return Err(crate::Error::invalid("snr_db", format!("must be finite, got {snr_db}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = frame.values.clone();
    let ratio = 10f64.powf(snr_db / 10.0);
    for mut col in values.axis_iter_mut(Axis(1)) {
        let power = col.iter().map(|v| v * v).sum::<f64>() / col.len() as f64;
        let sigma = (power / ratio).sqrt();
        for v in col.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += sigma * z;
        }
    }
    Ok(frame.with_values(values))
}
