use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::SeriesFrame;
use crate::error::{Error, Result};

/// Per-column affine scaling fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    /// Population mean and standard deviation of each column.
    pub fn fit(frame: &SeriesFrame) -> Result<Self> {
        if frame.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mean: Array1<f64> = frame.values.mean_axis(Axis(0)).expect("non-empty");
        let std: Array1<f64> = frame.values.std_axis(Axis(0), 0.0);
        if let Some(c) = std.iter().position(|&s| s <= 0.0 || !s.is_finite()) {
            return Err(Error::ZeroVariance(frame.columns[c].clone()));
        }
        Ok(Scaler {
            mean: mean.to_vec(),
            std: std.to_vec(),
        })
    }

    fn check(&self, frame: &SeriesFrame) -> Result<()> {
        if frame.channels() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: frame.channels(),
            });
        }
        Ok(())
    }

    pub fn transform(&self, frame: &SeriesFrame) -> Result<SeriesFrame> {
        self.check(frame)?;
        let mut v: Array2<f64> = frame.values.clone();
        for (mut col, (m, s)) in v.columns_mut().into_iter().zip(self.mean.iter().zip(&self.std)) {
            col.mapv_inplace(|x| (x - m) / s);
        }
        Ok(frame.with_values(v))
    }

    pub fn inverse(&self, frame: &SeriesFrame) -> Result<SeriesFrame> {
        self.check(frame)?;
        let mut v: Array2<f64> = frame.values.clone();
        for (mut col, (m, s)) in v.columns_mut().into_iter().zip(self.mean.iter().zip(&self.std)) {
            col.mapv_inplace(|x| x * s + m);
        }
        Ok(frame.with_values(v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub train: SeriesFrame,
    pub val: SeriesFrame,
    pub test: SeriesFrame,
    pub scaler: Scaler,
}

/// Scales all three splits with statistics of `train` only.
pub fn standardize(train: &SeriesFrame, val: &SeriesFrame, test: &SeriesFrame) -> Result<Standardized> {
    let scaler = Scaler::fit(train)?;
    Ok(Standardized {
        train: scaler.transform(train)?,
        val: scaler.transform(val)?,
        test: scaler.transform(test)?,
        scaler,
    })
}
