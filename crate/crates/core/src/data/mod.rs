//! Series ingestion and preparation: CSV loading, benchmark splits,
//! standardization, sliding windows and noise injection.

mod csv_io;
mod noise;
mod scale;
mod split;
mod synthetic;
mod windows;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{load_csv, write_csv};
pub use noise::inject_noise_snr;
pub use scale::{standardize, Scaler, Standardized};
pub use split::{split, SplitBorders, SplitFrames, SplitSpec};
pub use synthetic::{seasonal_series, SyntheticSpec};
pub use windows::{windows, windows_paired, WindowDataset};

/// A multivariate series: `T` rows of `d` named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    pub timestamps: Vec<String>,
    pub values: Array2<f64>,
    pub columns: Vec<String>,
}

impl SeriesFrame {
    pub fn new(timestamps: Vec<String>, values: Array2<f64>, columns: Vec<String>) -> Result<Self> {
        if timestamps.len() != values.nrows() || columns.len() != values.ncols() {
            return Err(Error::ShapeMismatch {
                left: vec![timestamps.len(), columns.len()],
                right: values.shape().to_vec(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "series contains non-finite values"));
        }
        Ok(SeriesFrame {
            timestamps,
            values,
            columns,
        })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn channels(&self) -> usize {
        self.values.ncols()
    }

    /// Rows `start..end` as a new frame.
    pub fn slice_rows(&self, start: usize, end: usize) -> SeriesFrame {
        SeriesFrame {
            timestamps: self.timestamps[start..end].to_vec(),
            values: self.values.slice(s![start..end, ..]).to_owned(),
            columns: self.columns.clone(),
        }
    }

    /// Same timestamps and columns, new values.
    pub fn with_values(&self, values: Array2<f64>) -> SeriesFrame {
        debug_assert_eq!(values.dim(), self.values.dim());
        SeriesFrame {
            timestamps: self.timestamps.clone(),
            values,
            columns: self.columns.clone(),
        }
    }
}

/// Reproducibility record written next to every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub rows: usize,
    pub borders: SplitBorders,
}
