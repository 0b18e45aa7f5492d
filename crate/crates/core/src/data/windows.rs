use ndarray::{s, Array3, Axis};

use super::SeriesFrame;
use crate::error::{Error, Result};

/// Lookback / horizon pairs cut from one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowDataset {
    pub lookback: usize,
    pub horizon: usize,
    pub stride: usize,
    /// `N × w × d`
    pub inputs: Array3<f64>,
    /// `N × H × d`
    pub targets: Array3<f64>,
}

impl WindowDataset {
    pub fn len(&self) -> usize {
        self.inputs.len_of(Axis(0))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> usize {
        self.inputs.len_of(Axis(2))
    }

    /// Row offset in the source frame of window `i`.
    pub fn offset(&self, i: usize) -> usize {
        i * self.stride
    }

    /// Gathers the windows at `indices` into `(x, y)` batch tensors.
    pub fn batch(&self, indices: &[usize]) -> (Array3<f64>, Array3<f64>) {
        (
            self.inputs.select(Axis(0), indices),
            self.targets.select(Axis(0), indices),
        )
    }
}

pub fn windows(frame: &SeriesFrame, lookback: usize, horizon: usize, stride: usize) -> Result<WindowDataset> {
    windows_paired(frame, frame, lookback, horizon, stride)
}

/// Like [`windows`], but inputs are read from `inputs` and targets from
/// `targets` (same shape), e.g. to corrupt inputs only.
pub fn windows_paired(
    inputs: &SeriesFrame,
    targets: &SeriesFrame,
    lookback: usize,
    horizon: usize,
    stride: usize,
) -> Result<WindowDataset> {
    if inputs.values.dim() != targets.values.dim() {
        return Err(Error::ShapeMismatch {
            left: inputs.values.shape().to_vec(),
            right: targets.values.shape().to_vec(),
        });
    }
    if lookback == 0 || horizon == 0 || stride == 0 {
        return Err(Error::invalid(
            "window",
            "lookback, horizon and stride must be positive",
        ));
    }
    let t = inputs.len();
    if t < lookback + horizon {
        return Err(Error::TooShort(format!(
            "{t} rows cannot hold lookback {lookback} + horizon {horizon}"
        )));
    }
    let count = (t - lookback - horizon) / stride + 1;
    let d = inputs.channels();
    let mut x = Array3::zeros((count, lookback, d));
    let mut y = Array3::zeros((count, horizon, d));
    for i in 0..count {
        let o = i * stride;
        x.index_axis_mut(Axis(0), i)
            .assign(&inputs.values.slice(s![o..o + lookback, ..]));
        y.index_axis_mut(Axis(0), i)
            .assign(&targets.values.slice(s![o + lookback..o + lookback + horizon, ..]));
    }
    Ok(WindowDataset {
        lookback,
        horizon,
        stride,
        inputs: x,
        targets: y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split, SplitSpec};
    use ndarray::Array2;
    use proptest::prelude::*;

    fn ramp(t: usize, d: usize) -> SeriesFrame {
        SeriesFrame::new(
            (0..t).map(|i| i.to_string()).collect(),
            Array2::from_shape_fn((t, d), |(i, c)| (i * 10 + c) as f64),
            (0..d).map(|c| format!("c{c}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn counts() {
        assert_eq!(windows(&ramp(10, 1), 4, 2, 1).unwrap().len(), 5);
        assert_eq!(windows(&ramp(10, 1), 4, 2, 10).unwrap().len(), 1);
        assert!(windows(&ramp(5, 1), 4, 2, 1).is_err());
    }

    #[test]
    fn matches_direct_slicing() {
        let f = ramp(23, 2);
        let ds = windows(&f, 5, 3, 2).unwrap();
        for i in 0..ds.len() {
            let o = ds.offset(i);
            for k in 0..5 {
                for c in 0..2 {
                    assert_eq!(ds.inputs[[i, k, c]], f.values[[o + k, c]]);
                }
            }
            for k in 0..3 {
                for c in 0..2 {
                    assert_eq!(ds.targets[[i, k, c]], f.values[[o + 5 + k, c]]);
                }
            }
        }
    }

    #[test]
    fn batch_gathers_rows() {
        let ds = windows(&ramp(12, 1), 3, 2, 1).unwrap();
        let (x, y) = ds.batch(&[4, 0]);
        assert_eq!(x[[0, 0, 0]], 40.0);
        assert_eq!(x[[1, 0, 0]], 0.0);
        assert_eq!(y[[0, 1, 0]], 80.0);
    }

    proptest! {
        #[test]
        fn split_then_window_counts_and_no_leakage(
            t in 60usize..300, w in 1usize..12, h in 1usize..6, stride in 1usize..4
        ) {
            let f = ramp(t, 1);
            let parts = split(&f, &SplitSpec::default(), w).unwrap();
            for (frame, region) in [(&parts.test, parts.borders.test), (&parts.val, parts.borders.val)] {
                if frame.len() < w + h { continue; }
                let ds = windows(frame, w, h, stride).unwrap();
                prop_assert_eq!(ds.len(), (frame.len() - w - h) / stride + 1);
                let target_start = region.0 + w;
                for i in 0..ds.len() {
                    for k in 0..h {
                        let row = (ds.targets[[i, k, 0]] / 10.0) as usize;
                        prop_assert!(row >= target_start && row < region.1);
                    }
                }
            }
        }
    }
}
