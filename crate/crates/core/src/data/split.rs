use serde::{Deserialize, Serialize};

use super::SeriesFrame;
use crate::error::{Error, Result};

const HOURS_PER_MONTH: usize = 30 * 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitSpec {
    Ratio {
        train: f64,
        val: f64,
        test: f64,
    },
    /// 12 / 4 / 4 months of hourly rows.
    EttHourly,
    /// 12 / 4 / 4 months of 15-minute rows.
    EttMinute,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Ratio {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

/// Row ranges `[start, end)` of each split in the source frame. `start`
/// includes the lookback overlap; targets begin `lookback` rows later.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitBorders {
    pub lookback: usize,
    pub train: (usize, usize),
    pub val: (usize, usize),
    pub test: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitFrames {
    pub train: SeriesFrame,
    pub val: SeriesFrame,
    pub test: SeriesFrame,
    pub borders: SplitBorders,
}

fn region_ends(t: usize, spec: &SplitSpec) -> Result<[usize; 3]> {
    match *spec {
        SplitSpec::Ratio { train, val, test } => {
            for (name, r) in [("train", train), ("val", val), ("test", test)] {
                if !(r.is_finite() && r > 0.0) {
                    return Err(Error::invalid(
                        "split",
                        format!("{name} ratio must be positive, got {r}"),
                    ));
                }
            }
            if ((train + val + test) - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(
                    "split",
                    format!("ratios sum to {}, not 1", train + val + test),
                ));
            }
            let tf = t as f64;
            let n_train = (tf * train + 1e-9).floor() as usize;
            let n_test = (tf * test + 1e-9).floor() as usize;
            let n_val = t.saturating_sub(n_train + n_test);
            if n_train == 0 || n_val == 0 || n_test == 0 {
                return Err(Error::TooShort(format!("{t} rows leave an empty split")));
            }
            Ok([n_train, n_train + n_val, t])
        }
        SplitSpec::EttHourly | SplitSpec::EttMinute => {
            let per_month = if matches!(spec, SplitSpec::EttHourly) {
                HOURS_PER_MONTH
            } else {
                4 * HOURS_PER_MONTH
            };
            let ends = [12 * per_month, 16 * per_month, 20 * per_month];
            if t < ends[2] {
                return Err(Error::TooShort(format!(
                    "benchmark borders need {} rows, frame has {t}",
                    ends[2]
                )));
            }
            Ok(ends)
        }
    }
}

/// Cuts train / val / test frames. Val and test start `lookback` rows
/// before their target region so their first windows are complete.
pub fn split(frame: &SeriesFrame, spec: &SplitSpec, lookback: usize) -> Result<SplitFrames> {
    let ends = region_ends(frame.len(), spec)?;
    if lookback > ends[0] {
        return Err(Error::TooShort(format!(
            "lookback {lookback} exceeds the training region ({} rows)",
            ends[0]
        )));
    }
    let borders = SplitBorders {
        lookback,
        train: (0, ends[0]),
        val: (ends[0] - lookback, ends[1]),
        test: (ends[1] - lookback, ends[2]),
    };
    Ok(SplitFrames {
        train: frame.slice_rows(borders.train.0, borders.train.1),
        val: frame.slice_rows(borders.val.0, borders.val.1),
        test: frame.slice_rows(borders.test.0, borders.test.1),
        borders,
    })
}
