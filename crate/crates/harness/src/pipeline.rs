//! load → split → standardise → (noise) → window → train → evaluate.

use std::time::Instant;

use riloss_core::data::{
    inject_noise_snr, load_csv, seasonal_series, split, standardize, windows_paired, DatasetStats, SeriesFrame,
    SplitSpec, WindowDataset,
};
use riloss_core::forecaster::{
    evaluate_metrics, train, DecompositionSpec, EpochRecord, LinearForecaster, TrainOutcome,
};
use riloss_core::loss::LossKind;
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, RunConfig};
use crate::error::{at, HarnessError, Result};

// Offsets that separate the random streams derived from one run seed.
const LOSS_STREAM: u64 = 0x5851_f42d_4c95_7f2d;
const SNR_STREAM: u64 = 0x1405_7b7e_f767_814f;

/// Windowed train / validation / test sets plus provenance.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: WindowDataset,
    pub val: WindowDataset,
    pub test: WindowDataset,
    pub stats: DatasetStats,
    /// Seconds spent loading and preparing; kept out of ms/iter.
    pub prep_seconds: f64,
}

/// Where the data for one run comes from and how it is corrupted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setting {
    pub horizon: usize,
    pub snr_db: Option<f64>,
    pub seed: u64,
}

fn source_frame(cfg: &RunConfig, acknowledged: bool) -> Result<(SeriesFrame, SplitSpec)> {
    let d = &cfg.data;
    match d.source {
        DataSource::Synthetic => Ok((seasonal_series(&d.synthetic).map_err(at("data.synthetic"))?, d.split)),
        DataSource::Csv => {
            if d.benchmark.is_some() && !acknowledged {
                return Err(HarnessError::config(
                    "data.benchmark",
                    "benchmark datasets must be downloaded separately; pass --acknowledge-datasets",
                ));
            }
            let path = d
                .path
                .as_ref()
                .ok_or_else(|| HarnessError::config("data.path", "missing"))?;
            let frame = load_csv(path).map_err(at("data"))?;
            Ok((frame, d.benchmark.map_or(d.split, |b| b.split())))
        }
    }
}

pub fn prepare(cfg: &RunConfig, setting: Setting, acknowledged: bool) -> Result<Prepared> {
    let started = Instant::now();
    let d = &cfg.data;
    let (frame, spec) = source_frame(cfg, acknowledged)?;
    let parts = split(&frame, &spec, d.lookback).map_err(at("data.split"))?;
    let scaled = standardize(&parts.train, &parts.val, &parts.test).map_err(at("data"))?;

    let clean = [&scaled.train, &scaled.val, &scaled.test];
    let inputs: Vec<SeriesFrame> = match setting.snr_db {
        Some(snr) => clean
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let seed = setting.seed.wrapping_add(SNR_STREAM).wrapping_add(i as u64);
                inject_noise_snr(f, snr, seed).map_err(at("data"))
            })
            .collect::<Result<_>>()?,
        None => clean.iter().map(|f| (*f).clone()).collect(),
    };
    let win = |x: &SeriesFrame, y: &SeriesFrame| {
        windows_paired(x, y, d.lookback, setting.horizon, d.stride).map_err(at("data"))
    };
    let train = win(&inputs[0], clean[0])?;
    let val = win(&inputs[1], clean[1])?;
    let test = win(&inputs[2], clean[2])?;

    let stats = DatasetStats {
        columns: frame.columns.clone(),
        mean: scaled.scaler.mean.clone(),
        std: scaled.scaler.std.clone(),
        rows: frame.len(),
        borders: parts.borders,
    };
    Ok(Prepared {
        train,
        val,
        test,
        stats,
        prep_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Deterministic outcome of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub test_mse: f64,
    pub test_mae: f64,
    pub best_epoch: Option<usize>,
    pub iterations: u64,
    pub history: Vec<EpochRecord>,
}

/// Wall-clock side of a run, reported separately from [`SeedRun`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub loss_kind: LossKind,
    pub horizon: usize,
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub ms_per_iter: f64,
    pub train_seconds: f64,
    pub prep_seconds: f64,
}

pub fn fit(cfg: &RunConfig, data: &Prepared, kind: LossKind, seed: u64) -> Result<TrainOutcome> {
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = seed;
    train_cfg.loss_kind = kind;
    train_cfg.validate().map_err(at("train"))?;
    let mut loss_cfg = cfg.loss;
    loss_cfg.seed = seed ^ LOSS_STREAM;
    loss_cfg.validate().map_err(at("loss"))?;

    let decomposition = DecompositionSpec::new(cfg.model.kernel_size).map_err(at("model"))?;
    let d = data.train.channels();
    let model =
        LinearForecaster::new(cfg.data.lookback, data.train.horizon, d, decomposition, seed).map_err(at("model"))?;
    let val = (!data.val.is_empty()).then_some(&data.val);
    train(&model, &data.train, val, &loss_cfg, &train_cfg).map_err(at("train"))
}

/// Trains one model and scores it with plain MSE / MAE on the test split.
pub fn run_once(
    cfg: &RunConfig,
    data: &Prepared,
    kind: LossKind,
    setting: Setting,
) -> Result<(SeedRun, RunTiming, LinearForecaster)> {
    let outcome = fit(cfg, data, kind, setting.seed)?;
    let metrics = evaluate_metrics(&outcome.model, &data.test, cfg.train.batch_size).map_err(at("data"))?;
    let ms_per_iter = outcome.ms_per_iter();
    let run = SeedRun {
        seed: setting.seed,
        test_mse: metrics.mse,
        test_mae: metrics.mae,
        best_epoch: outcome.best_epoch,
        iterations: outcome.iterations,
        history: outcome.history,
    };
    let timing = RunTiming {
        loss_kind: kind,
        horizon: setting.horizon,
        snr_db: setting.snr_db,
        seed: setting.seed,
        ms_per_iter,
        train_seconds: outcome.train_seconds,
        prep_seconds: data.prep_seconds,
    };
    Ok((run, timing, outcome.model))
}

/// Seeds `seed, seed + 1, ...` for `repeats` runs.
pub fn seeds(cfg: &RunConfig) -> Vec<u64> {
    (0..cfg.run.repeats as u64)
        .map(|i| cfg.run.seed.wrapping_add(i))
        .collect()
}
