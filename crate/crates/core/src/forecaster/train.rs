use std::time::Instant;

use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::model::LinearForecaster;
use crate::data::WindowDataset;
use crate::error::{Error, Result};
use crate::loss::{evaluate, sample_noise, LossKind, RiLossConfig};
use crate::stats::CompensatedSum;

// Validation noise comes from its own stream so that training batches
// never shift it.
const VAL_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub loss_kind: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.005,
            epochs: 10,
            batch_size: 32,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            loss_kind: LossKind::Mse,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid(
                "learning_rate",
                format!("must be > 0, got {}", self.learning_rate),
            ));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::invalid(name, format!("must lie in (0, 1), got {b}")));
            }
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return Err(Error::invalid(
                "adam_eps",
                format!("must be > 0, got {}", self.adam_eps),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training objective over the epoch's batches.
    pub train_loss: f64,
    pub train_mse: f64,
    /// Mean dependence value (HSIC or Pearson) over the epoch's batches;
    /// 0 for point losses.
    pub hsic_value: f64,
    pub val_loss: Option<f64>,
    pub val_mse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-validation snapshot, or the final model without validation data.
    pub model: LinearForecaster,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch of the returned snapshot; `None` when no epoch ran.
    pub best_epoch: Option<usize>,
    pub iterations: u64,
    /// Wall-clock time spent in the optimisation loop.
    pub train_seconds: f64,
}

impl TrainOutcome {
    pub fn ms_per_iter(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            1e3 * self.train_seconds / self.iterations as f64
        }
    }
}

/// Plain test metrics over a whole dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
}

fn batches(len: usize, batch: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
    (0..len).step_by(batch).map(move |s| s..(s + batch).min(len))
}

/// MSE and MAE of the model's forecasts over every window of `ds`.
pub fn evaluate_metrics(model: &LinearForecaster, ds: &WindowDataset, batch: usize) -> Result<Metrics> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut se = CompensatedSum::default();
    let mut ae = CompensatedSum::default();
    for r in batches(ds.len(), batch.max(1)) {
        let x = ds.inputs.slice_axis(Axis(0), r.clone().into());
        let y = ds.targets.slice_axis(Axis(0), r.into());
        let yhat = model.forward_batch(x)?;
        for (a, b) in y.iter().zip(yhat.iter()) {
            se.add((a - b) * (a - b));
            ae.add((a - b).abs());
        }
    }
    let n = ds.targets.len() as f64;
    Ok(Metrics {
        mse: se.value() / n,
        mae: ae.value() / n,
    })
}

/// Mean loss of kind `kind` over sequential batches, with a fixed noise
/// stream so values are comparable across epochs.
fn validation_loss(
    model: &LinearForecaster,
    ds: &WindowDataset,
    kind: LossKind,
    loss: &RiLossConfig,
    batch: usize,
) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(loss.seed ^ VAL_STREAM);
    let mut total = CompensatedSum::default();
    let mut mse = CompensatedSum::default();
    for r in batches(ds.len(), batch) {
        let x = ds.inputs.slice_axis(Axis(0), r.clone().into());
        let y = ds.targets.slice_axis(Axis(0), r.clone().into());
        let yhat = model.forward_batch(x)?;
        let eps = kind
            .needs_noise()
            .then(|| sample_noise(yhat.dim(), loss.noise, &mut rng));
        let rep = evaluate(kind, y, yhat.view(), eps.as_ref().map(|e| e.view()), loss)?;
        let weight = r.len() as f64;
        total.add(rep.total * weight);
        mse.add(rep.mse_component * weight);
    }
    let n = ds.len() as f64;
    Ok((total.value() / n, mse.value() / n))
}

/// Mini-batch training: shuffle, forecast, draw noise for the noise-aware
/// losses, differentiate, Adam step. Returns the snapshot with the lowest
/// validation loss.
pub fn train(
    model: &LinearForecaster,
    train_set: &WindowDataset,
    val_set: Option<&WindowDataset>,
    loss: &RiLossConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    loss.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(v) = val_set {
        if v.is_empty() {
            return Err(Error::EmptyDataset);
        }
    }
    let kind = cfg.loss_kind;
    let mut current = model.clone();
    let mut best = model.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut adam = AdamState::new(current.params().len());
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut noise_rng = loss.noise_rng();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut iterations = 0u64;
    let mut elapsed = 0.0;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut order_rng);
        let mut loss_sum = CompensatedSum::default();
        let mut mse_sum = CompensatedSum::default();
        let mut dep_sum = CompensatedSum::default();
        let mut count = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = train_set.batch(chunk);
            let (yhat, cache) = current.forward_cached(x.view())?;
            let eps = kind
                .needs_noise()
                .then(|| sample_noise(yhat.dim(), loss.noise, &mut noise_rng));
            let rep = evaluate(kind, y.view(), yhat.view(), eps.as_ref().map(|e| e.view()), loss)?;
            let grads = current.backward_cached(&cache, rep.grad.view())?;
            adam_step(current.params_mut(), &grads, &mut adam, cfg)?;
            if current.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::invalid(
                    "learning_rate",
                    format!("parameters diverged in epoch {epoch}"),
                ));
            }
            let w = chunk.len() as f64;
            loss_sum.add(rep.total * w);
            mse_sum.add(rep.mse_component * w);
            dep_sum.add(rep.hsic_value * w);
            count += chunk.len();
            iterations += 1;
        }
        elapsed += started.elapsed().as_secs_f64();

        let (val_loss, val_mse) = match val_set {
            Some(v) => {
                let (l, m) = validation_loss(&current, v, kind, loss, cfg.batch_size)?;
                (Some(l), Some(m))
            }
            None => (None, None),
        };
        match val_loss {
            Some(l) if l < best_val => {
                best_val = l;
                best = current.clone();
                best_epoch = Some(epoch);
            }
            None => {
                best = current.clone();
                best_epoch = Some(epoch);
            }
            _ => {}
        }
        let n = count as f64;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum.value() / n,
            train_mse: mse_sum.value() / n,
            hsic_value: dep_sum.value() / n,
            val_loss,
            val_mse,
        });
    }

    Ok(TrainOutcome {
        model: best,
        history,
        best_epoch,
        iterations,
        train_seconds: elapsed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecaster::DecompositionSpec;
    use ndarray::Array3;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Targets are an exact linear map of the inputs.
    fn linear_data(n: usize, w: usize, h: usize, seed: u64) -> WindowDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..h * w).map(|_| rng.random_range(-0.3..0.3)).collect();
        let x = Array3::from_shape_simple_fn((n, w, 1), || rng.sample(StandardNormal));
        let mut y = Array3::zeros((n, h, 1));
        for b in 0..n {
            for t in 0..h {
                y[[b, t, 0]] = (0..w).map(|j| a[t * w + j] * x[[b, j, 0]]).sum();
            }
        }
        WindowDataset {
            lookback: w,
            horizon: h,
            stride: 1,
            inputs: x,
            targets: y,
        }
    }

    fn model(w: usize, h: usize) -> LinearForecaster {
        LinearForecaster::new(w, h, 1, DecompositionSpec::new(3).unwrap(), 1).unwrap()
    }

    #[test]
    fn zero_epochs_is_identity() {
        let ds = linear_data(20, 8, 2, 0);
        let m = model(8, 2);
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let out = train(&m, &ds, Some(&ds), &RiLossConfig::default(), &cfg).unwrap();
        assert_eq!(out.model, m);
        assert!(out.history.is_empty());
        assert_eq!(out.best_epoch, None);
    }

    #[test]
    fn learns_noiseless_linear_system() {
        let train_set = linear_data(512, 8, 3, 1);
        let val_set = linear_data(128, 8, 3, 1);
        let cfg = TrainConfig {
            epochs: 40,
            learning_rate: 0.01,
            ..Default::default()
        };
        let out = train(&model(8, 3), &train_set, Some(&val_set), &RiLossConfig::default(), &cfg).unwrap();
        let val: Vec<f64> = out.history.iter().map(|r| r.val_mse.unwrap()).collect();
        for k in 1..5 {
            assert!(val[k] < val[k - 1], "epoch {k}: {val:?}");
        }
        assert!(val.last().unwrap() < &1e-3, "{val:?}");
        let m = evaluate_metrics(&out.model, &val_set, 64).unwrap();
        assert!(m.mse < 1e-3);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let ds = linear_data(64, 8, 2, 2);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 16,
            loss_kind: LossKind::Ri,
            ..Default::default()
        };
        let run = || train(&model(8, 2), &ds, Some(&ds), &RiLossConfig::default(), &cfg).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
        assert_eq!(a.iterations, 12);
        let other = train(
            &model(8, 2),
            &ds,
            None,
            &RiLossConfig::default(),
            &TrainConfig { seed: 5, ..cfg },
        )
        .unwrap();
        assert_ne!(other.model, a.model);
    }

    #[test]
    fn every_loss_kind_trains() {
        let ds = linear_data(40, 6, 2, 3);
        for kind in LossKind::ALL {
            let cfg = TrainConfig {
                epochs: 2,
                batch_size: 8,
                loss_kind: kind,
                ..Default::default()
            };
            let out = train(&model(6, 2), &ds, Some(&ds), &RiLossConfig::default(), &cfg).unwrap();
            assert!(out.history.iter().all(|r| r.train_loss.is_finite()));
            if kind == LossKind::Ri {
                assert!(out.history.iter().all(|r| r.hsic_value > 0.0));
            }
        }
    }

    #[test]
    fn empty_and_invalid() {
        let ds = linear_data(4, 6, 2, 3);
        let empty = WindowDataset {
            inputs: Array3::zeros((0, 6, 1)),
            targets: Array3::zeros((0, 2, 1)),
            ..ds.clone()
        };
        let cfg = TrainConfig::default();
        assert!(matches!(
            train(&model(6, 2), &empty, None, &RiLossConfig::default(), &cfg),
            Err(Error::EmptyDataset)
        ));
        let bad = TrainConfig {
            adam_beta1: 1.0,
            ..Default::default()
        };
        assert!(train(&model(6, 2), &ds, None, &RiLossConfig::default(), &bad).is_err());
    }
}
