//! Forecasting objectives and their gradients with respect to predictions.
//!
//! Tensors are `B × H × d` (batch, horizon, channel). Point losses are
//! normalised by the element count `B·H·d`.

use ndarray::{Array1, Array2, Array3, ArrayView, ArrayView2, ArrayView3, Dimension, Zip};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hsic::{hsic, plugin_value_and_gradient, Estimator, HsicConfig};
use crate::kernels::{scalar_samples, KernelSpec, ScaleConvention};
use crate::stats::MeanAccumulator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Mse,
    Mae,
    Ri,
    PearsonMse,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Ri, LossKind::Mae, LossKind::Mse, LossKind::PearsonMse];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::Mae => "mae",
            LossKind::Ri => "ri",
            LossKind::PearsonMse => "pearson_mse",
        }
    }

    /// Whether the loss consumes an injected noise tensor.
    pub fn needs_noise(self) -> bool {
        matches!(self, LossKind::Ri | LossKind::PearsonMse)
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "mae" => Ok(LossKind::Mae),
            "ri" => Ok(LossKind::Ri),
            "pearson_mse" | "pearson" => Ok(LossKind::PearsonMse),
            other => Err(Error::invalid("loss", format!("unknown loss kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// i.i.d. `U(-1, 1)`
    #[default]
    Uniform,
}

/// How a `B × H × d` residual tensor is laid out as HSIC samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SampleAxis {
    /// `B·H` samples of dimension `d`
    #[default]
    PerTimestep,
    /// `B` samples of dimension `H·d`
    WholeWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiLossConfig {
    pub lambda: f64,
    pub tau: f64,
    #[serde(default)]
    pub hsic: HsicConfig,
    #[serde(default)]
    pub noise: NoiseKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sample_axis: SampleAxis,
}

impl Default for RiLossConfig {
    fn default() -> Self {
        RiLossConfig {
            lambda: 10.0,
            tau: 1.0,
            hsic: HsicConfig::default(),
            noise: NoiseKind::Uniform,
            seed: 0,
            sample_axis: SampleAxis::PerTimestep,
        }
    }
}

impl RiLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid("lambda", format!("must be >= 0, got {}", self.lambda)));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::invalid("tau", format!("must be > 0, got {}", self.tau)));
        }
        self.hsic.validate()
    }

    /// Fresh generator for this configuration's noise stream.
    pub fn noise_rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub total: f64,
    pub mse_component: f64,
    /// HSIC for the RI loss, Pearson correlation for the ablation, 0 otherwise.
    pub hsic_value: f64,
    /// `lambda * exp(-tau * hsic_value)`, or 0 for point losses.
    pub hsic_term: f64,
    /// `d total / d yhat`
    pub grad: Array3<f64>,
    /// Set when the dependence measure was undefined and replaced by 0.
    pub degenerate: bool,
}

fn check_shapes<D: Dimension>(a: &ArrayView<f64, D>, b: &ArrayView<f64, D>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    if a.is_empty() {
        return Err(Error::invalid("shape", "empty tensor"));
    }
    Ok(())
}

pub fn mse<D: Dimension>(y: ArrayView<f64, D>, yhat: ArrayView<f64, D>) -> Result<f64> {
    check_shapes(&y, &yhat)?;
    let mut sum = 0.0;
    Zip::from(&y).and(&yhat).for_each(|a, b| sum += (a - b) * (a - b));
    Ok(sum / y.len() as f64)
}

pub fn mae<D: Dimension>(y: ArrayView<f64, D>, yhat: ArrayView<f64, D>) -> Result<f64> {
    check_shapes(&y, &yhat)?;
    let mut sum = 0.0;
    Zip::from(&y).and(&yhat).for_each(|a, b| sum += (a - b).abs());
    Ok(sum / y.len() as f64)
}

/// `<y - yhat, eps>` over all elements.
pub fn cross_term<D: Dimension>(y: ArrayView<f64, D>, yhat: ArrayView<f64, D>, eps: ArrayView<f64, D>) -> Result<f64> {
    check_shapes(&y, &yhat)?;
    check_shapes(&y, &eps)?;
    let mut sum = 0.0;
    Zip::from(&y)
        .and(&yhat)
        .and(&eps)
        .for_each(|a, b, e| sum += (a - b) * e);
    Ok(sum)
}

pub fn pearson(r: &[f64], s: &[f64]) -> Result<f64> {
    if r.len() != s.len() {
        return Err(Error::ShapeMismatch {
            left: vec![r.len()],
            right: vec![s.len()],
        });
    }
    if r.len() < 2 {
        return Err(Error::InsufficientSamples {
            estimator: "pearson",
            needed: 2,
            got: r.len(),
        });
    }
    let n = r.len() as f64;
    let (mr, ms) = (r.iter().sum::<f64>() / n, s.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in r.iter().zip(s) {
        sxy += (a - mr) * (b - ms);
        sxx += (a - mr) * (a - mr);
        syy += (b - ms) * (b - ms);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn sample_noise<R: Rng + ?Sized>(shape: (usize, usize, usize), kind: NoiseKind, rng: &mut R) -> Array3<f64> {
    match kind {
        NoiseKind::Uniform => Array3::from_shape_simple_fn(shape, || rng.random_range(-1.0..1.0)),
    }
}

fn as_samples<'a>(t: &'a ArrayView3<'a, f64>, axis: SampleAxis) -> ArrayView2<'a, f64> {
    let (b, h, d) = t.dim();
    let shape = match axis {
        SampleAxis::PerTimestep => (b * h, d),
        SampleAxis::WholeWindow => (b, h * d),
    };
    t.view().into_shape_with_order(shape).expect("contiguous tensor")
}

fn squared_error_grad(y: &ArrayView3<f64>, yhat: &ArrayView3<f64>) -> (f64, Array3<f64>) {
    let n = y.len() as f64;
    let mut sum = 0.0;
    let mut grad = Array3::zeros(y.dim());
    Zip::from(&mut grad).and(y).and(yhat).for_each(|g, a, b| {
        let r = a - b;
        sum += r * r;
        *g = -2.0 * r / n;
    });
    (sum / n, grad)
}

pub fn mse_loss(y: ArrayView3<f64>, yhat: ArrayView3<f64>) -> Result<LossReport> {
    check_shapes(&y, &yhat)?;
    let (m, grad) = squared_error_grad(&y, &yhat);
    Ok(LossReport {
        total: m,
        mse_component: m,
        hsic_value: 0.0,
        hsic_term: 0.0,
        grad,
        degenerate: false,
    })
}

pub fn mae_loss(y: ArrayView3<f64>, yhat: ArrayView3<f64>) -> Result<LossReport> {
    check_shapes(&y, &yhat)?;
    let n = y.len() as f64;
    let mut sum = 0.0;
    let mut grad = Array3::zeros(y.dim());
    Zip::from(&mut grad).and(&y).and(&yhat).for_each(|g, a, b| {
        let r = b - a;
        sum += r.abs();
        *g = if r > 0.0 {
            1.0 / n
        } else if r < 0.0 {
            -1.0 / n
        } else {
            0.0
        };
    });
    Ok(LossReport {
        total: sum / n,
        mse_component: mse(y, yhat)?,
        hsic_value: 0.0,
        hsic_term: 0.0,
        grad,
        degenerate: false,
    })
}

/// `MSE + lambda * exp(-tau * HSIC(y - yhat, eps))` and its gradient.
pub fn ri_loss(
    y: ArrayView3<f64>,
    yhat: ArrayView3<f64>,
    eps: ArrayView3<f64>,
    cfg: &RiLossConfig,
) -> Result<LossReport> {
    cfg.validate()?;
    check_shapes(&y, &yhat)?;
    check_shapes(&y, &eps)?;
    if cfg.hsic.estimator != Estimator::Plugin {
        return Err(Error::invalid(
            "estimator",
            "the training loss differentiates the plug-in estimator",
        ));
    }
    let (m, mut grad) = squared_error_grad(&y, &yhat);
    let residual = (&y - &yhat).as_standard_layout().into_owned();
    let eps = eps.as_standard_layout();
    let rv = residual.view();
    let ev = eps.view();
    let (h, dh_dr) = plugin_value_and_gradient(
        as_samples(&rv, cfg.sample_axis),
        as_samples(&ev, cfg.sample_axis),
        &cfg.hsic,
    )?;
    let term = cfg.lambda * (-cfg.tau * h).exp();
    // d/dyhat = -d/dr, and d(term)/dh = -tau * term
    let coef = cfg.tau * term;
    let dh = dh_dr.into_shape_with_order(y.dim()).expect("same element count");
    grad.scaled_add(coef, &dh);
    Ok(LossReport {
        total: m + term,
        mse_component: m,
        hsic_value: h,
        hsic_term: term,
        grad,
        degenerate: false,
    })
}

/// RI loss with HSIC replaced by the Pearson correlation of the flattened
/// residual and noise.
pub fn pearson_mse_loss(
    y: ArrayView3<f64>,
    yhat: ArrayView3<f64>,
    eps: ArrayView3<f64>,
    cfg: &RiLossConfig,
) -> Result<LossReport> {
    cfg.validate()?;
    check_shapes(&y, &yhat)?;
    check_shapes(&y, &eps)?;
    let (m, mut grad) = squared_error_grad(&y, &yhat);
    let n = y.len() as f64;
    let residual: Array1<f64> = Zip::from(&y).and(&yhat).map_collect(|a, b| a - b).into_iter().collect();
    let noise: Array1<f64> = eps.iter().copied().collect();
    let rc = &residual - residual.sum() / n;
    let sc = &noise - noise.sum() / n;
    let (nr, ns) = (rc.dot(&rc).sqrt(), sc.dot(&sc).sqrt());
    if nr == 0.0 || ns == 0.0 {
        return Ok(LossReport {
            total: m + cfg.lambda,
            mse_component: m,
            hsic_value: 0.0,
            hsic_term: cfg.lambda,
            grad,
            degenerate: true,
        });
    }
    let pc = (rc.dot(&sc) / (nr * ns)).clamp(-1.0, 1.0);
    let term = cfg.lambda * (-cfg.tau * pc).exp();
    // dPC/dr = sc / (|rc||sc|) - pc * rc / |rc|^2 ; d/dyhat = -d/dr
    let dpc_dr = &sc / (nr * ns) - &rc * (pc / (nr * nr));
    let coef = cfg.tau * term;
    Zip::from(&mut grad)
        .and(&dpc_dr.into_shape_with_order(y.dim()).expect("same element count"))
        .for_each(|g, d| *g += coef * d);
    Ok(LossReport {
        total: m + term,
        mse_component: m,
        hsic_value: pc,
        hsic_term: term,
        grad,
        degenerate: false,
    })
}

/// Evaluates the loss selected by `kind`. `eps` is required for the two
/// noise-aware losses and ignored otherwise.
pub fn evaluate(
    kind: LossKind,
    y: ArrayView3<f64>,
    yhat: ArrayView3<f64>,
    eps: Option<ArrayView3<f64>>,
    cfg: &RiLossConfig,
) -> Result<LossReport> {
    let need = || eps.ok_or_else(|| Error::invalid("noise", format!("{} loss needs a noise tensor", kind.name())));
    match kind {
        LossKind::Mse => mse_loss(y, yhat),
        LossKind::Mae => mae_loss(y, yhat),
        LossKind::Ri => ri_loss(y, yhat, need()?, cfg),
        LossKind::PearsonMse => pearson_mse_loss(y, yhat, need()?, cfg),
    }
}

/// How the noise-ratio experiment corrupts the clean sinusoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionMode {
    /// Selected points receive fresh, independent `N(0, 1)` draws.
    #[default]
    Fresh,
    /// Selected points receive the same baseline noise present in `y_true`,
    /// so the residual there is zero.
    Retained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffConfig {
    pub taus: Vec<f64>,
    pub rhos: Vec<f64>,
    pub points: usize,
    pub seed: u64,
    pub mode: CorruptionMode,
}

impl TradeoffConfig {
    /// `steps` equally spaced ratios on `[0, 1]`.
    pub fn linspace_rhos(steps: usize) -> Vec<f64> {
        match steps {
            0 => vec![],
            1 => vec![0.0],
            _ => (0..steps).map(|i| i as f64 / (steps - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub tau: f64,
    pub rho: f64,
    pub mse: f64,
    pub hsic: f64,
    pub ri: f64,
}

/// Noise-ratio sweep on `sin(x) + eps`.
///
/// For each ratio a random subset of `round(rho * points)` clean values is
/// corrupted; MSE is measured against `y_true` and the RI value uses unit
/// Gaussian kernels on both the residual and the baseline noise, with
/// `lambda = 1`. Rows are ordered by `rho`, then `tau`.
pub fn tradeoff_curve(cfg: &TradeoffConfig) -> Result<Vec<TradeoffRow>> {
    if cfg.points < 100 {
        return Err(Error::invalid(
            "points",
            format!("need at least 100, got {}", cfg.points),
        ));
    }
    if let Some(r) = cfg.rhos.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::invalid("rho", format!("{r} outside [0, 1]")));
    }
    if let Some(t) = cfg.taus.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(Error::invalid("tau", format!("must be > 0, got {t}")));
    }
    let n = cfg.points;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x: Vec<f64> = (0..n)
        .map(|i| 2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64)
        .collect();
    let clean: Vec<f64> = x.iter().map(|v| v.sin()).collect();
    let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let y_true: Vec<f64> = clean.iter().zip(&eps).map(|(c, e)| c + e).collect();
    let unit = KernelSpec::gaussian(1.0, ScaleConvention::Unit)?;
    let hcfg = HsicConfig {
        estimator: Estimator::Plugin,
        kernel_r: unit,
        kernel_s: unit,
    };
    let eps_samples = scalar_samples(&eps);

    let mut rows = Vec::with_capacity(cfg.rhos.len() * cfg.taus.len());
    for &rho in &cfg.rhos {
        let count = ((rho * n as f64).round() as usize).min(n);
        let mut y_noisy = clean.clone();
        for i in index::sample(&mut rng, n, count) {
            y_noisy[i] += match cfg.mode {
                CorruptionMode::Fresh => rng.sample::<f64, _>(StandardNormal),
                CorruptionMode::Retained => eps[i],
            };
        }
        let delta: Vec<f64> = y_true.iter().zip(&y_noisy).map(|(a, b)| a - b).collect();
        let mse = delta.iter().map(|d| d * d).sum::<f64>() / n as f64;
        let h = hsic(scalar_samples(&delta).view(), eps_samples.view(), &hcfg)?.value;
        for &tau in &cfg.taus {
            rows.push(TradeoffRow {
                tau,
                rho,
                mse,
                hsic: h,
                ri: mse + (-tau * h).exp(),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrosstermResult {
    pub empirical: f64,
    pub analytic: f64,
    pub stderr: f64,
    pub trials: usize,
}

impl CrosstermResult {
    pub fn z_score(&self) -> f64 {
        if self.stderr == 0.0 {
            if self.empirical == self.analytic {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.empirical - self.analytic) / self.stderr
        }
    }
}

/// Monte-Carlo check of `E[(1/H) <Y - PY, eps>] = (sigma^2 / H) tr(I - P)`
/// for `Y = h + eps`, `eps ~ N(0, sigma^2 I)`.
pub fn crossterm_mc(p: ArrayView2<f64>, sigma: f64, trials: usize, seed: u64) -> Result<CrosstermResult> {
    let h = p.nrows();
    if h != p.ncols() || h == 0 {
        return Err(Error::ShapeMismatch {
            left: vec![p.nrows()],
            right: vec![p.ncols()],
        });
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("must be > 0, got {sigma}")));
    }
    if trials < 10_000 {
        return Err(Error::invalid("trials", format!("need at least 10000, got {trials}")));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid("sigma", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // any fixed deterministic signal
    let signal = Array1::from_shape_fn(h, |k| (0.7 * k as f64).sin() + 0.1 * k as f64);
    let hf = h as f64;
    let mut acc = MeanAccumulator::default();
    for _ in 0..trials {
        let eps = Array1::from_shape_simple_fn(h, || normal.sample(&mut rng));
        let y = &signal + &eps;
        let yhat = p.dot(&y);
        acc.push((&y - &yhat).dot(&eps) / hf);
    }
    let trace_p: f64 = p.diag().sum();
    Ok(CrosstermResult {
        empirical: acc.mean(),
        analytic: sigma * sigma / hf * (hf - trace_p),
        stderr: acc.stderr(),
        trials,
    })
}

/// Identity, zero or a random dense `H × H` matrix for the cross-term check.
pub fn projection_matrix(kind: &str, h: usize, seed: u64) -> Result<Array2<f64>> {
    match kind {
        "identity" => Ok(Array2::eye(h)),
        "zero" => Ok(Array2::zeros((h, h))),
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(Array2::from_shape_simple_fn((h, h), || {
                rng.random_range(-1.0..1.0) / (h as f64).sqrt()
            }))
        }
        other => Err(Error::invalid("projection", format!("unknown kind `{other}`"))),
    }
}
