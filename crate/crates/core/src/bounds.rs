//! Generalization-bound terms for empirical HSIC: Rademacher quantities over
//! the Hoeffding components of each kernel, the three gamma functions, and
//! a Monte-Carlo convergence study.
//!
//! The function class is the single fixed kernel, so every supremum over
//! the class is an evaluation.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hsic::{hsic_ustat, plugin_value_and_gradient, HsicConfig};
use crate::kernels::{hoeffding_components, KernelSpec};
use crate::stats::{ols_slope, MeanAccumulator};

pub const MIN_MC_DRAWS: usize = 100;
pub const MAX_EXHAUSTIVE_N: usize = 20;

/// Sample Rademacher quantities of one kernel, conditioned on the sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimates {
    pub n: usize,
    /// `E_σ (1/n)|Σ σ_i f1_i|`
    pub r_sigma: f64,
    /// `E_σ |σᵀ f2 σ| / n²`
    pub w_sigma_sigma: f64,
    /// `E_σ ‖f2 σ‖₂ / n²`
    pub w_sigma_alpha: f64,
    /// `E_σ max_k |Σ_i σ_i f2_ik| / n`
    pub w_sigma: f64,
    /// `max |f2|`
    pub f_sup: f64,
    /// Sign vectors averaged over (`2ⁿ` when exhaustive).
    pub mc_draws: usize,
    pub exhaustive: bool,
    pub r_sigma_se: f64,
    pub w_sigma_sigma_se: f64,
    pub w_sigma_alpha_se: f64,
    pub w_sigma_se: f64,
}

struct DrawTerms {
    r: f64,
    wss: f64,
    wsa: f64,
    ws: f64,
}

fn draw_terms(f1: &Array1<f64>, f2: &Array2<f64>, sigma: &Array1<f64>) -> DrawTerms {
    let n = f1.len() as f64;
    let f2s = f2.dot(sigma);
    DrawTerms {
        r: sigma.dot(f1).abs() / n,
        wss: sigma.dot(&f2s).abs() / (n * n),
        wsa: f2s.dot(&f2s).sqrt() / (n * n),
        ws: f2s.iter().fold(0.0f64, |m, v| m.max(v.abs())) / n,
    }
}

#[derive(Default)]
struct Accumulators {
    r: MeanAccumulator,
    wss: MeanAccumulator,
    wsa: MeanAccumulator,
    ws: MeanAccumulator,
}

impl Accumulators {
    fn push(&mut self, t: DrawTerms) {
        self.r.push(t.r);
        self.wss.push(t.wss);
        self.wsa.push(t.wsa);
        self.ws.push(t.ws);
    }

    fn finish(self, n: usize, f_sup: f64, exhaustive: bool) -> RademacherEstimates {
        let se = |a: &MeanAccumulator| if exhaustive { 0.0 } else { a.stderr() };
        RademacherEstimates {
            n,
            r_sigma: self.r.mean(),
            w_sigma_sigma: self.wss.mean(),
            w_sigma_alpha: self.wsa.mean(),
            w_sigma: self.ws.mean(),
            f_sup,
            mc_draws: self.r.count(),
            exhaustive,
            r_sigma_se: se(&self.r),
            w_sigma_sigma_se: se(&self.wss),
            w_sigma_alpha_se: se(&self.wsa),
            w_sigma_se: se(&self.ws),
        }
    }
}

/// Monte-Carlo estimates from `mc_draws` seeded sign vectors.
pub fn estimate_rademacher(
    samples: ArrayView2<f64>,
    spec: &KernelSpec,
    mc_draws: usize,
    seed: u64,
) -> Result<RademacherEstimates> {
    if mc_draws < MIN_MC_DRAWS {
        return Err(Error::invalid(
            "mc_draws",
            format!("need at least {MIN_MC_DRAWS}, got {mc_draws}"),
        ));
    }
    let h = hoeffding_components(samples, spec)?;
    let n = samples.nrows();
    let f_sup = h.f2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = Accumulators::default();
    let mut sigma = Array1::zeros(n);
    for _ in 0..mc_draws {
        sigma.mapv_inplace(|_| if rng.random::<bool>() { 1.0 } else { -1.0 });
        acc.push(draw_terms(&h.f1, &h.f2, &sigma));
    }
    Ok(acc.finish(n, f_sup, false))
}

/// Exact expectations by enumerating all `2ⁿ` sign vectors.
pub fn estimate_rademacher_exhaustive(samples: ArrayView2<f64>, spec: &KernelSpec) -> Result<RademacherEstimates> {
    let n = samples.nrows();
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::invalid(
            "n",
            format!("exhaustive enumeration is limited to n <= {MAX_EXHAUSTIVE_N}, got {n}"),
        ));
    }
    let h = hoeffding_components(samples, spec)?;
    let f_sup = h.f2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut acc = Accumulators::default();
    for mask in 0u64..(1u64 << n) {
        let sigma = Array1::from_shape_fn(n, |i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 });
        acc.push(draw_terms(&h.f1, &h.f2, &sigma));
    }
    Ok(acc.finish(n, f_sup, true))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaTerms {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

impl GammaTerms {
    pub fn sum(&self) -> f64 {
        self.gamma1 + self.gamma2 + self.gamma3
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Evaluates the three closed forms for one kernel with bounds `c1 ≤ k ≤ c2`.
pub fn gamma_terms(n: usize, delta: f64, est: &RademacherEstimates, c1: f64, c2: f64, c0: f64) -> Result<GammaTerms> {
    check_delta(delta)?;
    if n < 2 {
        return Err(Error::InsufficientSamples {
            estimator: "bound terms",
            needed: 2,
            got: n,
        });
    }
    if c1.is_nan() || c2.is_nan() || c2 <= c1 {
        return Err(Error::invalid("c2", format!("must exceed c1 ({c1}), got {c2}")));
    }
    if !(c0.is_finite() && c0 > 0.0) {
        return Err(Error::invalid("c0", format!("must be > 0, got {c0}")));
    }
    let nf = n as f64;
    let ln = (2.0 / delta).ln();
    let span = c2 - c1;
    let gamma1 = 10.0 * span / nf * ln;
    let gamma2 = 2.0 * span * (2.0 * ln * (est.r_sigma / (2.0 * nf) + ln / (nf * nf))).sqrt();
    let f = est.f_sup;
    let inner = c0 / (nf - 1.0)
        * (est.w_sigma_sigma
            + 2f64.sqrt() * est.w_sigma_alpha
            + 2.0 * (est.w_sigma + f) / nf
            + 8f64.sqrt() * f * nf.sqrt() / (nf * nf)
            + 4.0 * f / (nf * nf));
    let gamma3 = 4.0 * (ln * (inner + ln / (nf * nf))).sqrt();
    Ok(GammaTerms { gamma1, gamma2, gamma3 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBound {
    pub c1: f64,
    pub c2: f64,
    pub estimates: RademacherEstimates,
    pub gammas: GammaTerms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub delta: f64,
    pub c0: f64,
    /// Terms of the residual kernel.
    pub k: KernelBound,
    /// Terms of the noise kernel.
    pub l: KernelBound,
    /// `3 Σ_{j∈{k,l}} c2(j) Σ_m γ_m(j)`
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundConfig {
    pub delta: f64,
    pub c0: f64,
    pub mc_draws: usize,
    pub seed: u64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            delta: 0.05,
            c0: 1.0,
            mc_draws: 200,
            seed: 0,
        }
    }
}

/// Full bound for the sample `(r, s)`: Rademacher estimates and gammas for
/// both kernels and the combined total.
pub fn bound_report(
    r: ArrayView2<f64>,
    s: ArrayView2<f64>,
    hsic: &HsicConfig,
    cfg: &BoundConfig,
) -> Result<BoundReport> {
    hsic.validate()?;
    check_delta(cfg.delta)?;
    if r.nrows() != s.nrows() {
        return Err(Error::DimensionMismatch {
            expected: r.nrows(),
            got: s.nrows(),
        });
    }
    let n = r.nrows();
    let side = |x: ArrayView2<f64>, spec: &KernelSpec, stream: u64| -> Result<KernelBound> {
        let estimates = estimate_rademacher(x, spec, cfg.mc_draws, cfg.seed.wrapping_add(stream))?;
        let (c1, c2) = spec.range();
        let gammas = gamma_terms(n, cfg.delta, &estimates, c1, c2, cfg.c0)?;
        Ok(KernelBound {
            c1,
            c2,
            estimates,
            gammas,
        })
    };
    let k = side(r, &hsic.kernel_r, 0)?;
    let l = side(s, &hsic.kernel_s, 1)?;
    let total = 3.0 * (k.c2 * k.gammas.sum() + l.c2 * l.gammas.sum());
    Ok(BoundReport {
        n,
        delta: cfg.delta,
        c0: cfg.c0,
        k,
        l,
        total,
    })
}

/// Joint law of the synthetic `(R, S)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependence {
    /// `S ⟂ R`, both standard normal.
    Independent,
    /// `S = 0.5 R + √0.75 Z`
    Linear,
    /// `S = R² + 0.5 Z` (uncorrelated with `R`, yet dependent)
    Quadratic,
}

impl std::str::FromStr for Dependence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(Dependence::Independent),
            "linear" => Ok(Dependence::Linear),
            "quadratic" => Ok(Dependence::Quadratic),
            other => Err(Error::invalid("dependence", format!("unknown dependence `{other}`"))),
        }
    }
}

/// Draws `n` scalar pairs.
pub fn draw_pairs(dep: Dependence, n: usize, rng: &mut ChaCha8Rng) -> (Array2<f64>, Array2<f64>) {
    let mut r = Array2::zeros((n, 1));
    let mut s = Array2::zeros((n, 1));
    for i in 0..n {
        let a: f64 = rng.sample(StandardNormal);
        let z: f64 = rng.sample(StandardNormal);
        r[[i, 0]] = a;
        s[[i, 0]] = match dep {
            Dependence::Independent => z,
            Dependence::Linear => 0.5 * a + 0.75f64.sqrt() * z,
            Dependence::Quadratic => a * a + 0.5 * z,
        };
    }
    (r, s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub dependence: Dependence,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub reference_n: usize,
    pub seed: u64,
    #[serde(default)]
    pub hsic: HsicConfig,
    #[serde(default)]
    pub bound: BoundConfig,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            dependence: Dependence::Independent,
            n_grid: vec![50, 100, 200, 400],
            replicates: 50,
            reference_n: 4000,
            seed: 0,
            hsic: HsicConfig::default(),
            bound: BoundConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// Mean of `|HSIC_n − reference|` over replicates.
    pub mean_abs_dev: f64,
    pub dev_stderr: f64,
    pub mean_hsic: f64,
    /// Replicate means of the bound terms.
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub bound_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub reference: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln mean_abs_dev` on `ln n`.
    pub loglog_slope: f64,
}

/// Plug-in HSIC of one large sample from `dep`, streamed without storing
/// Gram matrices.
pub fn reference_hsic(dep: Dependence, n: usize, hsic: &HsicConfig, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (r, s) = draw_pairs(dep, n, &mut rng);
    Ok(plugin_value_and_gradient(r.view(), s.view(), hsic)?.0)
}

/// For each `n` in the grid: U-statistic deviation from a large-sample
/// reference, and the bound terms, averaged over replicates.
pub fn convergence_study(cfg: &ConvergenceConfig) -> Result<ConvergenceStudy> {
    if cfg.n_grid.is_empty() || cfg.n_grid.iter().any(|&n| n < 4) {
        return Err(Error::invalid("n_grid", "needs at least one size, each >= 4"));
    }
    if cfg.n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("n_grid", "sizes must be strictly increasing"));
    }
    if cfg.replicates < 20 {
        return Err(Error::invalid(
            "replicates",
            format!("need at least 20, got {}", cfg.replicates),
        ));
    }
    let max_n = *cfg.n_grid.last().expect("non-empty");
    if cfg.reference_n < 10 * max_n {
        return Err(Error::invalid(
            "reference_n",
            format!(
                "must be >= 10 x largest grid size ({}), got {}",
                10 * max_n,
                cfg.reference_n
            ),
        ));
    }
    let reference = reference_hsic(cfg.dependence, cfg.reference_n, &cfg.hsic, cfg.seed)?;
    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for (gi, &n) in cfg.n_grid.iter().enumerate() {
        let mut dev = MeanAccumulator::default();
        let mut value = MeanAccumulator::default();
        let mut g = [
            MeanAccumulator::default(),
            MeanAccumulator::default(),
            MeanAccumulator::default(),
            MeanAccumulator::default(),
        ];
        for rep in 0..cfg.replicates {
            let stream = cfg.seed.wrapping_add(1 + (gi * cfg.replicates + rep) as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            let (r, s) = draw_pairs(cfg.dependence, n, &mut rng);
            let h = hsic_ustat(r.view(), s.view(), &cfg.hsic)?.value;
            dev.push((h - reference).abs());
            value.push(h);
            let bound_cfg = BoundConfig {
                seed: stream,
                ..cfg.bound
            };
            let rep = bound_report(r.view(), s.view(), &cfg.hsic, &bound_cfg)?;
            g[0].push(rep.k.gammas.gamma1 + rep.l.gammas.gamma1);
            g[1].push(rep.k.gammas.gamma2 + rep.l.gammas.gamma2);
            g[2].push(rep.k.gammas.gamma3 + rep.l.gammas.gamma3);
            g[3].push(rep.total);
        }
        rows.push(ConvergenceRow {
            n,
            mean_abs_dev: dev.mean(),
            dev_stderr: dev.stderr(),
            mean_hsic: value.mean(),
            gamma1: g[0].mean(),
            gamma2: g[1].mean(),
            gamma3: g[2].mean(),
            bound_total: g[3].mean(),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_abs_dev.ln()).collect();
    let loglog_slope = if rows.len() >= 2 { ols_slope(&xs, &ys) } else { f64::NAN };
    Ok(ConvergenceStudy {
        reference,
        rows,
        loglog_slope,
    })
}
