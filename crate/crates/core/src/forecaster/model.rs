use ndarray::{Array2, Array3, ArrayView1, ArrayView2, ArrayView3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::decomposition::{decompose_batch, DecompositionSpec};
use crate::error::{Error, Result};

/// Trend/seasonal linear forecaster. One `H × w` map per component is shared
/// by every channel.
///
/// Parameters live in one flat vector laid out as
/// `[W_trend (H·w, row-major), b_trend (H), W_seasonal (H·w), b_seasonal (H)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForecaster {
    lookback: usize,
    horizon: usize,
    channels: usize,
    decomposition: DecompositionSpec,
    params: Vec<f64>,
}

/// Decomposed inputs kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    /// `w × (B·d)`
    trend: Array2<f64>,
    /// `w × (B·d)`
    seasonal: Array2<f64>,
}

/// `B × w × d` → `w × (B·d)`, column index `b·d + c`.
fn to_columns(x: &Array3<f64>) -> Array2<f64> {
    let (b, w, d) = x.dim();
    x.view()
        .permuted_axes([1, 0, 2])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((w, b * d))
        .expect("standard layout")
}

impl LinearForecaster {
    pub fn param_count(lookback: usize, horizon: usize) -> usize {
        2 * horizon * (lookback + 1)
    }

    /// All weights `1/w`, biases `U(-1/√w, 1/√w)` from `seed`.
    pub fn new(
        lookback: usize,
        horizon: usize,
        channels: usize,
        decomposition: DecompositionSpec,
        seed: u64,
    ) -> Result<Self> {
        let mut model = Self::zeros(lookback, horizon, channels, decomposition)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (lookback as f64).sqrt();
        let hw = horizon * lookback;
        let (wt, rest) = model.params.split_at_mut(hw);
        let (bt, rest) = rest.split_at_mut(horizon);
        let (ws, bs) = rest.split_at_mut(hw);
        wt.fill(1.0 / lookback as f64);
        ws.fill(1.0 / lookback as f64);
        for b in bt.iter_mut().chain(bs.iter_mut()) {
            *b = rng.random_range(-bound..bound);
        }
        Ok(model)
    }

    pub fn zeros(lookback: usize, horizon: usize, channels: usize, decomposition: DecompositionSpec) -> Result<Self> {
        if lookback == 0 || horizon == 0 || channels == 0 {
            return Err(Error::invalid(
                "model",
                "lookback, horizon and channels must be positive",
            ));
        }
        decomposition.validate()?;
        Ok(LinearForecaster {
            lookback,
            horizon,
            channels,
            decomposition,
            params: vec![0.0; Self::param_count(lookback, horizon)],
        })
    }

    pub fn from_params(
        lookback: usize,
        horizon: usize,
        channels: usize,
        decomposition: DecompositionSpec,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut model = Self::zeros(lookback, horizon, channels, decomposition)?;
        model.set_params(params)?;
        Ok(model)
    }

    pub fn lookback(&self) -> usize {
        self.lookback
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn decomposition(&self) -> DecompositionSpec {
        self.decomposition
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("params", "non-finite parameter"));
        }
        self.params = params;
        Ok(())
    }

    fn offsets(&self) -> [usize; 4] {
        let hw = self.horizon * self.lookback;
        [0, hw, hw + self.horizon, 2 * hw + self.horizon]
    }

    pub fn weights_trend(&self) -> ArrayView2<'_, f64> {
        let o = self.offsets();
        ArrayView2::from_shape((self.horizon, self.lookback), &self.params[o[0]..o[1]]).expect("layout")
    }

    pub fn bias_trend(&self) -> ArrayView1<'_, f64> {
        let o = self.offsets();
        ArrayView1::from(&self.params[o[1]..o[2]])
    }

    pub fn weights_seasonal(&self) -> ArrayView2<'_, f64> {
        let o = self.offsets();
        ArrayView2::from_shape((self.horizon, self.lookback), &self.params[o[2]..o[3]]).expect("layout")
    }

    pub fn bias_seasonal(&self) -> ArrayView1<'_, f64> {
        let o = self.offsets();
        ArrayView1::from(&self.params[o[3]..])
    }

    fn check_input(&self, dim: (usize, usize, usize)) -> Result<()> {
        let (b, w, d) = dim;
        if b == 0 || w != self.lookback || d != self.channels {
            return Err(Error::ShapeMismatch {
                left: vec![b, w, d],
                right: vec![b.max(1), self.lookback, self.channels],
            });
        }
        Ok(())
    }

    /// Forecast for one `w × d` window.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let out = self.forward_batch(x.insert_axis(Axis(0)))?;
        Ok(out.index_axis_move(Axis(0), 0))
    }

    /// Forecasts for a `B × w × d` batch, shape `B × H × d`.
    pub fn forward_batch(&self, x: ArrayView3<f64>) -> Result<Array3<f64>> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: ArrayView3<f64>) -> Result<(Array3<f64>, ForwardCache)> {
        self.check_input(x.dim())?;
        let (b, _, d) = x.dim();
        let (trend, seasonal) = decompose_batch(x, &self.decomposition)?;
        let cache = ForwardCache {
            batch: b,
            trend: to_columns(&trend),
            seasonal: to_columns(&seasonal),
        };
        let mut y = self.weights_trend().dot(&cache.trend) + self.weights_seasonal().dot(&cache.seasonal);
        let bias = &self.bias_trend() + &self.bias_seasonal();
        for (mut row, bh) in y.rows_mut().into_iter().zip(bias.iter()) {
            row += *bh;
        }
        let out = y
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((self.horizon, b, d))
            .expect("standard layout")
            .permuted_axes([1, 0, 2])
            .as_standard_layout()
            .into_owned();
        Ok((out, cache))
    }

    /// Gradient of a scalar loss with respect to the flat parameters, given
    /// `∂L/∂ŷ` for the batch `x`.
    pub fn backward(&self, x: ArrayView3<f64>, grad_out: ArrayView3<f64>) -> Result<Vec<f64>> {
        let (_, cache) = self.forward_cached(x)?;
        self.backward_cached(&cache, grad_out)
    }

    pub fn backward_cached(&self, cache: &ForwardCache, grad_out: ArrayView3<f64>) -> Result<Vec<f64>> {
        let expected = (cache.batch, self.horizon, self.channels);
        if grad_out.dim() != expected {
            return Err(Error::ShapeMismatch {
                left: grad_out.shape().to_vec(),
                right: vec![expected.0, expected.1, expected.2],
            });
        }
        let g = grad_out
            .permuted_axes([1, 0, 2])
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((self.horizon, cache.batch * self.channels))
            .expect("standard layout");
        let d_wt = g.dot(&cache.trend.t());
        let d_ws = g.dot(&cache.seasonal.t());
        let d_b = g.sum_axis(Axis(1));
        let mut grads = vec![0.0; self.params.len()];
        let o = self.offsets();
        let hw = self.horizon * self.lookback;
        // `dot` may hand back column-major results; copy in logical order
        let fill =
            |dst: &mut [f64], src: &mut dyn Iterator<Item = &f64>| dst.iter_mut().zip(src).for_each(|(a, b)| *a = *b);
        fill(&mut grads[o[0]..o[1]], &mut d_wt.iter());
        fill(&mut grads[o[1]..o[2]], &mut d_b.iter());
        fill(&mut grads[o[2]..o[3]], &mut d_ws.iter());
        fill(&mut grads[o[3]..o[3] + self.horizon], &mut d_b.iter());
        debug_assert_eq!(o[3] + self.horizon, 2 * hw + 2 * self.horizon);
        Ok(grads)
    }

    /// Sets `W_trend = I` (needs `w = H`), zero elsewhere.
    pub fn identity(size: usize, channels: usize) -> Result<Self> {
        let mut m = Self::zeros(size, size, channels, DecompositionSpec { kernel_size: 1 })?;
        for i in 0..size {
            m.params[i * size + i] = 1.0;
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecaster::decompose;
    use rand_distr::StandardNormal;

    fn random_model(w: usize, h: usize, d: usize, k: usize, seed: u64) -> LinearForecaster {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = (0..LinearForecaster::param_count(w, h))
            .map(|_| rng.sample(StandardNormal))
            .collect();
        LinearForecaster::from_params(w, h, d, DecompositionSpec { kernel_size: k }, p).unwrap()
    }

    fn random_input(shape: (usize, usize, usize), seed: u64) -> Array3<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array3::from_shape_simple_fn(shape, || rng.sample(StandardNormal))
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = LinearForecaster::zeros(8, 4, 3, DecompositionSpec::default()).unwrap();
        let y = m.forward_batch(random_input((2, 8, 3), 0).view()).unwrap();
        assert_eq!(y.dim(), (2, 4, 3));
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_model_copies_input() {
        let m = LinearForecaster::identity(6, 2).unwrap();
        let x = random_input((1, 6, 2), 1);
        let y = m.forward(x.index_axis(Axis(0), 0)).unwrap();
        assert_eq!(y, x.index_axis(Axis(0), 0));
    }

    #[test]
    fn forward_matches_loop_oracle() {
        let (w, h, d, k) = (12, 5, 3, 5);
        let m = random_model(w, h, d, k, 2);
        let x = random_input((3, w, d), 3);
        let y = m.forward_batch(x.view()).unwrap();
        for b in 0..3 {
            let (trend, seas) = decompose(x.index_axis(Axis(0), b), &m.decomposition()).unwrap();
            for c in 0..d {
                for t in 0..h {
                    let mut acc = m.bias_trend()[t] + m.bias_seasonal()[t];
                    for j in 0..w {
                        acc += m.weights_trend()[[t, j]] * trend[[j, c]] + m.weights_seasonal()[[t, j]] * seas[[j, c]];
                    }
                    assert!((acc - y[[b, t, c]]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn forward_is_linear_in_parameters() {
        let (w, h, d) = (10, 4, 2);
        let a = random_model(w, h, d, 3, 4);
        let b = random_model(w, h, d, 3, 5);
        let (alpha, beta) = (0.7, -1.3);
        let mixed: Vec<f64> = a
            .params()
            .iter()
            .zip(b.params())
            .map(|(p, q)| alpha * p + beta * q)
            .collect();
        let m = LinearForecaster::from_params(w, h, d, a.decomposition(), mixed).unwrap();
        let x = random_input((4, w, d), 6);
        let lhs = m.forward_batch(x.view()).unwrap();
        let rhs = a.forward_batch(x.view()).unwrap() * alpha + b.forward_batch(x.view()).unwrap() * beta;
        for (l, r) in lhs.iter().zip(rhs.iter()) {
            assert!((l - r).abs() < 1e-10);
        }
    }

    #[test]
    fn backward_hand_case_and_zero() {
        // w = H = d = 1, kernel 1: trend = x, seasonal = 0
        let m = LinearForecaster::from_params(
            1,
            1,
            1,
            DecompositionSpec { kernel_size: 1 },
            vec![0.3, 0.1, -0.2, 0.05],
        )
        .unwrap();
        let x = Array3::from_elem((1, 1, 1), 2.0);
        let g = Array3::from_elem((1, 1, 1), 1.5);
        assert_eq!(m.backward(x.view(), g.view()).unwrap(), vec![3.0, 1.5, 0.0, 1.5]);
        let zero = Array3::zeros((1, 1, 1));
        assert!(m.backward(x.view(), zero.view()).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        // wide batches make `dot` return column-major products
        for (b, w, h, d) in [(3, 9, 4, 2), (16, 32, 8, 1), (5, 24, 24, 1)] {
            backward_fd_case(b, w, h, d);
        }
    }

    fn backward_fd_case(b: usize, w: usize, h: usize, d: usize) {
        let m = random_model(w, h, d, 3, 7);
        let x = random_input((b, w, d), 8);
        let upstream = random_input((b, h, d), 9);
        // L = <upstream, forward(x)>
        let loss = |m: &LinearForecaster| (&m.forward_batch(x.view()).unwrap() * &upstream).sum();
        let grads = m.backward(x.view(), upstream.view()).unwrap();
        // the loss is linear in the parameters, so a large step has no
        // truncation error and keeps roundoff small
        let step = 1e-3;
        for i in 0..grads.len() {
            let mut up = m.clone();
            up.params_mut()[i] += step;
            let mut dn = m.clone();
            dn.params_mut()[i] -= step;
            let fd = (loss(&up) - loss(&dn)) / (2.0 * step);
            let rel = (fd - grads[i]).abs() / fd.abs().max(grads[i].abs()).max(1e-8);
            assert!(
                rel < 1e-6,
                "{:?} param {i}: fd {fd} analytic {}",
                (b, w, h, d),
                grads[i]
            );
        }
    }

    #[test]
    fn init_is_seeded() {
        let spec = DecompositionSpec::default();
        let a = LinearForecaster::new(16, 4, 1, spec, 3).unwrap();
        assert_eq!(a, LinearForecaster::new(16, 4, 1, spec, 3).unwrap());
        assert_ne!(a, LinearForecaster::new(16, 4, 1, spec, 4).unwrap());
        assert!(a.weights_trend().iter().all(|&v| v == 1.0 / 16.0));
        assert!(a.bias_trend().iter().all(|v| v.abs() <= 0.25));
    }

    #[test]
    fn shape_errors() {
        let m = LinearForecaster::zeros(8, 4, 2, DecompositionSpec::default()).unwrap();
        assert!(m.forward_batch(Array3::zeros((1, 7, 2)).view()).is_err());
        assert!(m.forward_batch(Array3::zeros((1, 8, 3)).view()).is_err());
        let x = Array3::zeros((2, 8, 2));
        assert!(m.backward(x.view(), Array3::zeros((2, 3, 2)).view()).is_err());
        assert!(m.clone().set_params(vec![0.0; 3]).is_err());
    }
}
