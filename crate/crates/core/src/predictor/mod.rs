//! The spatio-temporal predictor contract and the built-in reference model.
//!
//! Any model that maps a lookback window of sampled-sensor observations to
//! horizon predictions plus one hidden vector per sensor can be trained by
//! the harness, provided it can back-propagate gradients arriving on both
//! outputs.

pub mod loss;

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FairError, Result};

pub use loss::{composite_loss, weighted_total, BatchTargets, LossConfig, LossEval, SdfTerm};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Predictions `[horizon step][sensor]` and hidden vectors
/// `[sensor][hidden_dim]` for the sensors in the input window, in input
/// column order.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorOutput {
    pub predictions: Array2<f64>,
    pub hidden: Array2<f64>,
}

pub trait StPredictor {
    fn t_in(&self) -> usize;
    fn t_out(&self) -> usize;
    fn hidden_dim(&self) -> usize;
    fn parameter_count(&self) -> usize;

    /// `window` is `[T_in][sensor]` in dataset units.
    fn forward(&self, window: ArrayView2<'_, f64>) -> Result<PredictorOutput>;

    /// Flat parameter gradient given upstream gradients on the predictions
    /// (`[T_out][sensor]`) and on the hidden vectors (`[sensor][hidden_dim]`).
    fn backward(
        &self,
        window: ArrayView2<'_, f64>,
        grad_predictions: ArrayView2<'_, f64>,
        grad_hidden: ArrayView2<'_, f64>,
    ) -> Result<Vec<f64>>;

    fn parameters(&self) -> Vec<f64>;
    fn set_parameters(&mut self, params: &[f64]) -> Result<()>;

    /// Plain gradient descent step.
    fn apply_gradients(&mut self, grads: &[f64], learning_rate: f64) -> Result<()> {
        if grads.len() != self.parameter_count() {
            return Err(FairError::invalid(format!(
                "gradient has {} entries, model has {} parameters",
                grads.len(),
                self.parameter_count()
            )));
        }
        let mut params = self.parameters();
        for (p, g) in params.iter_mut().zip(grads) {
            *p -= learning_rate * g;
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(FairError::invalid("parameter update produced non-finite values"));
        }
        self.set_parameters(&params)
    }
}

/// Affine input/output normalisation fixed before training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: f64,
    pub scale: f64,
}

impl Default for Scaler {
    fn default() -> Self {
        Self { mean: 0.0, scale: 1.0 }
    }
}

impl Scaler {
    /// Mean and standard deviation of `values`; a degenerate spread falls back
    /// to unit scale.
    pub fn fit(values: ArrayView2<'_, f64>) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.sum() / n;
        let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        Self {
            mean,
            scale: if std > 1e-12 { std } else { 1.0 },
        }
    }
}

/// Per-sensor shared-weight network:
/// `h = tanh(W_in·x̃ + b_in)`, `ỹ = W_out·h + b_out`, with
/// `x̃ = (x − μ)/σ` and `y = σ·ỹ + μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePredictor {
    pub w_in: Array2<f64>,
    pub b_in: Array1<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
    pub scaler: Scaler,
}

impl ReferencePredictor {
    pub fn zeros(t_in: usize, t_out: usize, hidden_dim: usize) -> Result<Self> {
        if t_in == 0 || t_out == 0 || hidden_dim == 0 {
            return Err(FairError::invalid("T_in, T_out and hidden_dim must be positive"));
        }
        Ok(Self {
            w_in: Array2::zeros((hidden_dim, t_in)),
            b_in: Array1::zeros(hidden_dim),
            w_out: Array2::zeros((t_out, hidden_dim)),
            b_out: Array1::zeros(t_out),
            scaler: Scaler::default(),
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(t_in: usize, t_out: usize, hidden_dim: usize, scaler: Scaler, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(t_in, t_out, hidden_dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a_in = (6.0 / (t_in + hidden_dim) as f64).sqrt();
        let a_out = (6.0 / (hidden_dim + t_out) as f64).sqrt();
        model.w_in.mapv_inplace(|_| rng.random_range(-a_in..a_in));
        model.w_out.mapv_inplace(|_| rng.random_range(-a_out..a_out));
        model.scaler = scaler;
        Ok(model)
    }

    fn check_window(&self, window: ArrayView2<'_, f64>) -> Result<()> {
        if window.nrows() != self.t_in() {
            return Err(FairError::invalid(format!(
                "window has {} steps, model expects {}",
                window.nrows(),
                self.t_in()
            )));
        }
        if window.ncols() == 0 {
            return Err(FairError::invalid("window has no sensors"));
        }
        if window.iter().any(|x| !x.is_finite()) {
            return Err(FairError::invalid("window contains non-finite values"));
        }
        Ok(())
    }

    fn normalized(&self, window: ArrayView2<'_, f64>) -> Array2<f64> {
        let Scaler { mean, scale } = self.scaler;
        window.mapv(|x| (x - mean) / scale)
    }

    /// Hidden activations `[hidden_dim][sensor]`.
    fn activations(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut z = self.w_in.dot(x);
        z += &self.b_in.view().insert_axis(Axis(1));
        z.mapv_inplace(f64::tanh);
        z
    }

    pub fn checkpoint(&self) -> PredictorCheckpoint {
        PredictorCheckpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            t_in: self.t_in(),
            t_out: self.t_out(),
            hidden_dim: self.hidden_dim(),
            scaler: self.scaler,
            parameters: self.parameters(),
        }
    }

    pub fn from_checkpoint(ckpt: &PredictorCheckpoint) -> Result<Self> {
        if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(FairError::invalid(format!(
                "unsupported checkpoint format version {}",
                ckpt.format_version
            )));
        }
        let mut model = Self::zeros(ckpt.t_in, ckpt.t_out, ckpt.hidden_dim)?;
        model.scaler = ckpt.scaler;
        model.set_parameters(&ckpt.parameters)?;
        Ok(model)
    }
}

impl StPredictor for ReferencePredictor {
    fn t_in(&self) -> usize {
        self.w_in.ncols()
    }

    fn t_out(&self) -> usize {
        self.w_out.nrows()
    }

    fn hidden_dim(&self) -> usize {
        self.w_in.nrows()
    }

    fn parameter_count(&self) -> usize {
        self.w_in.len() + self.b_in.len() + self.w_out.len() + self.b_out.len()
    }

    fn forward(&self, window: ArrayView2<'_, f64>) -> Result<PredictorOutput> {
        self.check_window(window)?;
        let h = self.activations(&self.normalized(window));
        let mut y = self.w_out.dot(&h);
        y += &self.b_out.view().insert_axis(Axis(1));
        let Scaler { mean, scale } = self.scaler;
        y.mapv_inplace(|v| v * scale + mean);
        Ok(PredictorOutput {
            predictions: y,
            hidden: h.reversed_axes(),
        })
    }

    fn backward(
        &self,
        window: ArrayView2<'_, f64>,
        grad_predictions: ArrayView2<'_, f64>,
        grad_hidden: ArrayView2<'_, f64>,
    ) -> Result<Vec<f64>> {
        self.check_window(window)?;
        let n = window.ncols();
        if grad_predictions.dim() != (self.t_out(), n) || grad_hidden.dim() != (n, self.hidden_dim()) {
            return Err(FairError::invalid("upstream gradient shape does not match the window"));
        }
        let x = self.normalized(window);
        let h = self.activations(&x);
        let gy = grad_predictions.mapv(|g| g * self.scaler.scale);

        let g_w_out = gy.dot(&h.t());
        let g_b_out = gy.sum_axis(Axis(1));
        let mut gz = self.w_out.t().dot(&gy) + grad_hidden.t();
        gz.zip_mut_with(&h, |g, &a| *g *= 1.0 - a * a);
        let g_w_in = gz.dot(&x.t());
        let g_b_in = gz.sum_axis(Axis(1));

        let mut flat = Vec::with_capacity(self.parameter_count());
        flat.extend(g_w_in.iter());
        flat.extend(g_b_in.iter());
        flat.extend(g_w_out.iter());
        flat.extend(g_b_out.iter());
        Ok(flat)
    }

    fn parameters(&self) -> Vec<f64> {
        self.w_in
            .iter()
            .chain(self.b_in.iter())
            .chain(self.w_out.iter())
            .chain(self.b_out.iter())
            .copied()
            .collect()
    }

    fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(FairError::invalid(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(FairError::invalid("non-finite parameter"));
        }
        let mut it = params.iter().copied();
        for dst in self
            .w_in
            .iter_mut()
            .chain(self.b_in.iter_mut())
            .chain(self.w_out.iter_mut())
            .chain(self.b_out.iter_mut())
        {
            *dst = it.next().expect("length checked");
        }
        Ok(())
    }
}

/// Serialized predictor: geometry header plus flat parameters in
/// `W_in, b_in, W_out, b_out` row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorCheckpoint {
    pub format_version: u32,
    pub t_in: usize,
    pub t_out: usize,
    pub hidden_dim: usize,
    pub scaler: Scaler,
    pub parameters: Vec<f64>,
}

impl PredictorCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| FairError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FairError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Rescale `grads` in place so its L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    /// Forward pass written out with explicit loops.
    fn loop_forward(m: &ReferencePredictor, window: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let (t_in, n) = window.dim();
        let (hd, t_out) = (m.hidden_dim(), m.t_out());
        let mut preds = Array2::zeros((t_out, n));
        let mut hidden = Array2::zeros((n, hd));
        for s in 0..n {
            for j in 0..hd {
                let mut z = m.b_in[j];
                for t in 0..t_in {
                    z += m.w_in[[j, t]] * (window[[t, s]] - m.scaler.mean) / m.scaler.scale;
                }
                hidden[[s, j]] = z.tanh();
            }
            for k in 0..t_out {
                let mut y = m.b_out[k];
                for j in 0..hd {
                    y += m.w_out[[k, j]] * hidden[[s, j]];
                }
                preds[[k, s]] = y * m.scaler.scale + m.scaler.mean;
            }
        }
        (preds, hidden)
    }

    #[test]
    fn zero_model_outputs_zero() {
        let m = ReferencePredictor::zeros(3, 2, 4).unwrap();
        let out = m.forward(array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]].view()).unwrap();
        assert!(out.predictions.iter().all(|&v| v == 0.0));
        assert!(out.hidden.iter().all(|&v| v == 0.0));
        assert_eq!(out.hidden.dim(), (2, 4));
    }

    #[test]
    fn identity_like_configuration_gives_tanh() {
        let mut m = ReferencePredictor::zeros(1, 1, 1).unwrap();
        m.w_in[[0, 0]] = 1.0;
        m.w_out[[0, 0]] = 1.0;
        let out = m.forward(array![[0.7, -1.3]].view()).unwrap();
        assert_eq!(out.predictions[[0, 0]], 0.7_f64.tanh());
        assert_eq!(out.predictions[[0, 1]], (-1.3_f64).tanh());
    }

    #[test]
    fn matches_loop_oracle() {
        let scaler = Scaler { mean: 3.0, scale: 2.5 };
        let m = ReferencePredictor::init(4, 3, 5, scaler, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let window = Array2::from_shape_fn((4, 6), |_| rng.random_range(-5.0..10.0));
        let out = m.forward(window.view()).unwrap();
        let (p, h) = loop_forward(&m, &window);
        for (a, b) in out.predictions.iter().zip(p.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in out.hidden.iter().zip(h.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let m = ReferencePredictor::zeros(3, 2, 4).unwrap();
        assert!(m.forward(Array2::zeros((2, 2)).view()).is_err());
        assert!(m
            .backward(Array2::zeros((3, 2)).view(), Array2::zeros((2, 3)).view(), Array2::zeros((2, 4)).view())
            .is_err());
        let mut m = m;
        assert!(m.set_parameters(&[0.0; 3]).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = ReferencePredictor::init(4, 3, 5, Scaler { mean: 1.0, scale: 2.0 }, 5).unwrap();
        let json = serde_json::to_string(&m.checkpoint()).unwrap();
        let back: PredictorCheckpoint = serde_json::from_str(&json).unwrap();
        assert_eq!(ReferencePredictor::from_checkpoint(&back).unwrap(), m);
        let mut bad = back;
        bad.format_version = 99;
        assert!(ReferencePredictor::from_checkpoint(&bad).is_err());
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 5.0), 5.0);
        assert_eq!(g, vec![3.0, 4.0]);
        clip_grad_norm(&mut g, 1.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn permutation_equivariant(seed in 0u64..500, shift in 1usize..5) {
            let m = ReferencePredictor::init(3, 2, 4, Scaler::default(), seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let window = Array2::from_shape_fn((3, 5), |_| rng.random_range(-2.0..2.0));
            let perm: Vec<usize> = (0..5).map(|i| (i + shift) % 5).collect();
            let permuted = window.select(Axis(1), &perm);
            let a = m.forward(window.view()).unwrap();
            let b = m.forward(permuted.view()).unwrap();
            prop_assert_eq!(a.predictions.select(Axis(1), &perm), b.predictions);
            prop_assert_eq!(a.hidden.select(Axis(0), &perm), b.hidden);
        }
    }
}
