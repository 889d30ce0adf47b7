#![allow(dead_code)]

pub mod gradcheck;

use fairtp::domain::{RoadNetwork, SensorId};
use fairtp::predictor::{PredictorOutput, ReferencePredictor, Scaler, StPredictor};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `rows x cols` uniform values in `[lo, hi)`.
pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(lo..hi))
}

pub fn model(rng: &mut ChaCha8Rng, t_in: usize, t_out: usize, hidden: usize, n: usize) -> ReferencePredictor {
    let fit = uniform(rng, 64, n, 40.0, 120.0);
    let scaler = Scaler::fit(fit.view());
    ReferencePredictor::init(t_in, t_out, hidden, scaler, rng.random()).unwrap()
}

pub fn forward_all(model: &ReferencePredictor, windows: &[Array2<f64>]) -> Vec<PredictorOutput> {
    windows.iter().map(|w| model.forward(w.view()).unwrap()).collect()
}

pub fn all_sensors(network: &RoadNetwork) -> Vec<SensorId> {
    (0..network.sensor_count()).collect()
}

/// Elementwise `|a − b| / max(|a|, |b|, floor)`, maximised.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Central differences of `f` at `x`.
pub fn numeric_grad(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}
