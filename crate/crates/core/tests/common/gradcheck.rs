//! Finite-difference oracles for the predictor, composite loss and
//! discriminator gradients.

use fairtp::domain::{RoadNetwork, SensorId};
use fairtp::predictor::loss::{composite_loss, BatchTargets, LossConfig, LossEval, SdfTerm};
use fairtp::predictor::{PredictorOutput, ReferencePredictor, StPredictor};
use fairtp::statekit::{Discriminator, SensorState};
use ndarray::Array2;
use rand::Rng;

use super::*;

pub struct Instance {
    pub network: RoadNetwork,
    pub sampled: Vec<SensorId>,
    pub windows: Vec<Array2<f64>>,
    pub truth: Vec<Array2<f64>>,
    pub region_truth: Vec<Array2<f64>>,
    pub model: ReferencePredictor,
    pub disc: Discriminator,
    pub prior: Vec<f64>,
}

pub fn instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let (t_in, t_out, hidden) = (6, 4, 5);
    let sizes: Vec<usize> = (0..r.random_range(2..=4)).map(|_| r.random_range(2..=5)).collect();
    let network = RoadNetwork::from_region_sizes(&sizes).unwrap();
    let n = network.sensor_count();
    let m = network.region_count();
    // at least one sampled member per region
    let mut sampled: Vec<SensorId> = (0..m).map(|reg| network.members(reg)[0]).collect();
    for v in 0..n {
        if !sampled.contains(&v) && r.random_bool(0.5) {
            sampled.push(v);
        }
    }
    sampled.sort_unstable();
    let k = sampled.len();
    let windows_n = 3;
    let windows: Vec<Array2<f64>> = (0..windows_n).map(|_| uniform(&mut r, t_in, k, 40.0, 120.0)).collect();
    let truth: Vec<Array2<f64>> = (0..windows_n).map(|_| uniform(&mut r, t_out, k, 40.0, 120.0)).collect();
    let region_truth: Vec<Array2<f64>> = (0..windows_n).map(|_| uniform(&mut r, t_out, m, 40.0, 120.0)).collect();
    let model = model(&mut r, t_in, t_out, hidden, k);
    let mut disc = Discriminator::new(hidden, 0.5, 1e-7).unwrap();
    disc.weights = (0..hidden).map(|_| r.random_range(-2.0..2.0)).collect();
    disc.bias = r.random_range(-0.5..0.5);
    let prior: Vec<f64> = (0..k).map(|_| r.random_range(-1.0..1.0)).collect();
    Instance {
        network,
        sampled,
        windows,
        truth,
        region_truth,
        model,
        disc,
        prior,
    }
}

impl Instance {
    pub fn loss_at(&self, params: &[f64], cfg: &LossConfig) -> f64 {
        let mut model = self.model.clone();
        model.set_parameters(params).unwrap();
        let outputs = forward_all(&model, &self.windows);
        self.eval(&outputs, cfg).components.total
    }

    pub fn eval(&self, outputs: &[PredictorOutput], cfg: &LossConfig) -> LossEval {
        let targets = BatchTargets {
            sensor_truth: &self.truth,
            region_truth: &self.region_truth,
        };
        let term = SdfTerm {
            discriminator: &self.disc,
            prior: &self.prior,
            fixed_states: None,
        };
        composite_loss(outputs, targets, &self.network, &self.sampled, Some(term), cfg).unwrap()
    }

    pub fn analytic(&self, cfg: &LossConfig) -> Vec<f64> {
        let outputs = forward_all(&self.model, &self.windows);
        let eval = self.eval(&outputs, cfg);
        let last = self.windows.len() - 1;
        let mut total = vec![0.0; self.model.parameter_count()];
        for (w, window) in self.windows.iter().enumerate() {
            let gh = if w == last {
                eval.grad_hidden_last.clone()
            } else {
                Array2::zeros(eval.grad_hidden_last.dim())
            };
            let g = self
                .model
                .backward(window.view(), eval.grad_predictions[w].view(), gh.view())
                .unwrap();
            total.iter_mut().zip(&g).for_each(|(t, x)| *t += x);
        }
        total
    }

    /// Smallest distance to a kink of any `|·|` in the objective.
    pub fn kink_margin(&self, cfg: &LossConfig) -> f64 {
        let outputs = forward_all(&self.model, &self.windows);
        let mut margin = f64::INFINITY;
        for (out, t) in outputs.iter().zip(&self.truth) {
            for (p, y) in out.predictions.iter().zip(t) {
                margin = margin.min((p - y).abs());
            }
        }
        if cfg.include_sdf {
            let last = outputs.last().unwrap();
            let acc: Vec<f64> = last
                .hidden
                .rows()
                .into_iter()
                .zip(&self.prior)
                .map(|(h, p)| p + self.disc.state(&h.to_vec()).unwrap() - 0.5)
                .collect();
            for i in 0..acc.len() {
                for j in i + 1..acc.len() {
                    margin = margin.min((acc[i] - acc[j]).abs());
                }
            }
        }
        margin
    }
}

/// Denominator floor for predictor checks: central differences of a loss of
/// magnitude ~50 at h = 1e-5 carry ~1e-9 of roundoff, so exact zeros are
/// compared on an absolute scale.
pub const GRAD_FLOOR: f64 = 1e-4;

pub fn acc_only() -> LossConfig {
    LossConfig {
        lambda1: 0.0,
        lambda2: 0.0,
        include_rsf: false,
        include_sdf: false,
        mask_epsilon: 1e-3,
    }
}

pub fn composite() -> LossConfig {
    LossConfig {
        lambda1: 0.01,
        lambda2: 0.1,
        include_rsf: true,
        include_sdf: true,
        mask_epsilon: 1e-3,
    }
}

/// Max relative error of the `L_acc`-only gradient on instance `seed`.
pub fn accuracy_error(seed: u64) -> f64 {
    let cfg = acc_only();
    let inst = instance(seed);
    let analytic = inst.analytic(&cfg);
    let numeric = numeric_grad(&inst.model.parameters(), 1e-5, |p| inst.loss_at(p, &cfg));
    max_rel_err(&analytic, &numeric, GRAD_FLOOR)
}

/// Max relative error of the full composite gradient for the first `count`
/// instances from `first_seed` on that sit at least 1e-3 from every kink.
pub fn composite_errors(first_seed: u64, count: usize) -> Vec<(u64, f64)> {
    let cfg = composite();
    let mut out = Vec::with_capacity(count);
    for seed in first_seed.. {
        let inst = instance(seed);
        if inst.kink_margin(&cfg) < 1e-3 {
            continue;
        }
        let analytic = inst.analytic(&cfg);
        let numeric = numeric_grad(&inst.model.parameters(), 1e-5, |p| inst.loss_at(p, &cfg));
        out.push((seed, max_rel_err(&analytic, &numeric, GRAD_FLOOR)));
        if out.len() == count {
            break;
        }
    }
    out
}

/// Max relative error of the discriminator gradient on a random batch.
pub fn discriminator_error(seed: u64) -> f64 {
    let mut r = rng(1000 + seed);
    let dim = 6;
    let hidden: Vec<Vec<f64>> = (0..20)
        .map(|_| (0..dim).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    let labels: Vec<SensorState> = (0..20)
        .map(|_| if r.random_bool(0.5) { SensorState::Benefit } else { SensorState::Sacrifice })
        .collect();
    let batch: Vec<(&[f64], SensorState)> = hidden.iter().map(|h| h.as_slice()).zip(labels).collect();
    let mut disc = Discriminator::new(dim, 0.5, 1e-7).unwrap();
    disc.weights = (0..dim).map(|_| r.random_range(-1.5..1.5)).collect();
    disc.bias = r.random_range(-0.5..0.5);

    let (gw, gb) = disc.gradient(&batch).unwrap();
    let mut analytic = gw;
    analytic.push(gb);
    let mut x = disc.weights.clone();
    x.push(disc.bias);
    let numeric = numeric_grad(&x, 1e-5, |p| {
        let mut d = disc.clone();
        d.weights = p[..dim].to_vec();
        d.bias = p[dim];
        d.mean_loss(&batch).unwrap()
    });
    max_rel_err(&analytic, &numeric, 1e-6)
}
