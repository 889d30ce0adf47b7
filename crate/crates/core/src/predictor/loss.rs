//! Composite training objective `L = L_acc + λ1·L_RSF + λ2·L_SDF` and its
//! gradients with respect to the predictor outputs.
//!
//! Subgradients of `|·|` are taken as 0 at the kink. The SDF term reaches the
//! predictor only through the hidden vectors of the batch's last window:
//! hidden → frozen discriminator → state `d` → `D = prior + d − 0.5`.

use ndarray::Array2;

use crate::domain::{RoadNetwork, SensorId};
use crate::error::{FairError, Result};
use crate::metrics::{mean_pairwise_abs_diff, mean_pairwise_abs_diff_grad, sign0, LossComponents};
use crate::predictor::PredictorOutput;
use crate::statekit::Discriminator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub include_rsf: bool,
    /// True only on dynamic-window boundaries.
    pub include_sdf: bool,
    pub mask_epsilon: f64,
}

/// Ground truth for one batch. `sensor_truth[w]` is `[T_out][sampled]`,
/// `region_truth[w]` is `[T_out][region]` averaged over all sensors.
#[derive(Debug, Clone, Copy)]
pub struct BatchTargets<'a> {
    pub sensor_truth: &'a [Array2<f64>],
    pub region_truth: &'a [Array2<f64>],
}

/// Inputs of the SDF term for the batch's sampled sensors.
#[derive(Debug, Clone, Copy)]
pub struct SdfTerm<'a> {
    pub discriminator: &'a Discriminator,
    /// Accumulated centred states from earlier batches of the window, one per
    /// sampled sensor.
    pub prior: &'a [f64],
    /// Binarised labels used as states instead of discriminator outputs; no
    /// gradient flows through them.
    pub fixed_states: Option<&'a [f64]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub components: LossComponents,
    /// Per window, `[T_out][sampled]`.
    pub grad_predictions: Vec<Array2<f64>>,
    /// Gradient on the last window's hidden vectors, `[sampled][hidden_dim]`.
    pub grad_hidden_last: Array2<f64>,
}

pub fn weighted_total(l_acc: f64, l_rsf: f64, l_sdf: f64, lambda1: f64, lambda2: f64) -> f64 {
    l_acc + lambda1 * l_rsf + lambda2 * l_sdf
}

pub fn composite_loss(
    outputs: &[PredictorOutput],
    targets: BatchTargets<'_>,
    network: &RoadNetwork,
    sampled: &[SensorId],
    sdf: Option<SdfTerm<'_>>,
    cfg: &LossConfig,
) -> Result<LossEval> {
    if outputs.is_empty() {
        return Err(FairError::invalid("empty batch"));
    }
    if cfg.lambda1 < 0.0 || cfg.lambda2 < 0.0 {
        return Err(FairError::invalid("loss weights must be non-negative"));
    }
    if targets.sensor_truth.len() != outputs.len() || targets.region_truth.len() != outputs.len() {
        return Err(FairError::invalid("targets and outputs disagree on batch size"));
    }
    let n = sampled.len();
    let (t_out, _) = outputs[0].predictions.dim();
    let hidden_dim = outputs[0].hidden.ncols();
    for (out, truth) in outputs.iter().zip(targets.sensor_truth) {
        if out.predictions.dim() != (t_out, n) || truth.dim() != (t_out, n) {
            return Err(FairError::invalid("prediction and truth shapes differ from the sampled set"));
        }
    }

    let mut grads: Vec<Array2<f64>> = outputs.iter().map(|_| Array2::zeros((t_out, n))).collect();
    let mut grad_hidden = Array2::zeros((n, hidden_dim));

    // accuracy: MAE over every sampled prediction
    let count = (outputs.len() * t_out * n) as f64;
    let mut abs_sum = 0.0;
    for ((out, truth), g) in outputs.iter().zip(targets.sensor_truth).zip(grads.iter_mut()) {
        for ((p, t), g) in out.predictions.iter().zip(truth.iter()).zip(g.iter_mut()) {
            abs_sum += (p - t).abs();
            *g += sign0(p - t) / count;
        }
    }
    let l_acc = abs_sum / count;

    let l_rsf = if cfg.include_rsf && network.region_count() >= 2 {
        rsf_term(outputs, targets.region_truth, network, sampled, cfg, &mut grads)?
    } else {
        0.0
    };

    let l_sdf = match (cfg.include_sdf, sdf) {
        (false, _) => 0.0,
        (true, None) => return Err(FairError::invalid("SDF term requested without its inputs")),
        (true, Some(term)) => sdf_term(outputs.last().expect("non-empty"), term, cfg, &mut grad_hidden)?,
    };

    Ok(LossEval {
        components: LossComponents {
            l_acc,
            l_rsf,
            l_sdf,
            l_dis: 0.0,
            total: weighted_total(l_acc, l_rsf, l_sdf, cfg.lambda1, cfg.lambda2),
        },
        grad_predictions: grads,
        grad_hidden_last: grad_hidden,
    })
}

/// Regional MAPE over the whole batch, regions formed from sampled members.
fn rsf_term(
    outputs: &[PredictorOutput],
    region_truth: &[Array2<f64>],
    network: &RoadNetwork,
    sampled: &[SensorId],
    cfg: &LossConfig,
    grads: &mut [Array2<f64>],
) -> Result<f64> {
    let m = network.region_count();
    let mut columns: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (col, &v) in sampled.iter().enumerate() {
        columns[network.region_of(v)].push(col);
    }
    if let Some(empty) = columns.iter().position(Vec::is_empty) {
        return Err(FairError::EmptyRegion(empty));
    }

    // region predictions [window][T_out][region]
    let preds: Vec<Array2<f64>> = outputs
        .iter()
        .map(|out| {
            let t_out = out.predictions.nrows();
            Array2::from_shape_fn((t_out, m), |(k, r)| {
                columns[r].iter().map(|&c| out.predictions[[k, c]]).sum::<f64>() / columns[r].len() as f64
            })
        })
        .collect();

    let mut mapes = vec![0.0; m];
    let mut kept = vec![0usize; m];
    for (p, t) in preds.iter().zip(region_truth) {
        if p.dim() != t.dim() {
            return Err(FairError::invalid("region truth shape mismatch"));
        }
        for ((k, r), &y) in t.indexed_iter() {
            if y.abs() >= cfg.mask_epsilon {
                mapes[r] += (p[[k, r]] - y).abs() / y.abs();
                kept[r] += 1;
            }
        }
    }
    for (m_r, &k) in mapes.iter_mut().zip(&kept) {
        if k > 0 {
            *m_r /= k as f64;
        }
    }
    let loss = mean_pairwise_abs_diff(&mapes);
    let d_mape = mean_pairwise_abs_diff_grad(&mapes);

    for ((p, t), g) in preds.iter().zip(region_truth).zip(grads.iter_mut()) {
        for ((k, r), &y) in t.indexed_iter() {
            if y.abs() < cfg.mask_epsilon || kept[r] == 0 {
                continue;
            }
            let coeff = cfg.lambda1 * d_mape[r] * sign0(p[[k, r]] - y)
                / (y.abs() * kept[r] as f64 * columns[r].len() as f64);
            if coeff != 0.0 {
                for &c in &columns[r] {
                    g[[k, c]] += coeff;
                }
            }
        }
    }
    Ok(loss)
}

fn sdf_term(
    last: &PredictorOutput,
    term: SdfTerm<'_>,
    cfg: &LossConfig,
    grad_hidden: &mut Array2<f64>,
) -> Result<f64> {
    let n = last.hidden.nrows();
    if term.prior.len() != n {
        return Err(FairError::invalid("SDF prior must have one entry per sampled sensor"));
    }
    if n < 2 {
        return Ok(0.0);
    }
    let disc = term.discriminator;
    if let Some(fixed) = term.fixed_states {
        if fixed.len() != n {
            return Err(FairError::invalid("fixed states must have one entry per sampled sensor"));
        }
        let acc: Vec<f64> = term.prior.iter().zip(fixed).map(|(p, d)| p + d - 0.5).collect();
        return Ok(mean_pairwise_abs_diff(&acc));
    }

    let mut raw = Vec::with_capacity(n);
    for row in last.hidden.rows() {
        let h: Vec<f64> = row.to_vec();
        raw.push(disc.discriminate(&h)?);
    }
    let eps = disc.prob_epsilon;
    let acc: Vec<f64> = term
        .prior
        .iter()
        .zip(&raw)
        .map(|(p, &d)| p + d.clamp(eps, 1.0 - eps) - 0.5)
        .collect();
    let loss = mean_pairwise_abs_diff(&acc);
    let d_acc = mean_pairwise_abs_diff_grad(&acc);
    for (i, &d) in raw.iter().enumerate() {
        // the clip is flat outside [ε, 1 − ε]
        if d <= eps || d >= 1.0 - eps {
            continue;
        }
        let coeff = cfg.lambda2 * d_acc[i] * d * (1.0 - d);
        for (g, w) in grad_hidden.row_mut(i).iter_mut().zip(&disc.weights) {
            *g += coeff * w;
        }
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn single(pred: Array2<f64>, hidden_dim: usize) -> PredictorOutput {
        let n = pred.ncols();
        PredictorOutput {
            predictions: pred,
            hidden: Array2::zeros((n, hidden_dim)),
        }
    }

    #[test]
    fn weighted_sum_arithmetic() {
        let l = weighted_total(1.0, 0.5, 2.0, 0.01, 0.1);
        assert!((l - 1.205).abs() < 1e-15);
        assert_eq!(weighted_total(0.7, 3.0, 9.0, 0.0, 0.0), 0.7);
    }

    #[test]
    fn sdf_gate_and_zero_weights() {
        let net = RoadNetwork::from_region_sizes(&[1, 1]).unwrap();
        let outs = vec![single(array![[1.0, 4.0]], 2)];
        let truth = vec![array![[2.0, 2.0]]];
        let region_truth = vec![array![[2.0, 2.0]]];
        let disc = Discriminator::new(2, 0.1, 1e-7).unwrap();
        let prior = [1.0, -1.0];
        let targets = BatchTargets { sensor_truth: &truth, region_truth: &region_truth };
        let term = SdfTerm { discriminator: &disc, prior: &prior, fixed_states: None };
        let mut cfg = LossConfig { lambda1: 0.0, lambda2: 0.0, include_rsf: true, include_sdf: false, mask_epsilon: 1e-3 };
        let eval = composite_loss(&outs, targets, &net, &[0, 1], Some(term), &cfg).unwrap();
        assert_eq!(eval.components.l_sdf, 0.0);
        assert_eq!(eval.components.total, eval.components.l_acc);
        assert_eq!(eval.components.l_acc, 1.5);
        // region MAPEs 0.5 and 1.0
        assert!((eval.components.l_rsf - 0.5).abs() < 1e-15);
        cfg.include_sdf = true;
        let eval = composite_loss(&outs, targets, &net, &[0, 1], Some(term), &cfg).unwrap();
        assert_eq!(eval.components.l_sdf, 2.0);
        assert!(composite_loss(&outs, targets, &net, &[0, 1], None, &cfg).is_err());
    }

    #[test]
    fn zero_residual_has_zero_accuracy_gradient() {
        let net = RoadNetwork::from_region_sizes(&[2]).unwrap();
        let outs = vec![single(array![[3.0, 5.0], [1.0, 1.0]], 1)];
        let truth = vec![array![[3.0, 5.0], [1.0, 1.0]]];
        let region_truth = vec![array![[4.0], [1.0]]];
        let cfg = LossConfig { lambda1: 0.01, lambda2: 0.1, include_rsf: true, include_sdf: false, mask_epsilon: 1e-3 };
        let targets = BatchTargets { sensor_truth: &truth, region_truth: &region_truth };
        let eval = composite_loss(&outs, targets, &net, &[0, 1], None, &cfg).unwrap();
        assert_eq!(eval.components.total, 0.0);
        assert!(eval.grad_predictions[0].iter().all(|&g| g == 0.0));
    }

    #[test]
    fn missing_region_in_sample_is_reported() {
        let net = RoadNetwork::from_region_sizes(&[1, 1]).unwrap();
        let outs = vec![single(array![[1.0]], 1)];
        let truth = vec![array![[1.0]]];
        let region_truth = vec![array![[1.0, 1.0]]];
        let cfg = LossConfig { lambda1: 0.01, lambda2: 0.1, include_rsf: true, include_sdf: false, mask_epsilon: 1e-3 };
        let targets = BatchTargets { sensor_truth: &truth, region_truth: &region_truth };
        assert!(matches!(
            composite_loss(&outs, targets, &net, &[0], None, &cfg),
            Err(FairError::EmptyRegion(1))
        ));
    }
}
