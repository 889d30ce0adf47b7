//! Accuracy metrics and the two pairwise fairness losses.
//!
//! Regional static fairness compares regional MAPEs pairwise; sensor dynamic
//! fairness compares accumulated sensor states pairwise. Both losses are the
//! plain mean over unordered pairs.

use serde::{Deserialize, Serialize};

use crate::domain::compensated_sum;
use crate::error::{FairError, Result};

pub const DEFAULT_MASK_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub mae: f64,
    pub rmse: f64,
    /// Fraction, not percent.
    pub mape: f64,
    /// Entries excluded from MAPE because `|truth| < mask_epsilon`.
    pub masked_count: usize,
}

impl AccuracySummary {
    pub fn compute(pred: &[f64], truth: &[f64], mask_epsilon: f64) -> Result<Self> {
        let (mape, masked_count) = mape(pred, truth, mask_epsilon)?;
        Ok(Self {
            mae: mae(pred, truth)?,
            rmse: rmse(pred, truth)?,
            mape,
            masked_count,
        })
    }
}

/// Scalar parts of the training objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub l_acc: f64,
    pub l_rsf: f64,
    pub l_sdf: f64,
    pub l_dis: f64,
    /// `l_acc + λ1·l_rsf + λ2·l_sdf`; the discriminator loss is tracked
    /// separately.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub overall: AccuracySummary,
    /// Indexed by region id.
    pub per_region: Vec<AccuracySummary>,
    /// Indexed by sensor id.
    pub per_sensor: Vec<AccuracySummary>,
    pub rsf_loss: f64,
    pub sdf_loss: f64,
    pub loss_components: LossComponents,
}

fn check_pair(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.is_empty() {
        return Err(FairError::invalid("empty metric input"));
    }
    if pred.len() != truth.len() {
        return Err(FairError::invalid(format!(
            "prediction length {} != truth length {}",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let s = compensated_sum(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()));
    Ok(s / pred.len() as f64)
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    let s = compensated_sum(pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)));
    Ok((s / pred.len() as f64).sqrt())
}

/// Masked MAPE. Entries with `|truth| < mask_epsilon` are skipped; if every
/// entry is skipped the result is `0.0`.
pub fn mape(pred: &[f64], truth: &[f64], mask_epsilon: f64) -> Result<(f64, usize)> {
    check_pair(pred, truth)?;
    if mask_epsilon.is_nan() || mask_epsilon <= 0.0 {
        return Err(FairError::invalid("mask_epsilon must be positive"));
    }
    let mut kept = 0usize;
    let s = compensated_sum(pred.iter().zip(truth).filter(|(_, t)| t.abs() >= mask_epsilon).map(|(p, t)| {
        kept += 1;
        (p - t).abs() / t.abs()
    }));
    let masked = pred.len() - kept;
    if kept == 0 {
        return Ok((0.0, masked));
    }
    Ok((s / kept as f64, masked))
}

pub fn rsf_pair(mape_p: f64, mape_q: f64) -> f64 {
    (mape_p - mape_q).abs()
}

pub fn sdf_pair(d_i: f64, d_j: f64) -> f64 {
    (d_i - d_j).abs()
}

/// Mean of `|x_i − x_j|` over unordered pairs, by explicit enumeration.
pub fn mean_pairwise_abs_diff(xs: &[f64]) -> f64 {
    let n = xs.len();
    let mut acc = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            acc.push((xs[i] - xs[j]).abs());
        }
    }
    compensated_sum(acc) * 2.0 / (n * (n - 1)) as f64
}

/// Same quantity in `O(n log n)`: after sorting ascending,
/// `Σ_{i<j} |x_i − x_j| = Σ_k x_k (2k − n + 1)`.
pub fn mean_pairwise_abs_diff_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let s = compensated_sum(
        sorted
            .iter()
            .enumerate()
            .map(|(k, x)| x * (2.0 * k as f64 - n as f64 + 1.0)),
    );
    s * 2.0 / (n * (n - 1)) as f64
}

/// Subgradient of [`mean_pairwise_abs_diff`] with respect to each input,
/// using `sign(0) = 0`.
pub fn mean_pairwise_abs_diff_grad(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let scale = 2.0 / (n * (n - 1)) as f64;
    xs.iter()
        .map(|&xi| scale * xs.iter().map(|&xj| sign0(xi - xj)).sum::<f64>())
        .collect()
}

/// `signum` with `sign(0) = 0`.
pub fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Regional static fairness loss over per-region MAPEs.
pub fn rsf_loss(region_mapes: &[f64]) -> Result<f64> {
    if region_mapes.len() < 2 {
        return Err(FairError::invalid("RSF loss needs at least two regions"));
    }
    Ok(mean_pairwise_abs_diff(region_mapes))
}

/// Sensor dynamic fairness loss over accumulated states, pairwise form.
pub fn sdf_loss(accumulated: &[f64]) -> Result<f64> {
    if accumulated.len() < 2 {
        return Err(FairError::invalid("SDF loss needs at least two sensors"));
    }
    Ok(mean_pairwise_abs_diff(accumulated))
}

/// Sort-based evaluation path of [`sdf_loss`].
pub fn sdf_loss_fast(accumulated: &[f64]) -> Result<f64> {
    if accumulated.len() < 2 {
        return Err(FairError::invalid("SDF loss needs at least two sensors"));
    }
    Ok(mean_pairwise_abs_diff_sorted(accumulated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn mape_single_entry() {
        let (m, masked) = mape(&[1.1], &[1.0], 1e-3).unwrap();
        assert_relative_eq!(m, 0.1, epsilon = 1e-12);
        assert_eq!(masked, 0);
        assert_eq!(mape(&[3.0, 4.0], &[3.0, 4.0], 1e-3).unwrap(), (0.0, 0));
    }

    #[test]
    fn mape_masks_zero_truth() {
        let (m, masked) = mape(&[1.0, 5.0], &[0.0, 4.0], 1e-3).unwrap();
        assert_eq!(masked, 1);
        assert_relative_eq!(m, 0.25);
        assert_eq!(mape(&[1.0], &[0.0], 1e-3).unwrap(), (0.0, 1));
    }

    #[test]
    fn empty_and_ragged_inputs_rejected() {
        assert!(mape(&[], &[], 1e-3).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn pair_metrics() {
        assert_eq!(rsf_pair(0.1, 0.1), 0.0);
        assert_relative_eq!(rsf_pair(0.2, 0.05), 0.15, epsilon = 1e-15);
        assert_eq!(sdf_pair(1.5, 1.5), 0.0);
        assert_eq!(sdf_pair(1.5, -0.5), 2.0);
    }

    #[test]
    fn small_losses_by_hand() {
        assert_relative_eq!(rsf_loss(&[0.1, 0.2, 0.4]).unwrap(), 0.2, epsilon = 1e-15);
        assert_relative_eq!(sdf_loss(&[0.0, 1.0, 2.0]).unwrap(), 4.0 / 3.0, epsilon = 1e-15);
        assert_eq!(rsf_loss(&[0.3; 4]).unwrap(), 0.0);
        assert_eq!(sdf_loss(&[1.0; 5]).unwrap(), 0.0);
        assert!(rsf_loss(&[0.1]).is_err());
        assert!(sdf_loss(&[0.1]).is_err());
    }

    #[test]
    fn grad_of_pair_mean_uses_zero_subgradient_at_ties() {
        let g = mean_pairwise_abs_diff_grad(&[1.0, 1.0, 3.0]);
        assert_eq!(g, vec![-1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0]);
    }

    proptest! {
        #[test]
        fn pairs_symmetric(a in -1e3..1e3f64, b in -1e3..1e3f64) {
            prop_assert_eq!(rsf_pair(a.abs(), b.abs()), rsf_pair(b.abs(), a.abs()));
            prop_assert_eq!(sdf_pair(a, b), sdf_pair(b, a));
        }

        #[test]
        fn sdf_translation_invariant(xs in prop::collection::vec(-10.0..10.0f64, 2..40), c in -5.0..5.0f64) {
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let a = sdf_loss(&xs).unwrap();
            let b = sdf_loss(&shifted).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn sorted_path_matches_pairs(xs in prop::collection::vec(-100.0..100.0f64, 2..60)) {
            let a = sdf_loss(&xs).unwrap();
            let b = sdf_loss_fast(&xs).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a + 1e-12);
        }

        #[test]
        fn rsf_relabel_invariant_and_lipschitz(
            mut xs in prop::collection::vec(0.0..2.0f64, 2..8),
            delta in 0.0..0.5f64,
        ) {
            let base = rsf_loss(&xs).unwrap();
            let mut rev = xs.clone();
            rev.reverse();
            prop_assert!((rsf_loss(&rev).unwrap() - base).abs() <= 1e-12);
            let m = xs.len() as f64;
            xs[0] += delta;
            let moved = rsf_loss(&xs).unwrap();
            prop_assert!((moved - base).abs() <= 2.0 * delta / m + 1e-12);
        }
    }
}
