//! Analytic gradients against central finite differences.

mod common;

use common::gradcheck::*;
use common::forward_all;
use fairtp::metrics::mean_pairwise_abs_diff;
use fairtp::predictor::loss::LossConfig;

#[test]
fn accuracy_loss_gradient_matches_finite_differences() {
    for seed in 0..10 {
        let err = accuracy_error(seed);
        assert!(err < 1e-4, "seed {seed}: max relative error {err:e}");
    }
}

#[test]
fn composite_gradient_matches_finite_differences_away_from_kinks() {
    let errors = composite_errors(100, 10);
    assert_eq!(errors.len(), 10);
    for (seed, err) in errors {
        assert!(err < 1e-3, "seed {seed}: max relative error {err:e}");
    }
}

#[test]
fn discriminator_gradient_matches_finite_differences() {
    for seed in 0..10 {
        let err = discriminator_error(seed);
        assert!(err < 1e-6, "seed {seed}: max relative error {err:e}");
    }
}

#[test]
fn sdf_term_moves_the_hidden_gradient() {
    let inst = instance(7);
    let outputs = forward_all(&inst.model, &inst.windows);
    let with = inst.eval(&outputs, &composite());
    let without = inst.eval(&outputs, &LossConfig { include_sdf: false, ..composite() });
    assert!(with.grad_hidden_last.iter().any(|g| *g != 0.0));
    assert!(without.grad_hidden_last.iter().all(|g| *g == 0.0));
    // the reported term is the mean pairwise gap of the accumulated states
    let last = outputs.last().unwrap();
    let acc: Vec<f64> = last
        .hidden
        .rows()
        .into_iter()
        .zip(&inst.prior)
        .map(|(h, p)| p + inst.disc.state(&h.to_vec()).unwrap() - 0.5)
        .collect();
    assert!((with.components.l_sdf - mean_pairwise_abs_diff(&acc)).abs() < 1e-12);
}
