//! Fairness-aware traffic forecasting.
//!
//! The crate bundles the pieces needed to train a spatio-temporal predictor
//! under two fairness constraints: a static one across city regions (pairwise
//! differences of regional MAPE) and a dynamic one across sensors (pairwise
//! differences of accumulated "benefit"/"sacrifice" states over a window of
//! batches). Training data is re-selected every window by a state-guided,
//! region-balanced greedy sampler.
//!
//! Module map:
//! - [`domain`]: road network, traffic series and region aggregation
//! - [`metrics`]: MAE/RMSE/MAPE and the two fairness losses
//! - [`statekit`]: threshold labelling and the logistic state discriminator
//! - [`sampler`]: stratified initialisation, state ledger and greedy selection
//! - [`predictor`]: the predictor contract, reference model and composite loss
//! - [`harness`]: reference run, fair training loop, evaluation, sweeps
//! - [`dataio`]: synthetic cities, CSV ingestion and chronological splits
//! - [`cli`]: command-line dispatch

pub mod cli;
pub mod dataio;
pub mod domain;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod predictor;
pub mod sampler;
pub mod statekit;

pub use error::{FairError, Result};
