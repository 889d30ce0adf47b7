use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dataio::{Geometry, SyntheticSpec};
use crate::error::{FairError, Result};
use crate::metrics::DEFAULT_MASK_EPSILON;
use crate::sampler::RegionCountsSource;
use crate::statekit::DEFAULT_PROB_EPSILON;

/// Where a run gets its observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv { series: PathBuf, partition: PathBuf },
}

/// Which sensors' predictions form a region's predicted value at evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionalPrediction {
    /// Mean over every member sensor of the region.
    #[default]
    AllSensors,
    /// Mean over the region's members in the final sampled set.
    Sampled,
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SyntheticSpec::default())
    }
}

/// Everything that determines a run. Field names accept the symbolic
/// aliases (`N_sam`, `T_d`, `noS`, ...) as well as snake case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    #[serde(alias = "N_sam")]
    pub n_sam: usize,
    /// Dynamic window length, in batches.
    #[serde(alias = "T_d")]
    pub t_d: usize,
    #[serde(alias = "λ1")]
    pub lambda1: f64,
    #[serde(alias = "λ2")]
    pub lambda2: f64,
    pub epochs: usize,
    /// Windows per batch.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub disc_learning_rate: f64,
    pub grad_clip: f64,
    pub seed: u64,
    pub mask_epsilon: f64,
    pub prob_epsilon: f64,
    /// Drop the regional static fairness term.
    #[serde(alias = "noS")]
    pub no_s: bool,
    /// Drop the sensor dynamic fairness term.
    #[serde(alias = "noD")]
    pub no_d: bool,
    /// Keep the stratified round-zero sample for the whole run.
    #[serde(alias = "noAS", alias = "noSA")]
    pub no_as: bool,
    pub binarize_states: bool,
    pub region_counts_source: RegionCountsSource,
    pub regional_prediction: RegionalPrediction,
    #[serde(alias = "T_in")]
    pub t_in: usize,
    #[serde(alias = "T_out")]
    pub t_out: usize,
    pub hidden_dim: usize,
    pub data: DataSource,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            n_sam: 200,
            t_d: 3,
            lambda1: 0.01,
            lambda2: 0.1,
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-2,
            disc_learning_rate: 0.5,
            grad_clip: 5.0,
            seed: 0,
            mask_epsilon: DEFAULT_MASK_EPSILON,
            prob_epsilon: DEFAULT_PROB_EPSILON,
            no_s: false,
            no_d: false,
            no_as: false,
            binarize_states: false,
            region_counts_source: RegionCountsSource::InProgress,
            regional_prediction: RegionalPrediction::AllSensors,
            t_in: 12,
            t_out: 12,
            hidden_dim: 16,
            data: DataSource::default(),
        }
    }
}

fn field_error(field: &str, message: impl Into<String>) -> FairError {
    FairError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

impl TrainingConfig {
    pub fn geometry(&self) -> Geometry {
        Geometry {
            t_in: self.t_in,
            t_out: self.t_out,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t_d", self.t_d),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("n_sam", self.n_sam),
            ("t_in", self.t_in),
            ("t_out", self.t_out),
            ("hidden_dim", self.hidden_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(field_error(name, "must be at least 1"));
            }
        }
        let rates = [
            ("learning_rate", self.learning_rate),
            ("disc_learning_rate", self.disc_learning_rate),
            ("grad_clip", self.grad_clip),
            ("mask_epsilon", self.mask_epsilon),
        ];
        for (name, v) in rates {
            if !(v.is_finite() && v > 0.0) {
                return Err(field_error(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.prob_epsilon > 0.0 && self.prob_epsilon < 0.5) {
            return Err(field_error("prob_epsilon", "must lie in (0, 0.5)"));
        }
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(field_error(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate().map_err(|e| match e {
                FairError::Config { field, message } => field_error(&format!("data.synthetic.{field}"), message),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let field = msg
                .split('`')
                .nth(1)
                .filter(|_| msg.starts_with("unknown field") || msg.starts_with("missing field"))
                .unwrap_or("<document>")
                .to_string();
            FairError::Config { field, message: msg }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FairError::io(path, e))?;
        Self::from_json(&text)
    }
}
