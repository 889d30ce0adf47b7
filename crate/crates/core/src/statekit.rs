//! Sensor state identification: threshold labelling against a per-epoch MAPE
//! schedule and a logistic discriminator over predictor hidden vectors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FairError, Result};

pub const DEFAULT_PROB_EPSILON: f64 = 1e-7;

/// Per-epoch MAPE thresholds recorded from a fairness-free reference run.
/// Serializes as a bare JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThresholdSchedule(Vec<f64>);

impl ThresholdSchedule {
    pub fn new(per_epoch: Vec<f64>) -> Result<Self> {
        if per_epoch.is_empty() {
            return Err(FairError::invalid("threshold schedule is empty"));
        }
        if let Some((k, t)) = per_epoch
            .iter()
            .enumerate()
            .find(|(_, t)| !(t.is_finite() && **t > 0.0))
        {
            return Err(FairError::invalid(format!(
                "threshold for epoch {k} must be finite and positive, got {t}"
            )));
        }
        Ok(Self(per_epoch))
    }

    /// Threshold for `epoch`; epochs past the end reuse the last entry.
    pub fn for_epoch(&self, epoch: usize) -> f64 {
        self.0[epoch.min(self.0.len() - 1)]
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FairError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| FairError::io(path, e))
    }
}

impl TryFrom<Vec<f64>> for ThresholdSchedule {
    type Error = FairError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ThresholdSchedule> for Vec<f64> {
    fn from(s: ThresholdSchedule) -> Self {
        s.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SensorState {
    /// Label 0: accuracy at or above the threshold.
    Sacrifice,
    /// Label 1: MAPE strictly below the threshold.
    Benefit,
}

impl SensorState {
    pub fn target(self) -> f64 {
        match self {
            SensorState::Sacrifice => 0.0,
            SensorState::Benefit => 1.0,
        }
    }
}

/// Benefit iff `mape < threshold`; ties are a sacrifice.
pub fn label_states(per_sensor_mape: &[f64], threshold: f64) -> Vec<SensorState> {
    per_sensor_mape
        .iter()
        .map(|&m| {
            if m < threshold {
                SensorState::Benefit
            } else {
                SensorState::Sacrifice
            }
        })
        .collect()
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn clip_prob(d: f64, prob_epsilon: f64) -> f64 {
    d.clamp(prob_epsilon, 1.0 - prob_epsilon)
}

/// Binary cross-entropy of prediction `d` against target `y`, with `d`
/// clipped to `[ε, 1 − ε]`.
pub fn discriminator_loss(d: f64, y: SensorState, prob_epsilon: f64) -> f64 {
    let d = clip_prob(d, prob_epsilon);
    let y = y.target();
    -(y * d.ln() + (1.0 - y) * (1.0 - d).ln())
}

/// A single logistic unit mapping a hidden vector to a state in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub learning_rate: f64,
    pub prob_epsilon: f64,
}

impl Discriminator {
    /// Zero-initialised, so every sensor starts neutral at 0.5.
    pub fn new(hidden_dim: usize, learning_rate: f64, prob_epsilon: f64) -> Result<Self> {
        if hidden_dim == 0 {
            return Err(FairError::invalid("hidden_dim must be positive"));
        }
        if learning_rate.is_nan() || learning_rate <= 0.0 || !(prob_epsilon > 0.0 && prob_epsilon < 0.5) {
            return Err(FairError::invalid(
                "discriminator needs learning_rate > 0 and prob_epsilon in (0, 0.5)",
            ));
        }
        Ok(Self {
            weights: vec![0.0; hidden_dim],
            bias: 0.0,
            learning_rate,
            prob_epsilon,
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn pre_activation(&self, hidden: &[f64]) -> Result<f64> {
        if hidden.len() != self.weights.len() {
            return Err(FairError::invalid(format!(
                "hidden vector has {} entries, discriminator expects {}",
                hidden.len(),
                self.weights.len()
            )));
        }
        Ok(self.weights.iter().zip(hidden).map(|(w, h)| w * h).sum::<f64>() + self.bias)
    }

    /// Unclipped logistic output.
    pub fn discriminate(&self, hidden: &[f64]) -> Result<f64> {
        self.pre_activation(hidden).map(logistic)
    }

    /// Output clipped to `[ε, 1 − ε]`, the form consumed by losses and the
    /// state ledger.
    pub fn state(&self, hidden: &[f64]) -> Result<f64> {
        Ok(clip_prob(self.discriminate(hidden)?, self.prob_epsilon))
    }

    pub fn mean_loss(&self, batch: &[(&[f64], SensorState)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(FairError::invalid("empty discriminator batch"));
        }
        let mut total = 0.0;
        for (h, y) in batch {
            total += discriminator_loss(self.discriminate(h)?, *y, self.prob_epsilon);
        }
        Ok(total / batch.len() as f64)
    }

    /// Gradient of [`Self::mean_loss`]: `(d − Y)·h` for the weights and
    /// `(d − Y)` for the bias, averaged over the batch.
    pub fn gradient(&self, batch: &[(&[f64], SensorState)]) -> Result<(Vec<f64>, f64)> {
        if batch.is_empty() {
            return Err(FairError::invalid("empty discriminator batch"));
        }
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = 0.0;
        for (h, y) in batch {
            let err = self.discriminate(h)? - y.target();
            for (g, x) in gw.iter_mut().zip(h.iter()) {
                *g += err * x;
            }
            gb += err;
        }
        let n = batch.len() as f64;
        gw.iter_mut().for_each(|g| *g /= n);
        Ok((gw, gb / n))
    }

    /// One gradient-descent step on the batch; returns the pre-step loss.
    pub fn step(&mut self, batch: &[(&[f64], SensorState)]) -> Result<f64> {
        let loss = self.mean_loss(batch)?;
        let (gw, gb) = self.gradient(batch)?;
        for (w, g) in self.weights.iter_mut().zip(&gw) {
            *w -= self.learning_rate * g;
        }
        self.bias -= self.learning_rate * gb;
        Ok(loss)
    }
}
