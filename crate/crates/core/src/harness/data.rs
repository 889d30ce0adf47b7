//! Dataset preparation and window batching.

use ndarray::{s, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::{self, SplitBounds, DEFAULT_SPLIT};
use crate::domain::{regionalize, RoadNetwork, SensorId, TrafficSeries};
use crate::error::{FairError, Result};
use crate::harness::config::{DataSource, TrainingConfig};
use crate::predictor::Scaler;

/// One chronological split with its all-sensor region means.
#[derive(Debug, Clone)]
pub struct SplitData {
    pub series: TrafficSeries,
    pub region_truth: Array2<f64>,
}

impl SplitData {
    fn new(series: TrafficSeries, network: &RoadNetwork) -> Result<Self> {
        let region_truth = regionalize(&series, network)?.values;
        Ok(Self { series, region_truth })
    }

    pub fn window_count(&self) -> usize {
        self.series.window_count()
    }

    /// Windows starting at `starts`, restricted to the `sensors` columns.
    pub fn batch(&self, starts: &[usize], sensors: &[SensorId]) -> Batch {
        let (t_in, t_out) = (self.series.t_in(), self.series.t_out());
        let values = self.series.values();
        let mut batch = Batch {
            starts: starts.to_vec(),
            inputs: Vec::with_capacity(starts.len()),
            truth: Vec::with_capacity(starts.len()),
            region_truth: Vec::with_capacity(starts.len()),
        };
        for &s in starts {
            batch.inputs.push(gather(values.slice(s![s..s + t_in, ..]), sensors));
            batch.truth.push(gather(values.slice(s![s + t_in..s + t_in + t_out, ..]), sensors));
            batch
                .region_truth
                .push(self.region_truth.slice(s![s + t_in..s + t_in + t_out, ..]).to_owned());
        }
        batch
    }
}

fn gather(rows: ArrayView2<'_, f64>, sensors: &[SensorId]) -> Array2<f64> {
    Array2::from_shape_fn((rows.nrows(), sensors.len()), |(t, c)| rows[[t, sensors[c]]])
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub starts: Vec<usize>,
    /// `[T_in][sensor]` per window.
    pub inputs: Vec<Array2<f64>>,
    /// `[T_out][sensor]` per window.
    pub truth: Vec<Array2<f64>>,
    /// `[T_out][region]` per window, over all sensors.
    pub region_truth: Vec<Array2<f64>>,
}

/// Network, chronological splits and the training-split scaler.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub network: RoadNetwork,
    pub train: SplitData,
    pub validation: SplitData,
    pub test: SplitData,
    pub bounds: SplitBounds,
    pub scaler: Scaler,
}

impl Prepared {
    pub fn new(network: RoadNetwork, series: TrafficSeries) -> Result<Self> {
        if series.sensor_count() != network.sensor_count() {
            return Err(FairError::invalid("series and network disagree on sensor count"));
        }
        let (train, validation, test, bounds) = dataio::split(&series, DEFAULT_SPLIT)?;
        let scaler = Scaler::fit(train.values());
        Ok(Self {
            train: SplitData::new(train, &network)?,
            validation: SplitData::new(validation, &network)?,
            test: SplitData::new(test, &network)?,
            network,
            bounds,
            scaler,
        })
    }

    pub fn from_config(config: &TrainingConfig) -> Result<Self> {
        let (network, series) = match &config.data {
            DataSource::Synthetic(spec) => dataio::generate(spec, config.geometry())?,
            DataSource::Csv { series, partition } => dataio::ingest_csv(series, partition, config.geometry())?,
        };
        Self::new(network, series)
    }
}

/// Window starts for one epoch, shuffled with a seed derived from the run
/// seed and the epoch, cut into batches.
pub fn epoch_batches(window_count: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut starts: Vec<usize> = (0..window_count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5348_5546 + epoch as u64));
    starts.shuffle(&mut rng);
    starts.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Chronological batches for evaluation.
pub fn ordered_batches(window_count: usize, batch_size: usize) -> Vec<Vec<usize>> {
    (0..window_count)
        .collect::<Vec<_>>()
        .chunks(batch_size)
        .map(<[usize]>::to_vec)
        .collect()
}

/// SplitMix64 finaliser over `seed ^ tag`, for independent sub-streams.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_cover_every_window_once() {
        let b = epoch_batches(70, 32, 4, 0);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![32, 32, 6]);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..70).collect::<Vec<_>>());
        assert_eq!(b, epoch_batches(70, 32, 4, 0));
        assert_ne!(b, epoch_batches(70, 32, 4, 1));
    }

    #[test]
    fn batch_gathers_columns() {
        let values = Array2::from_shape_fn((10, 3), |(t, v)| (10 * t + v) as f64);
        let net = RoadNetwork::from_region_sizes(&[1, 2]).unwrap();
        let split = SplitData::new(TrafficSeries::new(values, 2, 1).unwrap(), &net).unwrap();
        let b = split.batch(&[4], &[2, 0]);
        assert_eq!(b.inputs[0], ndarray::array![[42.0, 40.0], [52.0, 50.0]]);
        assert_eq!(b.truth[0], ndarray::array![[62.0, 60.0]]);
        assert_eq!(b.region_truth[0], ndarray::array![[60.0, 61.5]]);
    }
}
