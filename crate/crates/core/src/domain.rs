//! Sensor graph, city partition and time-series containers.
//!
//! Sensor and region ids are dense, 0-based and assigned in file order, so
//! every per-sensor or per-region map in the crate is a plain `Vec`.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{FairError, Result};

pub type SensorId = usize;
pub type RegionId = usize;

/// Road sensors, their undirected connectivity and the region partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadNetwork {
    region_of: Vec<RegionId>,
    region_count: usize,
    edges: Vec<(SensorId, SensorId)>,
    #[serde(skip)]
    members: Vec<Vec<SensorId>>,
}

impl RoadNetwork {
    pub fn new(
        region_of: Vec<RegionId>,
        region_count: usize,
        edges: Vec<(SensorId, SensorId)>,
    ) -> Result<Self> {
        if region_count == 0 {
            return Err(FairError::invalid("region count must be positive"));
        }
        if region_of.is_empty() {
            return Err(FairError::invalid("network has no sensors"));
        }
        let mut members = vec![Vec::new(); region_count];
        for (sensor, &region) in region_of.iter().enumerate() {
            if region >= region_count {
                return Err(FairError::invalid(format!(
                    "sensor {sensor} maps to region {region}, but only {region_count} regions are declared"
                )));
            }
            members[region].push(sensor);
        }
        if let Some(empty) = members.iter().position(Vec::is_empty) {
            return Err(FairError::invalid(format!("region {empty} has no sensors")));
        }
        let n = region_of.len();
        let mut normalized = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(FairError::invalid(format!(
                    "edge ({a}, {b}) references an unknown sensor"
                )));
            }
            if a == b {
                return Err(FairError::invalid(format!("self-loop on sensor {a}")));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        normalized.dedup();
        Ok(Self {
            region_of,
            region_count,
            edges: normalized,
            members,
        })
    }

    /// Network whose regions are contiguous blocks of the given sizes, with
    /// consecutive sensors inside a region connected by an edge.
    pub fn from_region_sizes(sizes: &[usize]) -> Result<Self> {
        let mut region_of = Vec::new();
        let mut edges = Vec::new();
        for (region, &size) in sizes.iter().enumerate() {
            let start = region_of.len();
            for k in 0..size {
                if k > 0 {
                    edges.push((start + k - 1, start + k));
                }
                region_of.push(region);
            }
        }
        Self::new(region_of, sizes.len(), edges)
    }

    pub fn sensor_count(&self) -> usize {
        self.region_of.len()
    }

    pub fn region_count(&self) -> usize {
        self.region_count
    }

    pub fn region_of(&self, sensor: SensorId) -> RegionId {
        self.region_of[sensor]
    }

    pub fn region_map(&self) -> &[RegionId] {
        &self.region_of
    }

    /// Sensors of `region`, in ascending id order.
    pub fn members(&self, region: RegionId) -> &[SensorId] {
        &self.members[region]
    }

    pub fn region_sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    pub fn edges(&self) -> &[(SensorId, SensorId)] {
        &self.edges
    }

    /// Rebuild the derived member lists after deserialization.
    pub fn reindex(self) -> Result<Self> {
        Self::new(self.region_of, self.region_count, self.edges)
    }
}

/// Observations `[time step][sensor]` together with the forecasting geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSeries {
    values: Array2<f64>,
    t_in: usize,
    t_out: usize,
}

impl TrafficSeries {
    pub fn new(values: Array2<f64>, t_in: usize, t_out: usize) -> Result<Self> {
        if t_in == 0 || t_out == 0 {
            return Err(FairError::invalid("lookback and horizon must be positive"));
        }
        if values.ncols() == 0 {
            return Err(FairError::invalid("series has no sensors"));
        }
        if t_in + t_out > values.nrows() {
            return Err(FairError::invalid(format!(
                "lookback {t_in} + horizon {t_out} exceeds {} steps",
                values.nrows()
            )));
        }
        if let Some(((t, v), x)) = values.indexed_iter().find(|(_, x)| !x.is_finite()) {
            return Err(FairError::invalid(format!(
                "non-finite value {x} at step {t}, sensor {v}"
            )));
        }
        Ok(Self {
            values,
            t_in,
            t_out,
        })
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn step_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn sensor_count(&self) -> usize {
        self.values.ncols()
    }

    pub fn t_in(&self) -> usize {
        self.t_in
    }

    pub fn t_out(&self) -> usize {
        self.t_out
    }

    /// Number of (lookback, horizon) windows at stride one.
    pub fn window_count(&self) -> usize {
        self.step_count() + 1 - self.t_in - self.t_out
    }

    /// Contiguous sub-range of steps, keeping the geometry.
    pub fn slice_steps(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.step_count() {
            return Err(FairError::invalid(format!(
                "step range {start}..{end} outside 0..{}",
                self.step_count()
            )));
        }
        Self::new(
            self.values.slice(ndarray::s![start..end, ..]).to_owned(),
            self.t_in,
            self.t_out,
        )
    }

    pub fn with_geometry(&self, t_in: usize, t_out: usize) -> Result<Self> {
        Self::new(self.values.clone(), t_in, t_out)
    }
}

/// Per-step region means `[time step][region]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSeries {
    pub values: Array2<f64>,
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Region means of `rows` (`[row][sensor]`), counting only sensors whose
/// `include` flag is set.
pub fn region_means(
    rows: ArrayView2<'_, f64>,
    network: &RoadNetwork,
    include: &[bool],
) -> Result<Array2<f64>> {
    if rows.ncols() != network.sensor_count() || include.len() != network.sensor_count() {
        return Err(FairError::invalid(format!(
            "series has {} sensors, network has {}",
            rows.ncols(),
            network.sensor_count()
        )));
    }
    let m = network.region_count();
    let mut out = Array2::zeros((rows.nrows(), m));
    for region in 0..m {
        let chosen: Vec<SensorId> = network
            .members(region)
            .iter()
            .copied()
            .filter(|&v| include[v])
            .collect();
        if chosen.is_empty() {
            return Err(FairError::EmptyRegion(region));
        }
        let k = chosen.len() as f64;
        for (row, mut dst) in rows.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
            dst[region] = compensated_sum(chosen.iter().map(|&v| row[v])) / k;
        }
    }
    Ok(out)
}

pub fn regionalize(series: &TrafficSeries, network: &RoadNetwork) -> Result<RegionSeries> {
    let include = vec![true; series.sensor_count()];
    region_means(series.values(), network, &include).map(|values| RegionSeries { values })
}

/// Region means formed from the sampled sensors only.
pub fn regionalize_subset(
    series: &TrafficSeries,
    network: &RoadNetwork,
    sampled: &[SensorId],
) -> Result<RegionSeries> {
    let include = membership_mask(network.sensor_count(), sampled)?;
    region_means(series.values(), network, &include).map(|values| RegionSeries { values })
}

pub fn membership_mask(sensor_count: usize, sampled: &[SensorId]) -> Result<Vec<bool>> {
    let mut mask = vec![false; sensor_count];
    for &v in sampled {
        if v >= sensor_count {
            return Err(FairError::invalid(format!("unknown sensor {v}")));
        }
        mask[v] = true;
    }
    Ok(mask)
}
