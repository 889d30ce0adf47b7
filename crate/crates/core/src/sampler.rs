//! State-guided balanced sampling.
//!
//! A round starts from per-sensor probabilities `sigmoid(D)`, where `D` sums
//! the centred states `d − 0.5` a sensor collected over the last `T_d`
//! batches (unsampled batches contribute 0). Region probabilities are a
//! softmax of each region's sample count minus the balanced target
//! `N_sam / m`. The fused probability `P_region × P_sensor` drives a greedy
//! loop that repeatedly takes the unselected sensor with the lowest value and
//! re-balances the region factor after every pick.

use std::collections::VecDeque;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{RoadNetwork, SensorId};
use crate::error::{FairError, Result};
use crate::statekit::logistic;

/// Rolling per-batch sensor states for the current dynamic window.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLedger {
    t_d: usize,
    sensor_count: usize,
    // `None` marks a sensor that was not sampled in that batch.
    window: VecDeque<Vec<Option<f64>>>,
}

impl StateLedger {
    pub fn new(t_d: usize, sensor_count: usize) -> Result<Self> {
        if t_d == 0 {
            return Err(FairError::invalid("T_d must be at least 1"));
        }
        Ok(Self {
            t_d,
            sensor_count,
            window: VecDeque::with_capacity(t_d),
        })
    }

    pub fn t_d(&self) -> usize {
        self.t_d
    }

    pub fn sensor_count(&self) -> usize {
        self.sensor_count
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.window.len() == self.t_d
    }

    pub fn reset(&mut self) {
        self.window.clear();
    }

    /// Record one batch. `batch_states` must cover exactly the sampled
    /// sensors; the oldest batch is evicted once the window holds `T_d`.
    pub fn accumulate(&mut self, batch_states: &[(SensorId, f64)], sampled: &[SensorId]) -> Result<()> {
        let mut in_sample = vec![false; self.sensor_count];
        for &v in sampled {
            if v >= self.sensor_count {
                return Err(FairError::invalid(format!("unknown sensor {v}")));
            }
            in_sample[v] = true;
        }
        let mut entry = vec![None; self.sensor_count];
        for &(v, d) in batch_states {
            if v >= self.sensor_count || !in_sample[v] {
                return Err(FairError::invalid(format!(
                    "state given for sensor {v}, which is not in the sampled set"
                )));
            }
            if !(0.0..=1.0).contains(&d) {
                return Err(FairError::invalid(format!(
                    "state {d} for sensor {v} outside [0, 1]"
                )));
            }
            entry[v] = Some(d);
        }
        if let Some(missing) = sampled.iter().find(|&&v| entry[v].is_none()) {
            return Err(FairError::invalid(format!(
                "sampled sensor {missing} has no state for this batch"
            )));
        }
        if self.window.len() == self.t_d {
            self.window.pop_front();
        }
        self.window.push_back(entry);
        Ok(())
    }

    /// Centred accumulation `D` for every sensor.
    pub fn accumulated(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.sensor_count];
        for entry in &self.window {
            for (a, d) in acc.iter_mut().zip(entry) {
                if let Some(d) = d {
                    *a += d - 0.5;
                }
            }
        }
        acc
    }

    /// Sensors sampled in at least one batch of the window, ascending.
    pub fn sampled_union(&self) -> Vec<SensorId> {
        (0..self.sensor_count)
            .filter(|&v| self.window.iter().any(|e| e[v].is_some()))
            .collect()
    }
}

/// Where the greedy loop reads region counts from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionCountsSource {
    /// Counts of the selection being built, starting from zero.
    #[default]
    InProgress,
    /// Frozen counts from the previous round.
    PreviousRound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRound {
    pub round_index: usize,
    /// Ascending sensor ids, length `N_sam`.
    pub sampled: Vec<SensorId>,
    pub sensor_probs: Vec<f64>,
    pub region_probs: Vec<f64>,
    pub region_counts: Vec<usize>,
    /// Balanced per-region target `N_sam / m`.
    pub target_per_region: f64,
}

fn check_budget(network: &RoadNetwork, n_sam: usize) -> Result<()> {
    let m = network.region_count();
    if n_sam < m {
        return Err(FairError::invalid(format!(
            "N_sam = {n_sam} cannot cover {m} regions"
        )));
    }
    if n_sam > network.sensor_count() {
        return Err(FairError::invalid(format!(
            "N_sam = {n_sam} exceeds the {} available sensors",
            network.sensor_count()
        )));
    }
    Ok(())
}

/// Largest-remainder apportionment of `n_sam` seats proportional to
/// `sizes`, with at least one and at most `size` seats per region.
///
/// Leftover seats go to the largest fractional remainders (lower region id
/// first on ties); a surplus created by the one-seat floor is taken back from
/// the smallest remainders among regions holding more than one seat (higher
/// id first on ties).
pub fn stratified_quotas(sizes: &[usize], n_sam: usize) -> Result<Vec<usize>> {
    let m = sizes.len();
    let total: usize = sizes.iter().sum();
    if m == 0 || sizes.contains(&0) {
        return Err(FairError::invalid("every region needs at least one sensor"));
    }
    if n_sam < m || n_sam > total {
        return Err(FairError::invalid(format!(
            "N_sam = {n_sam} must lie in [{m}, {total}]"
        )));
    }
    let raw: Vec<f64> = sizes
        .iter()
        .map(|&s| n_sam as f64 * s as f64 / total as f64)
        .collect();
    let mut quotas: Vec<usize> = raw
        .iter()
        .zip(sizes)
        .map(|(r, &s)| (r.floor() as usize).clamp(1, s))
        .collect();
    let remainder: Vec<f64> = raw.iter().map(|r| r - r.floor()).collect();
    let mut assigned: usize = quotas.iter().sum();

    // Seats are handed out one per region per pass, in remainder order.
    let mut by_remainder: Vec<usize> = (0..m).collect();
    by_remainder.sort_by(|&a, &b| remainder[b].total_cmp(&remainder[a]).then(a.cmp(&b)));
    while assigned < n_sam {
        let before = assigned;
        for &r in &by_remainder {
            if assigned == n_sam {
                break;
            }
            if quotas[r] < sizes[r] {
                quotas[r] += 1;
                assigned += 1;
            }
        }
        if assigned == before {
            return Err(FairError::invalid("no region can take another seat"));
        }
    }
    while assigned > n_sam {
        let before = assigned;
        for &r in by_remainder.iter().rev() {
            if assigned == n_sam {
                break;
            }
            if quotas[r] > 1 {
                quotas[r] -= 1;
                assigned -= 1;
            }
        }
        if assigned == before {
            return Err(FairError::invalid("no region can give up a seat"));
        }
    }
    Ok(quotas)
}

/// Round zero: proportional quotas, members drawn uniformly per region.
pub fn stratified_init(network: &RoadNetwork, n_sam: usize, seed: u64) -> Result<SamplingRound> {
    check_budget(network, n_sam)?;
    let quotas = stratified_quotas(&network.region_sizes(), n_sam)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled = Vec::with_capacity(n_sam);
    for (region, &q) in quotas.iter().enumerate() {
        let members = network.members(region);
        sampled.extend(index::sample(&mut rng, members.len(), q).into_iter().map(|i| members[i]));
    }
    sampled.sort_unstable();
    let m = network.region_count();
    Ok(SamplingRound {
        round_index: 0,
        sampled,
        sensor_probs: vec![0.5; network.sensor_count()],
        region_probs: region_probs(&quotas, n_sam, m),
        region_counts: quotas,
        target_per_region: n_sam as f64 / m as f64,
    })
}

/// `sigmoid(D)` for every sensor in the network.
pub fn sensor_probs(ledger: &StateLedger) -> Result<Vec<f64>> {
    if ledger.is_empty() {
        return Err(FairError::invalid("state ledger window is empty"));
    }
    Ok(ledger.accumulated().into_iter().map(logistic).collect())
}

/// Softmax over `C_r − N_sam/m`, shifted by the maximum for stability.
pub fn region_probs(region_counts: &[usize], n_sam: usize, m: usize) -> Vec<f64> {
    let target = n_sam as f64 / m as f64;
    let centred: Vec<f64> = region_counts.iter().map(|&c| c as f64 - target).collect();
    let max = centred.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = centred.iter().map(|c| (c - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Broadcast each region's probability onto its members and multiply.
pub fn fuse_probs(region_probs: &[f64], sensor_probs: &[f64], network: &RoadNetwork) -> Vec<f64> {
    sensor_probs
        .iter()
        .enumerate()
        .map(|(v, p)| region_probs[network.region_of(v)] * p)
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct GreedyOptions<'a> {
    pub round_index: usize,
    pub counts_source: RegionCountsSource,
    /// Required for [`RegionCountsSource::PreviousRound`].
    pub previous_counts: Option<&'a [usize]>,
}

impl Default for GreedyOptions<'_> {
    fn default() -> Self {
        Self {
            round_index: 1,
            counts_source: RegionCountsSource::InProgress,
            previous_counts: None,
        }
    }
}

/// Greedy selection driven by the ledger's accumulated states.
pub fn greedy_select(
    ledger: &StateLedger,
    network: &RoadNetwork,
    n_sam: usize,
    options: GreedyOptions<'_>,
) -> Result<SamplingRound> {
    if !ledger.is_full() {
        return Err(FairError::invalid(format!(
            "ledger holds {} of {} batches",
            ledger.len(),
            ledger.t_d()
        )));
    }
    if ledger.sensor_count() != network.sensor_count() {
        return Err(FairError::invalid("ledger and network disagree on sensor count"));
    }
    greedy_select_from_probs(&sensor_probs(ledger)?, network, n_sam, options)
}

/// Greedy loop over fixed sensor probabilities.
pub fn greedy_select_from_probs(
    sensor_probs: &[f64],
    network: &RoadNetwork,
    n_sam: usize,
    options: GreedyOptions<'_>,
) -> Result<SamplingRound> {
    check_budget(network, n_sam)?;
    if sensor_probs.len() != network.sensor_count() {
        return Err(FairError::invalid("one sensor probability per sensor is required"));
    }
    let m = network.region_count();
    let frozen_counts = match options.counts_source {
        RegionCountsSource::InProgress => None,
        RegionCountsSource::PreviousRound => {
            let prev = options.previous_counts.ok_or_else(|| {
                FairError::invalid("previous-round counts requested but not supplied")
            })?;
            if prev.len() != m {
                return Err(FairError::invalid("previous counts must have one entry per region"));
            }
            Some(prev.to_vec())
        }
    };

    let mut selected = vec![false; network.sensor_count()];
    let mut counts = vec![0usize; m];
    for _ in 0..n_sam {
        let rp = region_probs(frozen_counts.as_deref().unwrap_or(&counts), n_sam, m);
        let mut pick: Option<(SensorId, f64)> = None;
        for (v, &p) in sensor_probs.iter().enumerate() {
            if selected[v] {
                continue;
            }
            let fused = rp[network.region_of(v)] * p;
            if pick.is_none_or(|(_, best)| fused < best) {
                pick = Some((v, fused));
            }
        }
        let (v, _) = pick.expect("n_sam <= sensor count");
        selected[v] = true;
        counts[network.region_of(v)] += 1;
    }

    let fused = fuse_probs(
        &region_probs(frozen_counts.as_deref().unwrap_or(&counts), n_sam, m),
        sensor_probs,
        network,
    );
    repair_coverage(network, &fused, &mut selected, &mut counts);

    Ok(SamplingRound {
        round_index: options.round_index,
        sampled: (0..network.sensor_count()).filter(|&v| selected[v]).collect(),
        sensor_probs: sensor_probs.to_vec(),
        region_probs: region_probs(&counts, n_sam, m),
        region_counts: counts,
        target_per_region: n_sam as f64 / m as f64,
    })
}

/// Swap sensors until every region has a selected member: the empty region's
/// lowest-probability sensor replaces the highest-probability selected sensor
/// of a region holding more than one.
fn repair_coverage(
    network: &RoadNetwork,
    fused: &[f64],
    selected: &mut [bool],
    counts: &mut [usize],
) {
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let incoming = argmin_by_prob(network.members(empty).iter().copied(), fused);
        let outgoing = (0..selected.len())
            .filter(|&v| selected[v] && counts[network.region_of(v)] > 1)
            .fold(None::<SensorId>, |best, v| match best {
                Some(b) if fused[b] >= fused[v] => Some(b),
                _ => Some(v),
            });
        let (Some(incoming), Some(outgoing)) = (incoming, outgoing) else {
            // N_sam >= m guarantees a donor; unreachable after check_budget
            return;
        };
        log::debug!("coverage repair: region {empty} takes sensor {incoming}, drops {outgoing}");
        selected[outgoing] = false;
        counts[network.region_of(outgoing)] -= 1;
        selected[incoming] = true;
        counts[empty] += 1;
    }
}

fn argmin_by_prob(sensors: impl Iterator<Item = SensorId>, probs: &[f64]) -> Option<SensorId> {
    sensors.fold(None, |best, v| match best {
        Some(b) if probs[b] <= probs[v] => Some(b),
        _ => Some(v),
    })
}

/// Per-region counts of a sampled set.
pub fn count_by_region(network: &RoadNetwork, sampled: &[SensorId]) -> Vec<usize> {
    let mut counts = vec![0usize; network.region_count()];
    for &v in sampled {
        counts[network.region_of(v)] += 1;
    }
    counts
}
