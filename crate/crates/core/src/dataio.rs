//! Synthetic cities, CSV ingestion and chronological splits.
//!
//! File formats:
//! - series CSV: one row per time step, one column per sensor, no header;
//! - partition CSV: header `sensor_id,region_id`, one row per sensor.

use std::f64::consts::TAU;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{RegionId, RoadNetwork, TrafficSeries};
use crate::error::{FairError, Result};

/// Lookback and horizon attached to loaded series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub t_in: usize,
    pub t_out: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Self { t_in: 12, t_out: 12 }
    }
}

/// Daily profile of one region: `level + amplitude·sin(2π t / period + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionPattern {
    pub level: f64,
    pub amplitude: f64,
    /// In steps.
    pub period: f64,
    /// In radians.
    pub phase: f64,
}

impl RegionPattern {
    pub fn at(&self, t: usize) -> f64 {
        self.level + self.amplitude * (TAU * t as f64 / self.period + self.phase).sin()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub region_sizes: Vec<usize>,
    pub steps: usize,
    /// One per region.
    pub patterns: Vec<RegionPattern>,
    pub noise_sigma: f64,
    /// Per-region noise multiplier; values above 1 mark harder regions.
    pub tier: Vec<f64>,
    /// Per-sensor gains are drawn uniformly from this closed range.
    pub gain_range: (f64, f64),
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// Two dense regions and two sparse, noisier ones; one week at a
    /// five-minute cadence.
    fn default() -> Self {
        let region_sizes = vec![40, 30, 8, 6];
        let patterns = [(80.0, 30.0, 0.0), (70.0, 25.0, 0.6), (60.0, 25.0, 1.2), (50.0, 20.0, 1.8)]
            .into_iter()
            .map(|(level, amplitude, phase)| RegionPattern {
                level,
                amplitude,
                period: 288.0,
                phase,
            })
            .collect();
        Self {
            region_sizes,
            steps: 2016,
            patterns,
            noise_sigma: 4.0,
            tier: vec![1.0, 1.0, 2.0, 2.0],
            gain_range: (0.8, 1.2),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    /// Default city with the same relative layout but every region scaled by
    /// `factor`.
    pub fn scaled(factor: usize) -> Self {
        let mut spec = Self::default();
        spec.region_sizes.iter_mut().for_each(|s| *s *= factor);
        spec
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.region_sizes.len();
        let bad = |field: &str, message: String| FairError::Config {
            field: field.to_string(),
            message,
        };
        if m == 0 || self.region_sizes.contains(&0) {
            return Err(bad("region_sizes", "every region needs at least one sensor".into()));
        }
        if self.patterns.len() != m {
            return Err(bad("patterns", format!("expected {m} entries, got {}", self.patterns.len())));
        }
        if self.tier.len() != m {
            return Err(bad("tier", format!("expected {m} entries, got {}", self.tier.len())));
        }
        if let Some(p) = self.patterns.iter().find(|p| p.period.is_nan() || p.period <= 0.0 || !p.level.is_finite()) {
            return Err(bad("patterns", format!("invalid pattern {p:?}")));
        }
        if self.noise_sigma.is_nan() || self.noise_sigma < 0.0 || self.tier.iter().any(|t| t.is_nan() || *t < 0.0) {
            return Err(bad("noise_sigma", "noise scale and tiers must be non-negative".into()));
        }
        let (lo, hi) = self.gain_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(bad("gain_range", format!("invalid range ({lo}, {hi})")));
        }
        if self.steps == 0 {
            return Err(bad("steps", "must be positive".into()));
        }
        Ok(())
    }
}

/// Sensor `v` in region `r` reads `pattern_r(t)·gain_v + N(0, σ·tier_r)`.
pub fn generate(spec: &SyntheticSpec, geometry: Geometry) -> Result<(RoadNetwork, TrafficSeries)> {
    spec.validate()?;
    let network = RoadNetwork::from_region_sizes(&spec.region_sizes)?;
    let n = network.sensor_count();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = spec.gain_range;
    let gains: Vec<f64> = (0..n)
        .map(|_| if lo == hi { lo } else { rng.random_range(lo..=hi) })
        .collect();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut values = Array2::zeros((spec.steps, n));
    for t in 0..spec.steps {
        for v in 0..n {
            let r = network.region_of(v);
            let noise = spec.noise_sigma * spec.tier[r];
            let eps = if noise > 0.0 { noise * unit.sample(&mut rng) } else { 0.0 };
            values[[t, v]] = spec.patterns[r].at(t) * gains[v] + eps;
        }
    }
    let series = TrafficSeries::new(values, geometry.t_in, geometry.t_out)?;
    Ok((network, series))
}

fn parse_error(path: &Path, line: u64, message: String) -> FairError {
    FairError::Parse {
        path: path.display().to_string(),
        line: line as usize,
        message,
    }
}

fn reader(path: &Path, has_headers: bool) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| FairError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// Read a headerless wide matrix, rows = steps.
pub fn read_series_csv(path: &Path) -> Result<Array2<f64>> {
    let mut rdr = reader(path, false)?;
    let mut width = None;
    let mut flat = Vec::new();
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = line_of(&record);
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_error(
                    path,
                    line,
                    format!("ragged row: {} columns, expected {w}", record.len()),
                ))
            }
            _ => {}
        }
        for (col, cell) in record.iter().enumerate() {
            let x: f64 = cell.parse().map_err(|_| {
                parse_error(path, line, format!("column {col}: non-numeric cell {cell:?}"))
            })?;
            if !x.is_finite() {
                return Err(parse_error(path, line, format!("column {col}: non-finite value")));
            }
            flat.push(x);
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| parse_error(path, 1, "empty series file".into()))?;
    Array2::from_shape_vec((rows, width), flat).map_err(|e| FairError::invalid(e.to_string()))
}

/// Read `sensor_id,region_id` rows into a total map over `sensor_count`
/// sensors; returns the map and the region count.
pub fn read_partition_csv(path: &Path, sensor_count: usize) -> Result<(Vec<RegionId>, usize)> {
    let mut rdr = reader(path, true)?;
    let headers = rdr
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["sensor_id", "region_id"] {
        return Err(parse_error(
            path,
            1,
            format!("expected header `sensor_id,region_id`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut region_of: Vec<Option<RegionId>> = vec![None; sensor_count];
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = line_of(&record);
        if record.len() != 2 {
            return Err(parse_error(path, line, format!("expected 2 columns, found {}", record.len())));
        }
        let parse = |cell: &str, what: &str| -> Result<usize> {
            cell.parse()
                .map_err(|_| parse_error(path, line, format!("{what}: non-integer cell {cell:?}")))
        };
        let sensor = parse(&record[0], "sensor_id")?;
        let region = parse(&record[1], "region_id")?;
        if sensor >= sensor_count {
            return Err(parse_error(
                path,
                line,
                format!("sensor {sensor} does not exist in a {sensor_count}-column series"),
            ));
        }
        if region_of[sensor].replace(region).is_some() {
            return Err(parse_error(path, line, format!("sensor {sensor} assigned twice")));
        }
    }
    let mut out = Vec::with_capacity(sensor_count);
    for (v, r) in region_of.into_iter().enumerate() {
        out.push(r.ok_or_else(|| FairError::invalid(format!("sensor {v} is missing from the partition")))?);
    }
    let m = out.iter().max().map_or(0, |r| r + 1);
    Ok((out, m))
}

/// Load a series/partition pair; nothing is returned unless both validate.
pub fn ingest_csv(
    series_path: &Path,
    partition_path: &Path,
    geometry: Geometry,
) -> Result<(RoadNetwork, TrafficSeries)> {
    let values = read_series_csv(series_path)?;
    let (region_of, m) = read_partition_csv(partition_path, values.ncols())?;
    let n = region_of.len();
    let mut edges = Vec::new();
    for v in 1..n {
        if region_of[v] == region_of[v - 1] {
            edges.push((v - 1, v));
        }
    }
    let network = RoadNetwork::new(region_of, m, edges)?;
    let series = TrafficSeries::new(values, geometry.t_in, geometry.t_out)?;
    Ok((network, series))
}

pub fn write_csv(
    series: &TrafficSeries,
    network: &RoadNetwork,
    series_path: &Path,
    partition_path: &Path,
) -> Result<()> {
    let csv_err = |path: &Path, e: csv::Error| FairError::invalid(format!("{}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(series_path)
        .map_err(|e| csv_err(series_path, e))?;
    for row in series.values().rows() {
        w.write_record(row.iter().map(|x| x.to_string()))
            .map_err(|e| csv_err(series_path, e))?;
    }
    w.flush().map_err(|e| FairError::io(series_path, e))?;

    let mut w = csv::Writer::from_path(partition_path).map_err(|e| csv_err(partition_path, e))?;
    w.write_record(["sensor_id", "region_id"])
        .map_err(|e| csv_err(partition_path, e))?;
    for (v, r) in network.region_map().iter().enumerate() {
        w.write_record([v.to_string(), r.to_string()])
            .map_err(|e| csv_err(partition_path, e))?;
    }
    w.flush().map_err(|e| FairError::io(partition_path, e))
}

/// Step ranges of a chronological split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitBounds {
    pub train: (usize, usize),
    pub validation: (usize, usize),
    pub test: (usize, usize),
}

/// Floor-rounded train and validation lengths, remainder to test.
pub fn split_bounds(steps: usize, ratios: (f64, f64, f64)) -> Result<SplitBounds> {
    let (a, b, c) = ratios;
    if !(a > 0.0 && b > 0.0 && c > 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(FairError::invalid("split ratios must be positive and sum to 1"));
    }
    let n_train = (steps as f64 * a).floor() as usize;
    let n_val = (steps as f64 * b).floor() as usize;
    Ok(SplitBounds {
        train: (0, n_train),
        validation: (n_train, n_train + n_val),
        test: (n_train + n_val, steps),
    })
}

pub fn split(
    series: &TrafficSeries,
    ratios: (f64, f64, f64),
) -> Result<(TrafficSeries, TrafficSeries, TrafficSeries, SplitBounds)> {
    let bounds = split_bounds(series.step_count(), ratios)?;
    let need = series.t_in() + series.t_out();
    for (name, (s, e)) in [("train", bounds.train), ("validation", bounds.validation), ("test", bounds.test)] {
        if e - s < need {
            return Err(FairError::invalid(format!(
                "{name} split has {} steps, fewer than one window ({need})",
                e - s
            )));
        }
    }
    Ok((
        series.slice_steps(bounds.train.0, bounds.train.1)?,
        series.slice_steps(bounds.validation.0, bounds.validation.1)?,
        series.slice_steps(bounds.test.0, bounds.test.1)?,
        bounds,
    ))
}

pub const DEFAULT_SPLIT: (f64, f64, f64) = (0.6, 0.2, 0.2);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::regionalize;
    use std::io::Write;

    fn tmp_file(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn noiseless_unit_gain_reproduces_pattern() {
        let spec = SyntheticSpec {
            noise_sigma: 0.0,
            gain_range: (1.0, 1.0),
            steps: 50,
            ..SyntheticSpec::default()
        };
        let (net, series) = generate(&spec, Geometry::default()).unwrap();
        for v in [0, 45, 75, 83] {
            let r = net.region_of(v);
            for t in 0..50 {
                assert_eq!(series.values()[[t, v]], spec.patterns[r].at(t));
            }
        }
    }

    #[test]
    fn generation_is_seeded() {
        let spec = SyntheticSpec { steps: 40, ..SyntheticSpec::default() };
        let a = generate(&spec, Geometry::default()).unwrap();
        let b = generate(&spec, Geometry::default()).unwrap();
        assert_eq!(a, b);
        let c = generate(&SyntheticSpec { seed: 1, ..spec }, Geometry::default()).unwrap();
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn generated_region_means_consistent() {
        let spec = SyntheticSpec { steps: 30, ..SyntheticSpec::default() };
        let (net, series) = generate(&spec, Geometry::default()).unwrap();
        let r = regionalize(&series, &net).unwrap();
        for t in 0..30 {
            let members = net.members(2);
            let want = members.iter().map(|&v| series.values()[[t, v]]).sum::<f64>() / members.len() as f64;
            assert!((r.values[[t, 2]] - want).abs() < 1e-12 * want.abs());
        }
    }

    #[test]
    fn spec_validation_names_field() {
        let spec = SyntheticSpec { tier: vec![1.0], ..SyntheticSpec::default() };
        match spec.validate() {
            Err(FairError::Config { field, .. }) => assert_eq!(field, "tier"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn toy_csv_parses() {
        let dir = tempfile::tempdir().unwrap();
        let s = tmp_file(&dir, "s.csv", "1,2,3\n4,5,6\n7,8,9\n10,11,12\n");
        let p = tmp_file(&dir, "p.csv", "sensor_id,region_id\n0,0\n1,1\n2,0\n");
        let (net, series) = ingest_csv(&s, &p, Geometry { t_in: 2, t_out: 1 }).unwrap();
        assert_eq!(series.values().dim(), (4, 3));
        assert_eq!(series.values()[[3, 1]], 11.0);
        assert_eq!(net.members(0), &[0, 2]);
    }

    #[test]
    fn partition_missing_sensor_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let s = tmp_file(&dir, "s.csv", "1,2,3\n4,5,6\n");
        let p = tmp_file(&dir, "p.csv", "sensor_id,region_id\n0,0\n2,0\n");
        let err = ingest_csv(&s, &p, Geometry { t_in: 1, t_out: 1 }).unwrap_err();
        assert!(err.to_string().contains("sensor 1"), "{err}");
    }

    #[test]
    fn bad_cells_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = tmp_file(&dir, "p.csv", "sensor_id,region_id\n0,0\n1,0\n");
        let s = tmp_file(&dir, "s.csv", "1,2\n3,x\n");
        let err = ingest_csv(&s, &p, Geometry { t_in: 1, t_out: 1 }).unwrap_err();
        assert!(matches!(err, FairError::Parse { line: 2, .. }), "{err}");
        let s = tmp_file(&dir, "s2.csv", "1,2\n3,4\n5\n");
        let err = ingest_csv(&s, &p, Geometry { t_in: 1, t_out: 1 }).unwrap_err();
        assert!(matches!(err, FairError::Parse { line: 3, .. }), "{err}");
        let p = tmp_file(&dir, "p2.csv", "sensor_id,region_id\n0,0\n1,0\n1,1\n");
        let s = tmp_file(&dir, "s3.csv", "1,2\n3,4\n");
        let err = ingest_csv(&s, &p, Geometry { t_in: 1, t_out: 1 }).unwrap_err();
        assert!(matches!(err, FairError::Parse { line: 4, .. }), "{err}");
    }

    #[test]
    fn write_then_ingest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SyntheticSpec { steps: 60, seed: 3, ..SyntheticSpec::default() };
        let (net, series) = generate(&spec, Geometry::default()).unwrap();
        let (s, p) = (dir.path().join("s.csv"), dir.path().join("p.csv"));
        write_csv(&series, &net, &s, &p).unwrap();
        let (net2, series2) = ingest_csv(&s, &p, Geometry::default()).unwrap();
        assert_eq!(series, series2);
        assert_eq!(net.region_map(), net2.region_map());
        assert_eq!(net.edges(), net2.edges());
    }

    #[test]
    fn split_lengths() {
        let b = split_bounds(100, DEFAULT_SPLIT).unwrap();
        assert_eq!((b.train.1 - b.train.0, b.validation.1 - b.validation.0, b.test.1 - b.test.0), (60, 20, 20));
        let b = split_bounds(101, DEFAULT_SPLIT).unwrap();
        assert_eq!((b.train.1, b.validation.1 - b.validation.0, b.test.1 - b.test.0), (60, 20, 21));
    }

    #[test]
    fn splits_concatenate_to_original() {
        let values = Array2::from_shape_fn((101, 2), |(t, v)| (t * 2 + v) as f64);
        let series = TrafficSeries::new(values.clone(), 3, 2).unwrap();
        let (a, b, c, _) = split(&series, DEFAULT_SPLIT).unwrap();
        let joined = ndarray::concatenate(ndarray::Axis(0), &[a.values(), b.values(), c.values()]).unwrap();
        assert_eq!(joined, values);
        let short = TrafficSeries::new(Array2::zeros((20, 2)), 3, 2).unwrap();
        assert!(split(&short, DEFAULT_SPLIT).is_err());
    }
}
