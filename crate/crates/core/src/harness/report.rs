//! On-disk run artifacts: nested JSON reports and flat, plot-ready CSV
//! tables. Nothing written here depends on wall-clock time, so two runs of
//! the same config produce identical files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EpochRecord, RunRecord, SweepParam, SweepRow, TrainingConfig};
use crate::dataio::SplitBounds;
use crate::domain::RoadNetwork;
use crate::error::{FairError, Result};
use crate::metrics::FairnessReport;

pub const REPORT_FILE: &str = "report.json";
pub const TRACE_FILE: &str = "samples_trace.json";
pub const SCHEDULE_FILE: &str = "schedule.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REGIONS_CSV: &str = "regions.csv";
pub const EPOCHS_CSV: &str = "epochs.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_FILE: &str = "sweep.json";

pub const MANIFEST_VERSION: u32 = 1;

/// Final-report view of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub effective_n_sam: usize,
    pub split: SplitBounds,
    /// Held-out test split, final model.
    pub test: FairnessReport,
    pub epochs: Vec<EpochRecord>,
}

impl RunReport {
    pub fn new(record: &RunRecord, split: SplitBounds) -> Self {
        Self {
            effective_n_sam: record.effective_n_sam,
            split,
            test: record.test.clone(),
            epochs: record.epochs.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<usize>,
}

/// Enough to reproduce a run: feeding `config` back through the CLI with
/// the same command yields identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitBounds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    pub files: Vec<String>,
    pub config: TrainingConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &TrainingConfig) -> Self {
        Self {
            manifest_version: MANIFEST_VERSION,
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: config.seed,
            split: None,
            sweep: None,
            files: Vec::new(),
            config: config.clone(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| FairError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> FairError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => FairError::io(path, io),
        other => FairError::invalid(format!("{}: {other:?}", path.display())),
    }
}

/// One row per region of the final report.
pub fn write_regions_csv(
    path: &Path,
    report: &FairnessReport,
    network: &RoadNetwork,
    sampled: &[usize],
) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["region_id", "sensors", "sampled", "mae", "rmse", "mape", "masked_count"])
        .map_err(|e| csv_error(path, e))?;
    let mut sampled_counts = vec![0usize; network.region_count()];
    for &v in sampled {
        sampled_counts[network.region_of(v)] += 1;
    }
    for (r, s) in report.per_region.iter().enumerate() {
        w.write_record([
            r.to_string(),
            network.members(r).len().to_string(),
            sampled_counts[r].to_string(),
            s.mae.to_string(),
            s.rmse.to_string(),
            s.mape.to_string(),
            s.masked_count.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| FairError::io(path, e))
}

/// Epoch series: training loss components and validation metrics.
pub fn write_epochs_csv(path: &Path, epochs: &[EpochRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "epoch",
        "threshold",
        "l_acc",
        "l_rsf",
        "l_sdf",
        "l_dis",
        "loss",
        "mae",
        "rmse",
        "mape",
        "rsf_loss",
        "sdf_loss",
    ])
    .map_err(|e| csv_error(path, e))?;
    for e in epochs {
        let l = &e.train_losses;
        let v = &e.validation;
        w.write_record([
            e.epoch.to_string(),
            e.threshold.to_string(),
            l.l_acc.to_string(),
            l.l_rsf.to_string(),
            l.l_sdf.to_string(),
            l.l_dis.to_string(),
            l.total.to_string(),
            v.overall.mae.to_string(),
            v.overall.rmse.to_string(),
            v.overall.mape.to_string(),
            v.rsf_loss.to_string(),
            v.sdf_loss.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| FairError::io(path, e))
}

pub fn write_sweep_csv(path: &Path, param: SweepParam, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["param", "value", "seed", "mae", "rmse", "mape", "rsf_loss", "sdf_loss"])
        .map_err(|e| csv_error(path, e))?;
    for row in rows {
        let o = &row.report.overall;
        w.write_record([
            param.to_string(),
            row.value.to_string(),
            row.seed.to_string(),
            o.mae.to_string(),
            o.rmse.to_string(),
            o.mape.to_string(),
            row.report.rsf_loss.to_string(),
            row.report.sdf_loss.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| FairError::io(path, e))
}

/// Files `write_run` produces, relative to the output directory.
pub const RUN_FILES: [&str; 7] = [
    REPORT_FILE,
    TRACE_FILE,
    SCHEDULE_FILE,
    CHECKPOINT_FILE,
    REGIONS_CSV,
    EPOCHS_CSV,
    MANIFEST_FILE,
];

/// Write every artifact of a fair training run into `dir`.
pub fn write_run(
    dir: &Path,
    record: &RunRecord,
    network: &RoadNetwork,
    split: SplitBounds,
    mut manifest: Manifest,
) -> Result<Vec<PathBuf>> {
    let report = RunReport::new(record, split);
    write_json(&dir.join(REPORT_FILE), &report)?;
    write_json(&dir.join(TRACE_FILE), &record.traces)?;
    record.schedule.save(&dir.join(SCHEDULE_FILE))?;
    write_json(&dir.join(CHECKPOINT_FILE), &record.checkpoint)?;
    write_regions_csv(&dir.join(REGIONS_CSV), &record.test, network, &record.checkpoint.sampled)?;
    write_epochs_csv(&dir.join(EPOCHS_CSV), &record.epochs)?;
    manifest.split = Some(split);
    manifest.files = RUN_FILES.iter().map(|s| s.to_string()).collect();
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(RUN_FILES.iter().map(|f| dir.join(f)).collect())
}
