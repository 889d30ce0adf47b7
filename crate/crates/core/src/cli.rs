//! `fairtp` command line: binds a JSON config to the harness and writes run
//! artifacts into an output directory.
//!
//! Exit codes: 0 success, 2 config or usage error, 3 data or I/O error,
//! 4 training divergence.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataio::{self, SyntheticSpec};
use crate::domain::SensorId;
use crate::error::{FairError, Result};
use crate::harness::report::{self, Manifest, SweepSpec};
use crate::harness::{self, DataSource, FairCheckpoint, Prepared, SweepParam, TrainingConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "fairtp", version, about = "Fairness-aware traffic prediction")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON config (a manifest from an earlier run is accepted too).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overwrite existing run files in the output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the configured synthetic city as series and partition CSVs.
    /// `--seed` overrides the synthetic data seed.
    Generate(Common),
    /// Train the bare predictor on every sensor and record the threshold
    /// schedule.
    ReferenceRun(Common),
    /// Reference run followed by fairness-aware training.
    Train(Common),
    /// Evaluate a saved checkpoint on the test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// One independent run per parameter value.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `T_d` or `N_sam`.
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated values, e.g. `2,3,4,5`.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
    },
}

pub const SERIES_CSV: &str = "series.csv";
pub const PARTITION_CSV: &str = "partition.csv";
pub const REFERENCE_CHECKPOINT_FILE: &str = "reference_checkpoint.json";

pub fn exit_code(err: &FairError) -> i32 {
    match err {
        FairError::Config { .. } => EXIT_CONFIG,
        FairError::Divergence { .. } => EXIT_DIVERGENCE,
        _ => EXIT_DATA,
    }
}

fn error_kind(err: &FairError) -> &'static str {
    match exit_code(err) {
        EXIT_CONFIG => "config",
        EXIT_DIVERGENCE => "divergence",
        _ => "data",
    }
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match dispatch(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error[{}]: {e}", error_kind(&e));
            exit_code(&e)
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
}

/// Reads a config file, or the `config` member of a manifest.
pub fn load_config(path: &Path) -> Result<TrainingConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| FairError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| FairError::Config {
        field: "<document>".into(),
        message: format!("{}: {e}", path.display()),
    })?;
    match value.get("manifest_version").and(value.get("config")) {
        Some(inner) => TrainingConfig::from_json(&inner.to_string()),
        None => TrainingConfig::from_json(&text),
    }
}

fn resolve_config(common: &Common) -> Result<TrainingConfig> {
    let mut config = match &common.config {
        Some(path) => load_config(path)?,
        None => TrainingConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

/// Creates `dir` and refuses to clobber any of `files` unless forced.
fn prepare_out(common: &Common, files: &[&str]) -> Result<()> {
    let dir = &common.out;
    std::fs::create_dir_all(dir).map_err(|e| FairError::io(dir, e))?;
    if common.force {
        return Ok(());
    }
    if let Some(existing) = files.iter().map(|f| dir.join(f)).find(|p| p.exists()) {
        return Err(FairError::Config {
            field: "out".into(),
            message: format!("{} already exists; pass --force to overwrite", existing.display()),
        });
    }
    Ok(())
}

fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Generate(common) => generate(common),
        Command::ReferenceRun(common) => reference_run(common),
        Command::Train(common) => train(common),
        Command::Evaluate { common, checkpoint } => evaluate(common, checkpoint),
        Command::Sweep { common, param, values } => sweep(common, *param, values),
    }
}

fn generate(common: &Common) -> Result<()> {
    let mut config = resolve_config(common)?;
    let geometry = config.geometry();
    let spec: &mut SyntheticSpec = match &mut config.data {
        DataSource::Synthetic(spec) => spec,
        DataSource::Csv { .. } => {
            return Err(FairError::Config {
                field: "data".into(),
                message: "generate needs a synthetic data source".into(),
            })
        }
    };
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    prepare_out(common, &[SERIES_CSV, PARTITION_CSV, report::MANIFEST_FILE])?;
    let (network, series) = dataio::generate(spec, geometry)?;
    let dir = &common.out;
    dataio::write_csv(&series, &network, &dir.join(SERIES_CSV), &dir.join(PARTITION_CSV))?;
    let mut manifest = Manifest::new("generate", &config);
    manifest.files = vec![SERIES_CSV.into(), PARTITION_CSV.into()];
    report::write_json(&dir.join(report::MANIFEST_FILE), &manifest)?;
    log::info!(
        "wrote {} sensors x {} steps to {}",
        series.sensor_count(),
        series.step_count(),
        dir.display()
    );
    Ok(())
}

fn reference_run(common: &Common) -> Result<()> {
    let config = resolve_config(common)?;
    prepare_out(
        common,
        &[report::SCHEDULE_FILE, REFERENCE_CHECKPOINT_FILE, report::MANIFEST_FILE],
    )?;
    let data = Prepared::from_config(&config)?;
    let all: Vec<SensorId> = (0..data.network.sensor_count()).collect();
    let outcome = harness::train_reference(&data, &config, &all)?;
    let dir = &common.out;
    outcome.schedule.save(&dir.join(report::SCHEDULE_FILE))?;
    outcome.model.checkpoint().save(&dir.join(REFERENCE_CHECKPOINT_FILE))?;
    let mut manifest = Manifest::new("reference-run", &config);
    manifest.split = Some(data.bounds);
    manifest.files = vec![report::SCHEDULE_FILE.into(), REFERENCE_CHECKPOINT_FILE.into()];
    report::write_json(&dir.join(report::MANIFEST_FILE), &manifest)
}

fn train(common: &Common) -> Result<()> {
    let config = resolve_config(common)?;
    prepare_out(common, &report::RUN_FILES)?;
    let data = Prepared::from_config(&config)?;
    let record = harness::run(&data, &config)?;
    log::info!(
        "finished in {:.1}s: test MAE {:.4}, RSF {:.5}, SDF {:.5}",
        record.duration_secs,
        record.test.overall.mae,
        record.test.rsf_loss,
        record.test.sdf_loss
    );
    report::write_run(
        &common.out,
        &record,
        &data.network,
        data.bounds,
        Manifest::new("train", &config),
    )?;
    Ok(())
}

fn evaluate(common: &Common, checkpoint: &Path) -> Result<()> {
    let config = resolve_config(common)?;
    prepare_out(common, &[report::REPORT_FILE, report::REGIONS_CSV, report::MANIFEST_FILE])?;
    let data = Prepared::from_config(&config)?;
    let ckpt = FairCheckpoint::load(checkpoint)?;
    let fairness = harness::evaluate(&ckpt, &data.test, &data.network, &config)?;
    let dir = &common.out;
    report::write_json(&dir.join(report::REPORT_FILE), &fairness)?;
    report::write_regions_csv(&dir.join(report::REGIONS_CSV), &fairness, &data.network, &ckpt.sampled)?;
    let mut manifest = Manifest::new("evaluate", &config);
    manifest.split = Some(data.bounds);
    manifest.files = vec![report::REPORT_FILE.into(), report::REGIONS_CSV.into()];
    report::write_json(&dir.join(report::MANIFEST_FILE), &manifest)
}

fn sweep(common: &Common, param: SweepParam, values: &[usize]) -> Result<()> {
    let config = resolve_config(common)?;
    prepare_out(common, &[report::SWEEP_FILE, report::SWEEP_CSV, report::MANIFEST_FILE])?;
    let data = Prepared::from_config(&config)?;
    let rows = harness::sweep(&data, param, values, &config)?;
    let dir = &common.out;
    report::write_json(&dir.join(report::SWEEP_FILE), &rows)?;
    report::write_sweep_csv(&dir.join(report::SWEEP_CSV), param, &rows)?;
    let mut manifest = Manifest::new("sweep", &config);
    manifest.split = Some(data.bounds);
    manifest.sweep = Some(SweepSpec {
        param,
        values: values.to_vec(),
    });
    manifest.files = vec![report::SWEEP_FILE.into(), report::SWEEP_CSV.into()];
    report::write_json(&dir.join(report::MANIFEST_FILE), &manifest)
}
