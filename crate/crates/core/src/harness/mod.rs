//! Orchestration: the fairness-free reference run that produces the
//! threshold schedule, the fair training loop, evaluation and sweeps.

pub mod config;
pub mod data;
pub mod report;

use std::time::Instant;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::SensorId;
use crate::error::{FairError, Result};
use crate::metrics::{self, AccuracySummary, FairnessReport, LossComponents};
use crate::predictor::{
    clip_grad_norm, composite_loss, weighted_total, BatchTargets, LossConfig, LossEval, PredictorCheckpoint,
    PredictorOutput, ReferencePredictor, SdfTerm, StPredictor,
};
use crate::sampler::{self, GreedyOptions, SamplingRound, StateLedger};
use crate::statekit::{discriminator_loss, label_states, Discriminator, SensorState, ThresholdSchedule};

pub use config::{DataSource, RegionalPrediction, TrainingConfig};
pub use data::{Batch, Prepared, SplitData};

/// Trained predictor, discriminator and the sample the model ended on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairCheckpoint {
    pub predictor: PredictorCheckpoint,
    pub discriminator: Discriminator,
    pub sampled: Vec<SensorId>,
    /// Threshold used to label states when reporting the discriminator loss.
    pub threshold: f64,
}

impl FairCheckpoint {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?).map_err(|e| FairError::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FairError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Sampled set installed at a batch boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingTrace {
    /// Global batch count at installation; 0 for the stratified round.
    pub batch: usize,
    pub round: usize,
    pub sampled: Vec<SensorId>,
    pub region_counts: Vec<usize>,
}

impl SamplingTrace {
    fn from_round(batch: usize, round: &SamplingRound) -> Self {
        Self {
            batch,
            round: round.round_index,
            sampled: round.sampled.clone(),
            region_counts: round.region_counts.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub threshold: f64,
    /// Batch means; `l_sdf` is averaged over window-boundary batches only.
    pub train_losses: LossComponents,
    pub validation: FairnessReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: TrainingConfig,
    pub effective_n_sam: usize,
    pub schedule: ThresholdSchedule,
    pub epochs: Vec<EpochRecord>,
    pub traces: Vec<SamplingTrace>,
    pub test: FairnessReport,
    pub checkpoint: FairCheckpoint,
    /// Excluded from serialized reports so they stay byte-reproducible.
    #[serde(skip)]
    pub duration_secs: f64,
}

pub struct ReferenceOutcome {
    pub schedule: ThresholdSchedule,
    pub model: ReferencePredictor,
    /// Mean `L_acc` per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Sub-stream tags for seed derivation.
mod stream {
    pub const MODEL_INIT: u64 = 1;
    pub const STRATIFIED: u64 = 2;
}

pub fn new_model(data: &Prepared, config: &TrainingConfig) -> Result<ReferencePredictor> {
    ReferencePredictor::init(
        config.t_in,
        config.t_out,
        config.hidden_dim,
        data.scaler,
        data::derive_seed(config.seed, stream::MODEL_INIT),
    )
}

/// `N_sam` clamped to the network size.
pub fn effective_n_sam(data: &Prepared, config: &TrainingConfig) -> Result<usize> {
    let n = data.network.sensor_count();
    let m = data.network.region_count();
    if config.n_sam < m {
        return Err(FairError::Config {
            field: "n_sam".into(),
            message: format!("{} cannot cover {m} regions", config.n_sam),
        });
    }
    if config.n_sam > n {
        log::warn!("N_sam = {} exceeds the {n} sensors of this network; using {n}", config.n_sam);
    }
    Ok(config.n_sam.min(n))
}

fn check_geometry(data: &Prepared, config: &TrainingConfig) -> Result<()> {
    let s = &data.train.series;
    if s.t_in() != config.t_in || s.t_out() != config.t_out {
        return Err(FairError::invalid("prepared data geometry differs from the config"));
    }
    Ok(())
}

fn forward_batch<P: StPredictor>(model: &P, batch: &Batch) -> Result<Vec<PredictorOutput>> {
    batch.inputs.iter().map(|x| model.forward(x.view())).collect()
}

/// Back-propagate `eval` through every window and take one clipped step.
fn descend<P: StPredictor>(
    model: &mut P,
    batch: &Batch,
    eval: &LossEval,
    config: &TrainingConfig,
    epoch: usize,
) -> Result<()> {
    let mut grads = vec![0.0; model.parameter_count()];
    let last = batch.inputs.len() - 1;
    let zero_hidden = Array2::zeros(eval.grad_hidden_last.dim());
    for (w, (input, gp)) in batch.inputs.iter().zip(&eval.grad_predictions).enumerate() {
        let gh = if w == last { &eval.grad_hidden_last } else { &zero_hidden };
        let g = model.backward(input.view(), gp.view(), gh.view())?;
        grads.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    let norm = clip_grad_norm(&mut grads, config.grad_clip);
    divergence(epoch, "gradient norm", norm)?;
    model.apply_gradients(&grads, config.learning_rate).map_err(|e| FairError::Divergence {
        epoch,
        detail: e.to_string(),
    })
}

/// Masked MAPE per sensor column over every window and horizon step.
fn column_mapes(outputs: &[PredictorOutput], truth: &[Array2<f64>], mask_epsilon: f64) -> Result<Vec<f64>> {
    let n = truth[0].ncols();
    (0..n)
        .map(|c| {
            let (p, t): (Vec<f64>, Vec<f64>) = outputs
                .iter()
                .zip(truth)
                .flat_map(|(o, t)| o.predictions.column(c).to_vec().into_iter().zip(t.column(c).to_vec()))
                .unzip();
            metrics::mape(&p, &t, mask_epsilon).map(|(m, _)| m)
        })
        .collect()
}

fn pooled_mape(outputs: &[PredictorOutput], truth: &[Array2<f64>], mask_epsilon: f64) -> Result<f64> {
    let p: Vec<f64> = outputs.iter().flat_map(|o| o.predictions.iter().copied()).collect();
    let t: Vec<f64> = truth.iter().flat_map(|t| t.iter().copied()).collect();
    metrics::mape(&p, &t, mask_epsilon).map(|(m, _)| m)
}

fn divergence(epoch: usize, what: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(FairError::Divergence {
            epoch,
            detail: format!("{what} became {value}"),
        })
    }
}

/// Train the bare predictor with `L_acc` only on `sensors`, recording the
/// mean training MAPE of every epoch.
pub fn train_reference(data: &Prepared, config: &TrainingConfig, sensors: &[SensorId]) -> Result<ReferenceOutcome> {
    config.validate()?;
    check_geometry(data, config)?;
    let mut model = new_model(data, config)?;
    let loss_cfg = LossConfig {
        lambda1: 0.0,
        lambda2: 0.0,
        include_rsf: false,
        include_sdf: false,
        mask_epsilon: config.mask_epsilon,
    };
    let mut thresholds = Vec::with_capacity(config.epochs);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (mut mape_sum, mut loss_sum, mut batches) = (0.0, 0.0, 0usize);
        for starts in data::epoch_batches(data.train.window_count(), config.batch_size, config.seed, epoch) {
            let batch = data.train.batch(&starts, sensors);
            let outputs = forward_batch(&model, &batch)?;
            let targets = BatchTargets {
                sensor_truth: &batch.truth,
                region_truth: &batch.region_truth,
            };
            let eval = composite_loss(&outputs, targets, &data.network, sensors, None, &loss_cfg)?;
            divergence(epoch, "L_acc", eval.components.l_acc)?;
            mape_sum += pooled_mape(&outputs, &batch.truth, config.mask_epsilon)?;
            loss_sum += eval.components.l_acc;
            batches += 1;
            descend(&mut model, &batch, &eval, config, epoch)?;
        }
        let mean_mape = mape_sum / batches as f64;
        divergence(epoch, "MAPE", mean_mape)?;
        log::info!("reference epoch {epoch}: L_acc {:.5}, MAPE {:.5}", loss_sum / batches as f64, mean_mape);
        // a perfect fit would give a zero threshold; keep the schedule positive
        thresholds.push(mean_mape.max(f64::EPSILON));
        epoch_losses.push(loss_sum / batches as f64);
    }
    Ok(ReferenceOutcome {
        schedule: ThresholdSchedule::new(thresholds)?,
        model,
        epoch_losses,
    })
}

/// Threshold schedule from a fairness-free run over every sensor.
pub fn reference_run(data: &Prepared, config: &TrainingConfig) -> Result<ThresholdSchedule> {
    let all: Vec<SensorId> = (0..data.network.sensor_count()).collect();
    train_reference(data, config, &all).map(|o| o.schedule)
}

/// Mutable state of a fair training run.
struct FairState {
    model: ReferencePredictor,
    disc: Discriminator,
    ledger: StateLedger,
    round: SamplingRound,
    traces: Vec<SamplingTrace>,
    global_batch: usize,
}

/// Per-epoch training statistics.
#[derive(Default)]
struct EpochStats {
    sums: LossComponents,
    batches: usize,
    sdf_batches: usize,
}

impl EpochStats {
    fn mean(&self, config: &TrainingConfig) -> LossComponents {
        let n = self.batches.max(1) as f64;
        let l_sdf = if self.sdf_batches > 0 {
            self.sums.l_sdf / self.sdf_batches as f64
        } else {
            0.0
        };
        let (l_acc, l_rsf) = (self.sums.l_acc / n, self.sums.l_rsf / n);
        LossComponents {
            l_acc,
            l_rsf,
            l_sdf,
            l_dis: self.sums.l_dis / n,
            total: weighted_total(l_acc, l_rsf, l_sdf, config.lambda1, config.lambda2),
        }
    }
}

/// Co-train predictor and discriminator with state-guided re-sampling every
/// `T_d` batches. Per epoch the model is scored on the validation split;
/// after the last epoch on the test split.
pub fn train_fairtp(data: &Prepared, schedule: &ThresholdSchedule, config: &TrainingConfig) -> Result<RunRecord> {
    let started = Instant::now();
    config.validate()?;
    check_geometry(data, config)?;
    let n_sam = effective_n_sam(data, config)?;
    let network = &data.network;

    let round = sampler::stratified_init(network, n_sam, data::derive_seed(config.seed, stream::STRATIFIED))?;
    let mut state = FairState {
        model: new_model(data, config)?,
        disc: Discriminator::new(config.hidden_dim, config.disc_learning_rate, config.prob_epsilon)?,
        ledger: StateLedger::new(config.t_d, network.sensor_count())?,
        traces: vec![SamplingTrace::from_round(0, &round)],
        round,
        global_batch: 0,
    };

    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let threshold = schedule.for_epoch(epoch);
        let mut stats = EpochStats::default();
        for starts in data::epoch_batches(data.train.window_count(), config.batch_size, config.seed, epoch) {
            fair_batch(data, config, &mut state, &starts, threshold, epoch, &mut stats)?;
        }
        let train_losses = stats.mean(config);
        let validation = evaluate(&checkpoint_of(&state, threshold), &data.validation, network, config)?;
        log::info!(
            "epoch {epoch}: L {:.5} (acc {:.5}, rsf {:.5}, sdf {:.5}, dis {:.5}); val MAE {:.4} RSF {:.5} SDF {:.5}",
            train_losses.total,
            train_losses.l_acc,
            train_losses.l_rsf,
            train_losses.l_sdf,
            train_losses.l_dis,
            validation.overall.mae,
            validation.rsf_loss,
            validation.sdf_loss
        );
        epochs.push(EpochRecord {
            epoch,
            threshold,
            train_losses,
            validation,
        });
    }

    let checkpoint = checkpoint_of(&state, schedule.for_epoch(config.epochs.saturating_sub(1)));
    let test = evaluate(&checkpoint, &data.test, network, config)?;
    Ok(RunRecord {
        config: config.clone(),
        effective_n_sam: n_sam,
        schedule: schedule.clone(),
        epochs,
        traces: state.traces,
        test,
        checkpoint,
        duration_secs: started.elapsed().as_secs_f64(),
    })
}

fn checkpoint_of(state: &FairState, threshold: f64) -> FairCheckpoint {
    FairCheckpoint {
        predictor: state.model.checkpoint(),
        discriminator: state.disc.clone(),
        sampled: state.round.sampled.clone(),
        threshold,
    }
}

fn hidden_rows(out: &PredictorOutput) -> Vec<Vec<f64>> {
    out.hidden.axis_iter(Axis(0)).map(|r| r.to_vec()).collect()
}

#[allow(clippy::too_many_arguments)]
fn fair_batch(
    data: &Prepared,
    config: &TrainingConfig,
    state: &mut FairState,
    starts: &[usize],
    threshold: f64,
    epoch: usize,
    stats: &mut EpochStats,
) -> Result<()> {
    let network = &data.network;
    let sampled = state.round.sampled.clone();
    let batch = data.train.batch(starts, &sampled);
    let outputs = forward_batch(&state.model, &batch)?;

    // state identification on the batch's own predictions
    let labels = label_states(&column_mapes(&outputs, &batch.truth, config.mask_epsilon)?, threshold);
    let hidden = hidden_rows(outputs.last().expect("non-empty batch"));
    let disc_batch: Vec<(&[f64], SensorState)> = hidden.iter().map(Vec::as_slice).zip(labels.iter().copied()).collect();
    let l_dis = state.disc.step(&disc_batch)?;
    divergence(epoch, "L_dis", l_dis)?;

    let states: Vec<f64> = if config.binarize_states {
        labels.iter().map(|y| y.target()).collect()
    } else {
        hidden.iter().map(|h| state.disc.state(h)).collect::<Result<_>>()?
    };
    let before = state.ledger.accumulated();
    let prior: Vec<f64> = sampled.iter().map(|&v| before[v]).collect();
    let entries: Vec<(SensorId, f64)> = sampled.iter().copied().zip(states.iter().copied()).collect();
    state.ledger.accumulate(&entries, &sampled)?;
    let boundary = state.ledger.is_full();

    let loss_cfg = LossConfig {
        lambda1: config.lambda1,
        lambda2: config.lambda2,
        include_rsf: !config.no_s,
        include_sdf: !config.no_d && boundary,
        mask_epsilon: config.mask_epsilon,
    };
    let fixed = config.binarize_states.then_some(states.as_slice());
    let term = SdfTerm {
        discriminator: &state.disc,
        prior: &prior,
        fixed_states: fixed,
    };
    let targets = BatchTargets {
        sensor_truth: &batch.truth,
        region_truth: &batch.region_truth,
    };
    let eval = composite_loss(&outputs, targets, network, &sampled, Some(term), &loss_cfg)?;
    divergence(epoch, "L", eval.components.total)?;
    descend(&mut state.model, &batch, &eval, config, epoch)?;

    stats.sums.l_acc += eval.components.l_acc;
    stats.sums.l_rsf += eval.components.l_rsf;
    stats.sums.l_dis += l_dis;
    if loss_cfg.include_sdf {
        stats.sums.l_sdf += eval.components.l_sdf;
        stats.sdf_batches += 1;
    }
    stats.batches += 1;
    state.global_batch += 1;

    if boundary {
        if !config.no_as {
            let previous = state.round.region_counts.clone();
            let options = GreedyOptions {
                round_index: state.round.round_index + 1,
                counts_source: config.region_counts_source,
                previous_counts: Some(&previous),
            };
            state.round = sampler::greedy_select(&state.ledger, network, state.round.sampled.len(), options)?;
        }
        state
            .traces
            .push(SamplingTrace::from_round(state.global_batch, &state.round));
        state.ledger.reset();
    }
    Ok(())
}

/// Score a checkpoint on one split.
///
/// Regional truth averages every sensor. Regional predictions average every
/// member sensor, or only the checkpoint's sampled ones under
/// [`RegionalPrediction::Sampled`]. SDF runs the discriminator over the split in
/// chronological batches, accumulates states over `T_d`-batch windows and
/// reports the mean window loss.
pub fn evaluate(
    checkpoint: &FairCheckpoint,
    split: &SplitData,
    network: &crate::domain::RoadNetwork,
    config: &TrainingConfig,
) -> Result<FairnessReport> {
    let windows = split.window_count();
    if windows == 0 {
        return Err(FairError::invalid("evaluation split has no windows"));
    }
    let model = ReferencePredictor::from_checkpoint(&checkpoint.predictor)?;
    let disc = &checkpoint.discriminator;
    let sampled = &checkpoint.sampled;
    let all: Vec<SensorId> = (0..network.sensor_count()).collect();
    let m = network.region_count();
    let mut columns: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (c, &v) in sampled.iter().enumerate() {
        columns[network.region_of(v)].push(c);
    }
    if let Some(empty) = columns.iter().position(Vec::is_empty) {
        return Err(FairError::EmptyRegion(empty));
    }

    let members: Vec<Vec<usize>> = (0..m).map(|r| network.members(r).to_vec()).collect();
    let use_sampled = config.regional_prediction == RegionalPrediction::Sampled;

    let mut region_pred: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut region_true: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut sensor_pred: Vec<Vec<f64>> = vec![Vec::new(); all.len()];
    let mut sensor_true: Vec<Vec<f64>> = vec![Vec::new(); all.len()];
    let (mut abs_sum, mut abs_count) = (0.0, 0usize);
    let (mut dis_sum, mut dis_count) = (0.0, 0usize);
    let mut ledger = StateLedger::new(config.t_d, network.sensor_count())?;
    let mut window_sdf = Vec::new();

    for starts in data::ordered_batches(windows, config.batch_size) {
        let batch = split.batch(&starts, sampled);
        let outputs = forward_batch(&model, &batch)?;
        let full = split.batch(&starts, &all);
        let full_outputs = forward_batch(&model, &full)?;
        let (region_source, region_cols) = if use_sampled {
            (&outputs, &columns)
        } else {
            (&full_outputs, &members)
        };
        for (out, rt) in region_source.iter().zip(&batch.region_truth) {
            for ((k, r), &y) in rt.indexed_iter() {
                let cols = &region_cols[r];
                let p = cols.iter().map(|&c| out.predictions[[k, c]]).sum::<f64>() / cols.len() as f64;
                region_pred[r].push(p);
                region_true[r].push(y);
            }
        }
        for (out, truth) in outputs.iter().zip(&batch.truth) {
            abs_sum += out.predictions.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>();
            abs_count += truth.len();
        }
        for (out, truth) in full_outputs.iter().zip(&full.truth) {
            for ((k, v), &y) in truth.indexed_iter() {
                sensor_pred[v].push(out.predictions[[k, v]]);
                sensor_true[v].push(y);
            }
        }

        let hidden = hidden_rows(outputs.last().expect("non-empty batch"));
        let labels = label_states(
            &column_mapes(&outputs, &batch.truth, config.mask_epsilon)?,
            checkpoint.threshold,
        );
        let mut entries = Vec::with_capacity(sampled.len());
        for ((h, &v), y) in hidden.iter().zip(sampled).zip(&labels) {
            let d = disc.state(h)?;
            dis_sum += discriminator_loss(d, *y, disc.prob_epsilon);
            dis_count += 1;
            entries.push((v, d));
        }
        ledger.accumulate(&entries, sampled)?;
        if ledger.is_full() {
            window_sdf.push(window_sdf_loss(&ledger, sampled)?);
            ledger.reset();
        }
    }
    if window_sdf.is_empty() && !ledger.is_empty() {
        window_sdf.push(window_sdf_loss(&ledger, sampled)?);
    }

    let mask = config.mask_epsilon;
    let per_region = region_pred
        .iter()
        .zip(&region_true)
        .map(|(p, t)| AccuracySummary::compute(p, t, mask))
        .collect::<Result<Vec<_>>>()?;
    let per_sensor = sensor_pred
        .iter()
        .zip(&sensor_true)
        .map(|(p, t)| AccuracySummary::compute(p, t, mask))
        .collect::<Result<Vec<_>>>()?;
    let flat_p: Vec<f64> = sensor_pred.concat();
    let flat_t: Vec<f64> = sensor_true.concat();
    let overall = AccuracySummary::compute(&flat_p, &flat_t, mask)?;

    let mapes: Vec<f64> = per_region.iter().map(|s| s.mape).collect();
    let rsf_loss = if m >= 2 { metrics::rsf_loss(&mapes)? } else { 0.0 };
    let sdf_loss = window_sdf.iter().sum::<f64>() / window_sdf.len().max(1) as f64;
    let l_acc = abs_sum / abs_count as f64;
    Ok(FairnessReport {
        overall,
        per_region,
        per_sensor,
        rsf_loss,
        sdf_loss,
        loss_components: LossComponents {
            l_acc,
            l_rsf: rsf_loss,
            l_sdf: sdf_loss,
            l_dis: dis_sum / dis_count.max(1) as f64,
            total: weighted_total(l_acc, rsf_loss, sdf_loss, config.lambda1, config.lambda2),
        },
    })
}

fn window_sdf_loss(ledger: &StateLedger, sampled: &[SensorId]) -> Result<f64> {
    if sampled.len() < 2 {
        return Ok(0.0);
    }
    let acc = ledger.accumulated();
    let d: Vec<f64> = sampled.iter().map(|&v| acc[v]).collect();
    metrics::sdf_loss_fast(&d)
}

/// Reference run followed by fair training, from one config.
pub fn run(data: &Prepared, config: &TrainingConfig) -> Result<RunRecord> {
    let schedule = reference_run(data, config)?;
    train_fairtp(data, &schedule, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "T_d")]
    TD,
    #[serde(rename = "N_sam")]
    NSam,
}

impl std::str::FromStr for SweepParam {
    type Err = FairError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T_d" | "t_d" => Ok(SweepParam::TD),
            "N_sam" | "n_sam" => Ok(SweepParam::NSam),
            other => Err(FairError::Config {
                field: "param".into(),
                message: format!("unknown sweep parameter {other:?}; expected T_d or N_sam"),
            }),
        }
    }
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepParam::TD => "T_d",
            SweepParam::NSam => "N_sam",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: usize,
    pub seed: u64,
    pub report: FairnessReport,
}

/// One independent run per value, seeded `base.seed + index`. Runs execute
/// in parallel; row order follows `values`.
pub fn sweep(data: &Prepared, param: SweepParam, values: &[usize], base: &TrainingConfig) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(FairError::Config {
            field: "values".into(),
            message: "no sweep values given".into(),
        });
    }
    let configs: Vec<TrainingConfig> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut c = base.clone();
            c.seed = base.seed.wrapping_add(i as u64);
            match param {
                SweepParam::TD => c.t_d = v,
                SweepParam::NSam => c.n_sam = v,
            }
            c.validate().map(|_| c)
        })
        .collect::<Result<_>>()?;
    configs
        .par_iter()
        .zip(values.par_iter())
        .map(|(c, &value)| {
            let record = run(data, c)?;
            Ok(SweepRow {
                value,
                seed: c.seed,
                report: record.test,
            })
        })
        .collect()
}
