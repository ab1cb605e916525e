//! Adam, the epoch loop with best-validation snapshotting, evaluation and
//! checkpoint files.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{
    apply_mask, chrono_split, MaskSpec, SeriesFrame, SplitSpec, WindowSample, WindowSet,
    ZScoreStats,
};
use crate::error::{Error, Result};
use crate::model::{CrossLinear, CrossLinearParams, Forecaster, MetricAccumulator, ModelConfig, PARAM_NAMES};
use crate::layers::PeMode;
use crate::ndgrad::{Graph, Tensor, Var};

/// Adam moments and step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &[&Tensor], lr: f64) -> Self {
        Self {
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update from each parameter's gradient buffer.
/// Frozen tensors are left alone; a missing gradient counts as zero.
pub fn adam_step(params: &mut [&mut Tensor], state: &mut AdamState) -> Result<()> {
    if params.len() != state.m.len() {
        return Err(Error::Contract(format!(
            "{} parameters for optimizer state of {}",
            params.len(),
            state.m.len()
        )));
    }
    if let Some((i, p)) = params
        .iter()
        .enumerate()
        .find(|(i, p)| p.len() != state.m[*i].len())
    {
        return Err(Error::Contract(format!(
            "parameter {i} has {} elements, state has {}",
            p.len(),
            state.m[i].len()
        )));
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for (i, p) in params.iter_mut().enumerate() {
        if !p.requires_grad() {
            continue;
        }
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        let (data, grad) = p.data_and_grad_mut();
        for j in 0..data.len() {
            let g = grad.map_or(0.0, |g| g[j]);
            m[j] = b1 * m[j] + (1.0 - b1) * g;
            v[j] = b2 * v[j] + (1.0 - b2) * g * g;
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            data[j] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// `lr·0.5^epoch`, epochs counted from 0.
    HalveEachEpoch,
}

impl LrSchedule {
    pub fn lr_at(self, base: f64, epoch: usize) -> f64 {
        match self {
            LrSchedule::Constant => base,
            LrSchedule::HalveEachEpoch => base * 0.5f64.powi(epoch as i32),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    #[serde(default = "TrainConfig::default_epochs")]
    pub epochs: usize,
    #[serde(default = "TrainConfig::default_schedule")]
    pub lr_schedule: LrSchedule,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "TrainConfig::default_shuffle")]
    pub shuffle_train: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch_size: 32,
            epochs: Self::default_epochs(),
            lr_schedule: Self::default_schedule(),
            seed: 0,
            shuffle_train: true,
        }
    }
}

impl TrainConfig {
    fn default_epochs() -> usize {
        10
    }

    fn default_schedule() -> LrSchedule {
        LrSchedule::HalveEachEpoch
    }

    fn default_shuffle() -> bool {
        true
    }

    /// Rejects impossible values; values outside the usual ranges only warn.
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config("train.lr", format!("{} is not a valid rate", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("train.epochs", "must be at least 1"));
        }
        if !(1e-5..=1e-3).contains(&self.lr) {
            log::warn!("train.lr = {} is outside [1e-5, 1e-3]", self.lr);
        }
        if !(8..=64).contains(&self.batch_size) {
            log::warn!("train.batch_size = {} is outside [8, 64]", self.batch_size);
        }
        Ok(())
    }
}

/// Windowed train/validation/test sets cut from one standardized frame.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub train: WindowSet,
    pub val: WindowSet,
    pub test: WindowSet,
    /// Train-split statistics, when standardization was applied.
    pub zscore: Option<ZScoreStats>,
}

impl Dataset {
    /// Splits chronologically, z-scores with train statistics when
    /// `standardize` is set, and lets validation and test lookbacks reach
    /// back into the preceding segment.
    pub fn prepare(
        frame: &SeriesFrame,
        split: &SplitSpec,
        lookback: usize,
        horizon: usize,
        standardize: bool,
    ) -> Result<Self> {
        let s = chrono_split(frame.len(), split)?;
        if s.train.is_empty() {
            return Err(Error::config("split.train", "training segment is empty"));
        }
        let (frame, zscore) = if standardize {
            let stats = ZScoreStats::fit(&frame.segment(s.train.clone(), 0));
            (stats.apply(frame), Some(stats))
        } else {
            (frame.clone(), None)
        };
        let windows = |range, context| {
            WindowSet::new(Arc::new(frame.segment(range, context)), lookback, horizon, 1)
        };
        Ok(Self {
            train: windows(s.train, 0),
            val: windows(s.val, lookback),
            test: windows(s.test, lookback),
            zscore,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_mse: f64,
    pub val_mae: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Validation MSE before the first update.
    pub initial_val_mse: f64,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub test_mse: f64,
    pub test_mae: f64,
    pub param_count: usize,
    pub train_windows: usize,
    pub val_windows: usize,
    pub test_windows: usize,
    pub wall_seconds: f64,
}

/// Dataset-level metrics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
}

#[derive(Clone, Debug, Default)]
pub struct EvalOptions<'a> {
    /// Corruption applied to each lookback, reseeded per window index.
    pub mask: Option<&'a MaskSpec>,
    /// Report in raw units by inverting this standardization.
    pub raw_units: Option<&'a ZScoreStats>,
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// `f` over `0..n` on scoped threads, results in index order.
fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let threads = workers().min(n.max(1));
    if threads <= 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(threads);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|w| s.spawn(move || (w * chunk..((w + 1) * chunk).min(n)).map(f).collect::<Vec<T>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

fn raw_rows(t: &Tensor, sample: &WindowSample, stats: &ZScoreStats) -> Tensor {
    let mut out = t.clone();
    let cols = t.cols();
    let single = t.rows() == 1;
    for (r, row) in out.data_mut().chunks_exact_mut(cols).enumerate() {
        let var = if single { sample.endo_index } else { r };
        for v in row {
            *v = stats.invert_value(var, *v);
        }
    }
    out
}

/// MSE and MAE over every window, computed without recording gradients.
pub fn evaluate<M: Forecaster + Sync>(
    model: &M,
    windows: &WindowSet,
    opts: &EvalOptions,
) -> Result<Metrics> {
    if windows.is_empty() {
        return Err(Error::Contract("evaluation over zero windows".into()));
    }
    let per_window = par_map(windows.len(), |i| -> Result<MetricAccumulator> {
        let sample = windows.get(i);
        let input = match opts.mask {
            Some(spec) => apply_mask(&sample, &spec.for_window(i)),
            None => sample.clone(),
        };
        let mut pred = model.predict(&input)?;
        let mut target = model.target(&sample);
        if let Some(stats) = opts.raw_units {
            pred = raw_rows(&pred, &sample, stats);
            target = raw_rows(&target, &sample, stats);
        }
        let mut acc = MetricAccumulator::default();
        acc.add(&pred, &target)?;
        Ok(acc)
    });
    let mut total = MetricAccumulator::default();
    for acc in per_window {
        total.merge(&acc?);
    }
    Ok(Metrics {
        mse: total.mse()?,
        mae: total.mae()?,
    })
}

/// Loss and parameter gradients of one window.
fn sample_grads<M: Forecaster>(model: &M, sample: &WindowSample) -> Result<(f64, Vec<Option<Vec<f64>>>)> {
    let mut g = Graph::new();
    let vars = model.bind(&mut g);
    let pred = model.forward(&mut g, &vars, sample)?;
    let target = g.constant(&model.target(sample));
    let loss = g.mse(pred, target)?;
    let value = g.value(loss)[0];
    g.backward(loss)?;
    let grads = vars.iter().map(|v: &Var| g.grad(*v).map(<[f64]>::to_vec)).collect();
    Ok((value, grads))
}

fn snapshot<M: Forecaster>(model: &M) -> Vec<Tensor> {
    model.parameters().into_iter().cloned().collect()
}

fn restore<M: Forecaster>(model: &mut M, snap: &[Tensor]) {
    for (p, s) in model.parameters_mut().into_iter().zip(snap) {
        *p = s.clone();
        p.clear_grad();
    }
}

/// Mini-batch Adam for `epochs` epochs; the parameters with the lowest
/// validation MSE are kept in `model` and scored on the test windows.
pub fn train<M: Forecaster + Sync>(model: &mut M, data: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::config(
            "split.train",
            "training segment yields no windows for this lookback and horizon",
        ));
    }
    if data.val.is_empty() {
        return Err(Error::config(
            "split.val",
            "validation segment yields no windows for this lookback and horizon",
        ));
    }
    let start = Instant::now();
    let eval = EvalOptions::default();
    let initial_val_mse = evaluate(model, &data.val, &eval)?.mse;
    let mut state = AdamState::new(&model.parameters(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, Vec<Tensor>)> = None;

    for epoch in 0..cfg.epochs {
        let epoch_start = Instant::now();
        state.lr = cfg.lr_schedule.lr_at(cfg.lr, epoch);
        if cfg.shuffle_train {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let results = {
                let m: &M = model;
                par_map(batch.len(), |i| sample_grads(m, &data.train.get(batch[i])))
            };
            let scale = 1.0 / batch.len() as f64;
            let mut params = model.parameters_mut();
            for p in params.iter_mut() {
                p.zero_grad();
            }
            for r in results {
                let (loss, grads) = r?;
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "loss is {loss} at epoch {}, batch {}",
                        epoch + 1,
                        b + 1
                    )));
                }
                loss_sum += loss;
                for (p, g) in params.iter_mut().zip(grads) {
                    if let Some(g) = g {
                        p.accumulate_grad(&g, scale)?;
                    }
                }
            }
            adam_step(&mut params, &mut state)?;
            if let Some(bad) = params.iter().position(|p| !p.is_finite()) {
                return Err(Error::Numeric(format!(
                    "parameter {} became non-finite at epoch {}, batch {}",
                    model.param_names()[bad],
                    epoch + 1,
                    b + 1
                )));
            }
        }
        let val = evaluate(model, &data.val, &eval)?;
        if !val.mse.is_finite() {
            return Err(Error::Numeric(format!(
                "validation MSE is {} after epoch {}",
                val.mse,
                epoch + 1
            )));
        }
        records.push(EpochRecord {
            epoch: epoch + 1,
            lr: state.lr,
            train_loss: loss_sum / data.train.len() as f64,
            val_mse: val.mse,
            val_mae: val.mae,
            seconds: epoch_start.elapsed().as_secs_f64(),
        });
        log::info!(
            "epoch {:>2}  train {:.6}  val mse {:.6}  mae {:.6}",
            epoch + 1,
            loss_sum / data.train.len() as f64,
            val.mse,
            val.mae
        );
        if best.as_ref().is_none_or(|(_, m, _)| val.mse < *m) {
            best = Some((epoch + 1, val.mse, snapshot(model)));
        }
    }

    let (best_epoch, best_val_mse, params) = best.expect("at least one epoch");
    restore(model, &params);
    let test = evaluate(model, &data.test, &eval)?;
    Ok(TrainReport {
        epochs: records,
        initial_val_mse,
        best_epoch,
        best_val_mse,
        test_mse: test.mse,
        test_mae: test.mae,
        param_count: model.param_count(),
        train_windows: data.train.len(),
        val_windows: data.val.len(),
        test_windows: data.test.len(),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedArray {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    format_version: u32,
    config: ModelConfig,
    variable_names: Vec<String>,
    parameters: Vec<NamedArray>,
}

/// Writes config, variable names and every parameter as a JSON document.
pub fn save_checkpoint(model: &CrossLinear, variable_names: &[String], path: impl AsRef<Path>) -> Result<()> {
    let doc = CheckpointDoc {
        format_version: CHECKPOINT_VERSION,
        config: model.config.clone(),
        variable_names: variable_names.to_vec(),
        parameters: PARAM_NAMES
            .iter()
            .zip(model.params.tensors())
            .map(|(name, t)| NamedArray {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                values: t.data().to_vec(),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&doc)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads a checkpoint; returns the model and the stored variable names.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(CrossLinear, Vec<String>)> {
    let text = std::fs::read_to_string(path)?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
    match raw.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(CHECKPOINT_VERSION) => {}
        Some(v) => {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {v}, expected {CHECKPOINT_VERSION}"
            )))
        }
        None => return Err(Error::Checkpoint("missing format_version".into())),
    }
    let doc: CheckpointDoc =
        serde_json::from_value(raw).map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))?;
    doc.config
        .validate()
        .map_err(|e| Error::Checkpoint(format!("stored config is invalid: {e}")))?;
    let mut params = CrossLinearParams::init(&doc.config)?;
    if doc.parameters.len() != PARAM_NAMES.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} parameters, found {}",
            PARAM_NAMES.len(),
            doc.parameters.len()
        )));
    }
    for ((name, slot), arr) in PARAM_NAMES.iter().zip(params.tensors_mut()).zip(doc.parameters) {
        if arr.name != *name {
            return Err(Error::Checkpoint(format!("expected parameter {name}, found {}", arr.name)));
        }
        let trainable = !(*name == "head.pos_emb" && doc.config.pe_mode == PeMode::FixedSinusoidal);
        *slot = Tensor::new(&arr.shape, arr.values)
            .map_err(|e| Error::Checkpoint(format!("parameter {name}: {e}")))?
            .with_requires_grad(trainable);
    }
    let model = CrossLinear::from_parts(doc.config, params)?;
    Ok((model, doc.variable_names))
}
