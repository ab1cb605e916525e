//! Dataset handling: CSV ingestion, chronological splits, train-split
//! z-scoring, sliding windows, missing-value masking and the synthetic
//! exogenous-driven generator.

use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndgrad::Tensor;

/// Raw multivariate series: `values[var][t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesFrame {
    names: Vec<String>,
    values: Vec<Vec<f64>>,
    endo_index: usize,
    pub frequency: String,
}

impl SeriesFrame {
    pub fn new(names: Vec<String>, values: Vec<Vec<f64>>, endo_index: usize) -> Result<Self> {
        if names.is_empty() || names.len() != values.len() {
            return Err(Error::Contract(format!(
                "{} names for {} variables",
                names.len(),
                values.len()
            )));
        }
        let len = values[0].len();
        if values.iter().any(|r| r.len() != len) {
            return Err(Error::Contract("variables differ in length".into()));
        }
        if endo_index >= names.len() {
            return Err(Error::Contract(format!(
                "endogenous index {endo_index} out of range for {} variables",
                names.len()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Contract("series contains non-finite values".into()));
        }
        Ok(Self {
            names,
            values,
            endo_index,
            frequency: String::new(),
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_vars(&self) -> usize {
        self.values.len()
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn endo_index(&self) -> usize {
        self.endo_index
    }

    pub fn endo_name(&self) -> &str {
        &self.names[self.endo_index]
    }

    pub fn series(&self, var: usize) -> &[f64] {
        &self.values[var]
    }

    pub fn set_endo_index(&mut self, idx: usize) -> Result<()> {
        if idx >= self.n_vars() {
            return Err(Error::Contract(format!("endogenous index {idx} out of range")));
        }
        self.endo_index = idx;
        Ok(())
    }

    /// Selects the endogenous variable by column name.
    pub fn set_endo_name(&mut self, name: &str) -> Result<()> {
        let idx = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::config("data.target", format!("no column named `{name}`")))?;
        self.endo_index = idx;
        Ok(())
    }

    /// Time steps `range`, extended backwards by up to `context` steps of history.
    pub fn segment(&self, range: Range<usize>, context: usize) -> SeriesFrame {
        let start = range.start.saturating_sub(context);
        SeriesFrame {
            names: self.names.clone(),
            values: self
                .values
                .iter()
                .map(|r| r[start..range.end].to_vec())
                .collect(),
            endo_index: self.endo_index,
            frequency: self.frequency.clone(),
        }
    }

    /// Reorders variables; `order[i]` is the old index placed at position `i`.
    pub fn permute(&self, order: &[usize]) -> Result<SeriesFrame> {
        let mut seen = vec![false; self.n_vars()];
        for &o in order {
            if o >= self.n_vars() || std::mem::replace(&mut seen[o], true) {
                return Err(Error::Contract(format!("{order:?} is not a permutation")));
            }
        }
        if order.len() != self.n_vars() {
            return Err(Error::Contract(format!("{order:?} is not a permutation")));
        }
        let endo = order.iter().position(|&o| o == self.endo_index).unwrap();
        let mut out = SeriesFrame::new(
            order.iter().map(|&o| self.names[o].clone()).collect(),
            order.iter().map(|&o| self.values[o].clone()).collect(),
            endo,
        )?;
        out.frequency = self.frequency.clone();
        Ok(out)
    }
}

fn is_timestamp_header(h: &str) -> bool {
    matches!(h.trim().to_ascii_lowercase().as_str(), "date" | "timestamp")
}

/// Reads a headered CSV with one time step per row. A leading `date` or
/// `timestamp` column is dropped; the endogenous variable defaults to the
/// last column. Row numbers in errors count data rows from 1.
pub fn load_csv(path: impl AsRef<Path>) -> Result<SeriesFrame> {
    let path = path.as_ref();
    let ingest = |row: Option<usize>, message: String| Error::Ingest {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ingest(None, e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| ingest(None, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let skip = usize::from(headers.first().is_some_and(|h| is_timestamp_header(h)));
    let names: Vec<String> = headers[skip..].to_vec();
    if names.is_empty() {
        return Err(ingest(None, "no value columns".into()));
    }
    let mut values = vec![Vec::new(); names.len()];
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| ingest(Some(row), e.to_string()))?;
        if record.len() != headers.len() {
            return Err(ingest(
                Some(row),
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        for (c, cell) in record.iter().skip(skip).enumerate() {
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                ingest(
                    Some(row),
                    format!("non-numeric cell `{cell}` in column `{}`", names[c]),
                )
            })?;
            values[c].push(v);
        }
    }
    if values[0].is_empty() {
        return Err(ingest(None, "no data rows".into()));
    }
    let endo = names.len() - 1;
    let mut frame = SeriesFrame::new(names, values, endo)?;
    frame.frequency = "unspecified".into();
    Ok(frame)
}

/// Writes the frame in the same layout [`load_csv`] reads, with shortest
/// round-trip decimal formatting.
pub fn save_csv(frame: &SeriesFrame, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_io)?;
    w.write_record(frame.names()).map_err(csv_io)?;
    let mut record = Vec::with_capacity(frame.n_vars());
    for t in 0..frame.len() {
        record.clear();
        record.extend(frame.values.iter().map(|r| r[t].to_string()));
        w.write_record(&record).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Train/validation/test sizes, as absolute step counts or fractions of the series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitSpec {
    Counts { train: usize, val: usize, test: usize },
    Ratios { train: f64, val: f64, test: f64 },
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Ratios {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

/// Contiguous, non-overlapping segments in time order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChronoSplit {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

pub fn chrono_split(len: usize, spec: &SplitSpec) -> Result<ChronoSplit> {
    let (train, val, test) = match *spec {
        SplitSpec::Counts { train, val, test } => (train, val, test),
        SplitSpec::Ratios { train, val, test } => {
            if [train, val, test].iter().any(|r| !(0.0..=1.0).contains(r))
                || train + val + test > 1.0 + 1e-9
            {
                return Err(Error::config(
                    "split",
                    format!("ratios ({train}, {val}, {test}) must lie in [0,1] and sum to at most 1"),
                ));
            }
            let f = |r: f64| (r * len as f64).floor() as usize;
            (f(train), f(val), f(test))
        }
    };
    if train + val + test > len {
        return Err(Error::config(
            "split",
            format!("segments ({train}, {val}, {test}) exceed series length {len}"),
        ));
    }
    Ok(ChronoSplit {
        train: 0..train,
        val: train..train + val,
        test: train + val..train + val + test,
    })
}

/// Per-variable mean and standard deviation of the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZScoreStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub const ZSCORE_STD_FLOOR: f64 = 1e-8;

impl ZScoreStats {
    pub fn fit(train: &SeriesFrame) -> Self {
        let n = train.len() as f64;
        let (mut mean, mut std) = (Vec::new(), Vec::new());
        for r in &train.values {
            let mu = r.iter().sum::<f64>() / n;
            let var = r.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            mean.push(mu);
            std.push(var.sqrt().max(ZSCORE_STD_FLOOR));
        }
        Self { mean, std }
    }

    pub fn apply(&self, frame: &SeriesFrame) -> SeriesFrame {
        self.map(frame, |v, m, s| (v - m) / s)
    }

    pub fn invert(&self, frame: &SeriesFrame) -> SeriesFrame {
        self.map(frame, |v, m, s| v * s + m)
    }

    /// Raw-unit value of a standardized number for variable `var`.
    pub fn invert_value(&self, var: usize, v: f64) -> f64 {
        v * self.std[var] + self.mean[var]
    }

    fn map(&self, frame: &SeriesFrame, f: impl Fn(f64, f64, f64) -> f64) -> SeriesFrame {
        let mut out = frame.clone();
        for (i, r) in out.values.iter_mut().enumerate() {
            for v in r.iter_mut() {
                *v = f(*v, self.mean[i], self.std[i]);
            }
        }
        out
    }
}

/// One lookback/horizon pair cut from a frame.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample {
    /// `[1×T]`
    pub endo_look: Tensor,
    /// `[(N−1)×T]`, absent when the frame has a single variable.
    pub exo_look: Option<Tensor>,
    /// `[1×S]`
    pub endo_target: Tensor,
    /// `[(N−1)×S]`
    pub exo_target: Option<Tensor>,
    /// Position of the endogenous row in the frame's variable order.
    pub endo_index: usize,
    /// Offset of the lookback's first step within the source frame.
    pub start: usize,
}

impl WindowSample {
    pub fn lookback(&self) -> usize {
        self.endo_look.cols()
    }

    pub fn horizon(&self) -> usize {
        self.endo_target.cols()
    }

    pub fn n_vars(&self) -> usize {
        1 + self.exo_look.as_ref().map_or(0, Tensor::rows)
    }

    fn reassemble(&self, endo: &Tensor, exo: Option<&Tensor>) -> Tensor {
        let mut rows = exo.map(Tensor::to_rows).unwrap_or_default();
        rows.insert(self.endo_index, endo.row_slice(0).to_vec());
        Tensor::from_rows(&rows).expect("rows share a length")
    }

    /// All variables in frame order, `[N×T]`.
    pub fn full_lookback(&self) -> Tensor {
        self.reassemble(&self.endo_look, self.exo_look.as_ref())
    }

    /// All variables in frame order, `[N×S]`.
    pub fn full_target(&self) -> Tensor {
        self.reassemble(&self.endo_target, self.exo_target.as_ref())
    }
}

fn cut(frame: &SeriesFrame, range: Range<usize>) -> (Tensor, Option<Tensor>) {
    let e = frame.endo_index;
    let endo = Tensor::row(&frame.values[e][range.clone()]);
    let exo_rows: Vec<Vec<f64>> = (0..frame.n_vars())
        .filter(|&v| v != e)
        .map(|v| frame.values[v][range.clone()].to_vec())
        .collect();
    let exo = (!exo_rows.is_empty()).then(|| Tensor::from_rows(&exo_rows).unwrap());
    (endo, exo)
}

/// Window whose lookback starts at `start`.
pub fn sample_at(frame: &SeriesFrame, start: usize, lookback: usize, horizon: usize) -> WindowSample {
    let (endo_look, exo_look) = cut(frame, start..start + lookback);
    let (endo_target, exo_target) = cut(frame, start + lookback..start + lookback + horizon);
    WindowSample {
        endo_look,
        exo_look,
        endo_target,
        exo_target,
        endo_index: frame.endo_index,
        start,
    }
}

pub fn window_count(len: usize, lookback: usize, horizon: usize, stride: usize) -> usize {
    assert!(stride >= 1, "stride must be positive");
    match len.checked_sub(lookback + horizon) {
        Some(span) => span / stride + 1,
        None => 0,
    }
}

/// Every window with lookback `T` and horizon `S` in chronological order;
/// empty when the frame is shorter than `T + S`.
pub fn window_iter(
    frame: &SeriesFrame,
    lookback: usize,
    horizon: usize,
    stride: usize,
) -> impl Iterator<Item = WindowSample> + '_ {
    (0..window_count(frame.len(), lookback, horizon, stride))
        .map(move |i| sample_at(frame, i * stride, lookback, horizon))
}

/// Random-access window collection over a shared frame; samples are cut on demand.
#[derive(Clone, Debug)]
pub struct WindowSet {
    frame: Arc<SeriesFrame>,
    lookback: usize,
    horizon: usize,
    stride: usize,
    count: usize,
}

impl WindowSet {
    pub fn new(frame: Arc<SeriesFrame>, lookback: usize, horizon: usize, stride: usize) -> Self {
        let count = window_count(frame.len(), lookback, horizon, stride);
        Self {
            frame,
            lookback,
            horizon,
            stride,
            count,
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn frame(&self) -> &SeriesFrame {
        &self.frame
    }

    pub fn get(&self, i: usize) -> WindowSample {
        assert!(i < self.count, "window {i} out of {}", self.count);
        sample_at(&self.frame, i * self.stride, self.lookback, self.horizon)
    }

    pub fn iter(&self) -> impl Iterator<Item = WindowSample> + '_ {
        (0..self.count).map(|i| self.get(i))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskTarget {
    Endo,
    Exo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskFill {
    Zero,
    GaussianStdNormal,
}

/// Missing-value corruption of lookback windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSpec {
    pub target: MaskTarget,
    /// Fraction of the `T` lookback positions to corrupt.
    pub ratio: f64,
    pub fill: MaskFill,
    #[serde(default)]
    pub seed: u64,
    /// Exo only: draw positions independently per exogenous row instead of
    /// blanking all rows at the same positions.
    #[serde(default)]
    pub per_cell: bool,
}

impl MaskSpec {
    pub fn new(target: MaskTarget, ratio: f64, fill: MaskFill, seed: u64) -> Self {
        Self {
            target,
            ratio,
            fill,
            seed,
            per_cell: false,
        }
    }

    /// Same spec with the seed mixed with a window index, so every window gets
    /// its own reproducible draw.
    pub fn for_window(&self, index: usize) -> MaskSpec {
        let mut s = self.clone();
        s.seed = self
            .seed
            .wrapping_add((index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        s
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(Error::config(
                format!("{key}.ratio"),
                format!("{} outside [0, 1]", self.ratio),
            ));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let fill = match self.fill {
            MaskFill::Zero => "Zero",
            MaskFill::GaussianStdNormal => "Random",
        };
        let target = match self.target {
            MaskTarget::Endo => "Endo",
            MaskTarget::Exo => "Exo",
        };
        format!("{fill} {target} {:.0}%-Mask", self.ratio * 100.0)
    }

    fn masked_count(&self, len: usize) -> usize {
        ((self.ratio.clamp(0.0, 1.0) * len as f64).round() as usize).min(len)
    }
}

fn fill_value(fill: MaskFill, rng: &mut ChaCha8Rng) -> f64 {
    match fill {
        MaskFill::Zero => 0.0,
        MaskFill::GaussianStdNormal => StandardNormal.sample(rng),
    }
}

/// Corrupts `round(ratio·T)` lookback positions of the chosen side. Targets
/// are never touched.
pub fn apply_mask(sample: &WindowSample, spec: &MaskSpec) -> WindowSample {
    let mut out = sample.clone();
    let t = sample.lookback();
    let count = spec.masked_count(t);
    if count == 0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.target {
        MaskTarget::Endo => {
            let positions = sample_indices(&mut rng, t, count);
            let data = out.endo_look.data_mut();
            for p in positions.iter() {
                data[p] = fill_value(spec.fill, &mut rng);
            }
        }
        MaskTarget::Exo => {
            let Some(exo) = out.exo_look.as_mut() else {
                return out;
            };
            let rows = exo.rows();
            let data = exo.data_mut();
            if spec.per_cell {
                for r in 0..rows {
                    for p in sample_indices(&mut rng, t, count).iter() {
                        data[r * t + p] = fill_value(spec.fill, &mut rng);
                    }
                }
            } else {
                for p in sample_indices(&mut rng, t, count).iter() {
                    for r in 0..rows {
                        data[r * t + p] = fill_value(spec.fill, &mut rng);
                    }
                }
            }
        }
    }
    out
}

/// Parameters of the exogenous-driven synthetic series.
///
/// Each exogenous row is an AR(1) process plus a sinusoid of random period
/// and phase; the endogenous row is a weighted sum of the exogenous rows
/// `lag` steps earlier plus Gaussian noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_vars: usize,
    pub length: usize,
    /// One weight per exogenous variable; defaults to 1 each.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    pub lag: usize,
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "SynthSpec::default_ar_coef")]
    pub ar_coef: f64,
    #[serde(default = "SynthSpec::default_sine_amplitude")]
    pub sine_amplitude: f64,
}

impl SynthSpec {
    fn default_ar_coef() -> f64 {
        0.999
    }

    fn default_sine_amplitude() -> f64 {
        4.0
    }

    pub fn new(n_vars: usize, length: usize, lag: usize, noise_std: f64, seed: u64) -> Self {
        Self {
            n_vars,
            length,
            weights: None,
            lag,
            noise_std,
            seed,
            ar_coef: Self::default_ar_coef(),
            sine_amplitude: Self::default_sine_amplitude(),
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn resolved_weights(&self) -> Vec<f64> {
        self.weights
            .clone()
            .unwrap_or_else(|| vec![1.0; self.n_vars.saturating_sub(1)])
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::config(format!("{key}.{field}"), msg));
        if self.n_vars < 2 {
            return bad("n_vars", format!("need at least 2 variables, got {}", self.n_vars));
        }
        if self.lag < 1 {
            return bad("lag", "must be at least 1".into());
        }
        if self.length < 2 {
            return bad("length", "must be at least 2".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std", format!("{} is not a valid std", self.noise_std));
        }
        if self.ar_coef.abs() >= 1.0 {
            return bad("ar_coef", "must lie strictly inside (-1, 1)".into());
        }
        if self.resolved_weights().len() != self.n_vars - 1 {
            return bad(
                "weights",
                format!("expected {} weights", self.n_vars - 1),
            );
        }
        Ok(())
    }
}

const SYNTH_BURN_IN: usize = 200;

/// Generates the frame: exogenous columns `exo_1..`, endogenous `endo` last.
pub fn synth_exo_driven(spec: &SynthSpec) -> Result<SeriesFrame> {
    spec.validate("synthetic")?;
    let weights = spec.resolved_weights();
    let n_exo = spec.n_vars - 1;
    let total = spec.length + spec.lag;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let innovation_std = (1.0 - spec.ar_coef * spec.ar_coef).sqrt();

    let mut exo_full = Vec::with_capacity(n_exo);
    for _ in 0..n_exo {
        let period: f64 = rng.random_range(12.0..48.0);
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let mut state = 0.0;
        for _ in 0..SYNTH_BURN_IN {
            let eta: f64 = StandardNormal.sample(&mut rng);
            state = spec.ar_coef * state + innovation_std * eta;
        }
        let mut row = Vec::with_capacity(total);
        for u in 0..total {
            let eta: f64 = StandardNormal.sample(&mut rng);
            state = spec.ar_coef * state + innovation_std * eta;
            let seasonal =
                spec.sine_amplitude * (std::f64::consts::TAU * u as f64 / period + phase).sin();
            row.push(state + seasonal);
        }
        exo_full.push(row);
    }

    let noise = Normal::new(0.0, spec.noise_std.max(0.0)).expect("finite std");
    let endo: Vec<f64> = (0..spec.length)
        .map(|t| {
            let signal: f64 = weights.iter().zip(&exo_full).map(|(w, x)| w * x[t]).sum();
            let eps = if spec.noise_std > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            signal + eps
        })
        .collect();

    let mut names: Vec<String> = (1..=n_exo).map(|j| format!("exo_{j}")).collect();
    names.push("endo".into());
    let mut values: Vec<Vec<f64>> = exo_full
        .into_iter()
        .map(|row| row[spec.lag..].to_vec())
        .collect();
    values.push(endo);
    let mut frame = SeriesFrame::new(names, values, n_exo)?;
    frame.frequency = "synthetic".into();
    Ok(frame)
}
