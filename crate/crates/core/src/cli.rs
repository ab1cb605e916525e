//! Command implementations behind the `crosslinear` binary: run
//! configuration, result documents, and the train, ablate, mask-study,
//! gradcheck, export-weights and synth commands.
//!
//! A run configuration is a TOML file:
//!
//! ```toml
//! out_dir = "out/synthetic"
//!
//! [data.synthetic]
//! n_vars = 5
//! length = 5000
//! lag = 3
//! noise_std = 0.1
//!
//! [split]
//! train = 0.7
//! val = 0.1
//! test = 0.2
//!
//! [model]
//! lookback = 48
//! horizon = 12
//! patch_len = 8
//!
//! [train]
//! lr = 1e-3
//! batch_size = 8
//! lr_schedule = "constant"
//! ```
//!
//! Unknown keys are rejected and errors name the offending key path.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{
    load_csv, sample_at, save_csv, synth_exo_driven, MaskFill, MaskSpec, MaskTarget, SeriesFrame,
    SplitSpec, SynthSpec,
};
use crate::error::{Error, Result};
use crate::layers::{self, EmbedVariant, PeMode};
use crate::model::{correlation_matrix, CrossLinear, ForecastMode, Forecaster, ModelConfig};
use crate::ndgrad::{finite_diff_check_with, BackwardFault, GradCheckReport, Tensor, Var};
use crate::train::{
    evaluate, load_checkpoint, save_checkpoint, train, Dataset, EvalOptions, Metrics, TrainConfig,
    TrainReport,
};

/// Where the series comes from: a CSV file or the synthetic generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Relative paths resolve against the configuration file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SynthSpec>,
    /// Endogenous column name; defaults to the last column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Train-split z-scoring before windowing.
    #[serde(default = "yes")]
    pub standardize: bool,
}

fn yes() -> bool {
    true
}

/// Model settings; `n_vars` and `endo_index` come from the data when omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub lookback: usize,
    pub horizon: usize,
    #[serde(default = "ModelSection::default_patch_len")]
    pub patch_len: usize,
    #[serde(default = "ModelSection::default_hidden_dim")]
    pub hidden_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_vars: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endo_index: Option<usize>,
    #[serde(default = "ModelSection::default_variant")]
    pub variant: EmbedVariant,
    #[serde(default = "ModelSection::default_mode")]
    pub mode: ForecastMode,
    #[serde(default = "ModelSection::default_kernel_size")]
    pub kernel_size: usize,
    #[serde(default = "ModelSection::default_blend")]
    pub alpha_init: f64,
    #[serde(default = "ModelSection::default_blend")]
    pub beta_init: f64,
    #[serde(default = "ModelSection::default_pe_mode")]
    pub pe_mode: PeMode,
    #[serde(default = "ModelSection::default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSection {
    fn default_patch_len() -> usize {
        16
    }
    fn default_hidden_dim() -> usize {
        32
    }
    fn default_variant() -> EmbedVariant {
        EmbedVariant::Sum
    }
    fn default_mode() -> ForecastMode {
        ForecastMode::ManyToOne
    }
    fn default_kernel_size() -> usize {
        3
    }
    fn default_blend() -> f64 {
        0.9
    }
    fn default_pe_mode() -> PeMode {
        PeMode::LearnableSinusoidalInit
    }
    fn default_eps() -> f64 {
        layers::DEFAULT_NORM_EPS
    }

    /// Full model configuration for a frame.
    pub fn resolve(&self, frame: &SeriesFrame) -> Result<ModelConfig> {
        let n_vars = frame.n_vars();
        if let Some(n) = self.n_vars.filter(|&n| n != n_vars) {
            return Err(Error::config(
                "model.n_vars",
                format!("{n} given but the data has {n_vars} variables"),
            ));
        }
        let endo_index = self.endo_index.unwrap_or(frame.endo_index());
        let config = ModelConfig {
            lookback: self.lookback,
            horizon: self.horizon,
            patch_len: self.patch_len,
            hidden_dim: self.hidden_dim,
            n_vars,
            endo_index,
            variant: self.variant,
            mode: self.mode,
            kernel_size: self.kernel_size,
            alpha_init: self.alpha_init,
            beta_init: self.beta_init,
            pe_mode: self.pe_mode,
            eps: self.eps,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "RunConfig::default_out_dir")]
    pub out_dir: PathBuf,
    pub data: DataSection,
    #[serde(default)]
    pub split: SplitSpec,
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainConfig,
    /// Replaces the default masking grid of `mask-study`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mask: Vec<MaskSpec>,
}

impl RunConfig {
    fn default_out_dir() -> PathBuf {
        PathBuf::from("out")
    }

    /// Parses TOML text; relative data paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| Error::config("<document>", e.to_string().trim_end().to_string()))?;
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::config(key, e.into_inner().to_string().trim_end().to_string())
        })?;
        if let Some(csv) = cfg.data.csv.as_mut() {
            if csv.is_relative() {
                *csv = base_dir.join(&*csv);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config("<file>", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<document>", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data.csv, &self.data.synthetic) {
            (Some(_), Some(_)) => {
                return Err(Error::config("data", "give either `csv` or `synthetic`, not both"))
            }
            (None, None) => return Err(Error::config("data", "missing `csv` or `synthetic`")),
            (None, Some(s)) => s.validate("data.synthetic")?,
            (Some(_), None) => {}
        }
        self.train.validate()?;
        for (i, m) in self.mask.iter().enumerate() {
            m.validate(&format!("mask[{i}]"))?;
        }
        Ok(())
    }

    pub fn apply(&mut self, ov: &Overrides) {
        if let Some(out) = &ov.out {
            self.out_dir = out.clone();
        }
        if let Some(seed) = ov.seed {
            self.model.seed = seed;
            self.train.seed = seed;
        }
    }

    /// Loads or generates the series and applies the target column choice.
    pub fn frame(&self) -> Result<SeriesFrame> {
        let mut frame = match (&self.data.csv, &self.data.synthetic) {
            (Some(path), _) => load_csv(path)?,
            (None, Some(spec)) => synth_exo_driven(spec)?,
            (None, None) => return Err(Error::config("data", "missing `csv` or `synthetic`")),
        };
        if let Some(name) = &self.data.target {
            frame.set_endo_name(name)?;
        }
        Ok(frame)
    }
}

/// Command-line overrides shared by the commands.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub raw_units: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub variable_names: Vec<String>,
    pub endo_name: String,
    pub n_vars: usize,
    pub endo_index: usize,
    pub n_patches: usize,
    pub param_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    pub horizon: usize,
    pub mse: f64,
    pub mae: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: EmbedVariant,
    pub label: String,
    pub mse: f64,
    pub mae: f64,
    pub best_epoch: usize,
    pub param_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskRow {
    pub label: String,
    pub mask: Option<MaskSpec>,
    pub mse: f64,
    pub mae: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub version: String,
    pub unix_time: u64,
}

pub const RESULT_FORMAT_VERSION: u32 = 1;

/// Everything one command produced, with the configuration that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultDoc {
    pub format_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub derived: Derived,
    /// `"zscore"` or `"raw"`; applies to `metrics`, `ablation` and `mask_grid`.
    pub units: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<TrainReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub metrics: Vec<HorizonMetrics>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ablation: Vec<AblationRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mask_grid: Vec<MaskRow>,
    pub provenance: Provenance,
}

impl ResultDoc {
    /// The numeric outcome only, serialized; equal across reruns with equal seeds.
    pub fn metrics_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Outcome<'a> {
            metrics: &'a [HorizonMetrics],
            ablation: &'a [AblationRow],
            mask_grid: &'a [MaskRow],
            test: Option<(f64, f64)>,
            best_epoch: Option<usize>,
        }
        Ok(serde_json::to_string(&Outcome {
            metrics: &self.metrics,
            ablation: &self.ablation,
            mask_grid: &self.mask_grid,
            test: self.report.as_ref().map(|r| (r.test_mse, r.test_mae)),
            best_epoch: self.report.as_ref().map(|r| r.best_epoch),
        })?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Frame, dataset and model configuration shared by the training commands.
pub struct Prepared {
    pub frame: SeriesFrame,
    pub data: Dataset,
    pub model_config: ModelConfig,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let frame = cfg.frame()?;
    let model_config = cfg.model.resolve(&frame)?;
    let mut frame = frame;
    frame.set_endo_index(model_config.endo_index)?;
    let data = Dataset::prepare(
        &frame,
        &cfg.split,
        model_config.lookback,
        model_config.horizon,
        cfg.data.standardize,
    )?;
    Ok(Prepared {
        frame,
        data,
        model_config,
    })
}

fn derived(p: &Prepared, model: &CrossLinear) -> Derived {
    Derived {
        variable_names: p.frame.names().to_vec(),
        endo_name: p.frame.endo_name().to_string(),
        n_vars: p.frame.n_vars(),
        endo_index: p.frame.endo_index(),
        n_patches: p.model_config.n_patches(),
        param_count: model.param_count(),
    }
}

fn provenance(seed: u64) -> Provenance {
    Provenance {
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        unix_time: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    }
}

fn units(ov: &Overrides) -> String {
    if ov.raw_units { "raw" } else { "zscore" }.to_string()
}

fn test_metrics(model: &CrossLinear, p: &Prepared, ov: &Overrides, mask: Option<&MaskSpec>) -> Result<Metrics> {
    let opts = EvalOptions {
        mask,
        raw_units: if ov.raw_units { p.data.zscore.as_ref() } else { None },
    };
    evaluate(model, &p.data.test, &opts)
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    Ok(&cfg.out_dir)
}

fn load_with(config_path: &Path, ov: &Overrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(config_path)?;
    cfg.apply(ov);
    Ok(cfg)
}

/// Trains one model; writes `result.json`, `checkpoint.json` and the
/// effective `config.toml` to the output directory.
pub fn cmd_train(config_path: &Path, ov: &Overrides) -> Result<ResultDoc> {
    let cfg = load_with(config_path, ov)?;
    let p = prepare(&cfg)?;
    let mut model = CrossLinear::new(p.model_config.clone())?;
    let report = train(&mut model, &p.data, &cfg.train)?;
    let test = test_metrics(&model, &p, ov, None)?;
    println!(
        "{} {}->{} test mse {:.6} mae {:.6} (best epoch {})",
        p.model_config.variant.label(),
        p.model_config.lookback,
        p.model_config.horizon,
        test.mse,
        test.mae,
        report.best_epoch
    );
    let doc = ResultDoc {
        format_version: RESULT_FORMAT_VERSION,
        command: "train".into(),
        derived: derived(&p, &model),
        units: units(ov),
        report: Some(report),
        metrics: vec![HorizonMetrics {
            horizon: p.model_config.horizon,
            mse: test.mse,
            mae: test.mae,
        }],
        ablation: vec![],
        mask_grid: vec![],
        provenance: provenance(cfg.train.seed),
        config: cfg.clone(),
    };
    let dir = out_dir(&cfg)?;
    doc.write(dir.join("result.json"))?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    save_checkpoint(&model, p.frame.names(), dir.join("checkpoint.json"))?;
    Ok(doc)
}

/// Trains every embedding variant on identical data and seeds.
pub fn cmd_ablate(config_path: &Path, ov: &Overrides) -> Result<ResultDoc> {
    let cfg = load_with(config_path, ov)?;
    let p = prepare(&cfg)?;
    let mut rows = Vec::new();
    let mut last = None;
    for variant in EmbedVariant::ALL {
        let mut mc = p.model_config.clone();
        mc.variant = variant;
        let mut model = CrossLinear::new(mc)?;
        let report = train(&mut model, &p.data, &cfg.train)?;
        let test = test_metrics(&model, &p, ov, None)?;
        rows.push(AblationRow {
            variant,
            label: variant.label().into(),
            mse: test.mse,
            mae: test.mae,
            best_epoch: report.best_epoch,
            param_count: model.param_count(),
        });
        last = Some(model);
    }
    println!("{:<12} {:>10} {:>10}", "variant", "MSE", "MAE");
    for r in &rows {
        println!("{:<12} {:>10.6} {:>10.6}", r.label, r.mse, r.mae);
    }
    let model = last.expect("four variants");
    let doc = ResultDoc {
        format_version: RESULT_FORMAT_VERSION,
        command: "ablate".into(),
        derived: derived(&p, &model),
        units: units(ov),
        report: None,
        metrics: vec![],
        ablation: rows,
        mask_grid: vec![],
        provenance: provenance(cfg.train.seed),
        config: cfg.clone(),
    };
    doc.write(out_dir(&cfg)?.join("ablation.json"))?;
    Ok(doc)
}

/// Zero and standard-normal fills over endogenous and exogenous lookbacks at
/// 50% and 100%, seeded from `seed`.
pub fn default_mask_grid(seed: u64) -> Vec<MaskSpec> {
    let mut grid = Vec::new();
    for fill in [MaskFill::Zero, MaskFill::GaussianStdNormal] {
        for target in [MaskTarget::Endo, MaskTarget::Exo] {
            for ratio in [0.5, 1.0] {
                let s = seed.wrapping_add(grid.len() as u64 + 1);
                grid.push(MaskSpec::new(target, ratio, fill, s));
            }
        }
    }
    grid
}

/// Trains once (or loads `checkpoint`) and evaluates the test set unmasked
/// and under each masking cell.
pub fn cmd_mask_study(config_path: &Path, ov: &Overrides, checkpoint: Option<&Path>) -> Result<ResultDoc> {
    let cfg = load_with(config_path, ov)?;
    let p = prepare(&cfg)?;
    let (model, report) = match checkpoint {
        Some(path) => {
            let (model, _) = load_checkpoint(path)?;
            if model.config.n_vars != p.frame.n_vars() {
                return Err(Error::Checkpoint(format!(
                    "checkpoint expects {} variables, data has {}",
                    model.config.n_vars,
                    p.frame.n_vars()
                )));
            }
            (model, None)
        }
        None => {
            let mut model = CrossLinear::new(p.model_config.clone())?;
            let report = train(&mut model, &p.data, &cfg.train)?;
            (model, Some(report))
        }
    };
    let cells = if cfg.mask.is_empty() {
        default_mask_grid(cfg.train.seed)
    } else {
        cfg.mask.clone()
    };
    let clean = test_metrics(&model, &p, ov, None)?;
    let mut grid = vec![MaskRow {
        label: "No Mask".into(),
        mask: None,
        mse: clean.mse,
        mae: clean.mae,
    }];
    for spec in cells {
        let m = test_metrics(&model, &p, ov, Some(&spec))?;
        grid.push(MaskRow {
            label: spec.label(),
            mask: Some(spec),
            mse: m.mse,
            mae: m.mae,
        });
    }
    println!("{:<24} {:>10} {:>10}", "setting", "MSE", "MAE");
    for r in &grid {
        println!("{:<24} {:>10.6} {:>10.6}", r.label, r.mse, r.mae);
    }
    let doc = ResultDoc {
        format_version: RESULT_FORMAT_VERSION,
        command: "mask-study".into(),
        derived: derived(&p, &model),
        units: units(ov),
        report,
        metrics: vec![],
        ablation: vec![],
        mask_grid: grid,
        provenance: provenance(cfg.train.seed),
        config: cfg.clone(),
    };
    doc.write(out_dir(&cfg)?.join("mask_study.json"))?;
    Ok(doc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckDoc {
    pub seed: u64,
    pub eps: f64,
    pub tolerance: f64,
    pub groups: Vec<GradGroup>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradGroup {
    pub name: String,
    pub elements: usize,
    pub max_relative_error: f64,
}

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
pub const GRADCHECK_EPS: f64 = 1e-4;

/// Finite-difference check of every trainable parameter group of a freshly
/// initialized model on one random window.
pub fn gradcheck_model(config: &ModelConfig, seed: u64, fault: Option<BackwardFault>) -> Result<GradCheckReport> {
    let mut mc = config.clone();
    mc.seed = seed;
    let model = CrossLinear::new(mc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0FFEE);
    let len = config.lookback + config.horizon;
    let values: Vec<Vec<f64>> = (0..config.n_vars)
        .map(|_| (0..len).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let names = (0..config.n_vars).map(|i| format!("v{i}")).collect();
    let frame = SeriesFrame::new(names, values, config.endo_index)?;
    let sample = sample_at(&frame, 0, config.lookback, config.horizon);
    let target = model.target(&sample);

    let all_names = model.param_names();
    let all = model.parameters();
    let checked: Vec<(String, Tensor)> = all_names
        .iter()
        .zip(&all)
        .filter(|(_, t)| t.requires_grad())
        .map(|(n, t)| (n.clone(), (*t).clone()))
        .collect();
    finite_diff_check_with(
        |g, vars| {
            let mut it = vars.iter();
            let full: Vec<Var> = all
                .iter()
                .map(|t| {
                    if t.requires_grad() {
                        *it.next().expect("one handle per trainable tensor")
                    } else {
                        g.constant(t)
                    }
                })
                .collect();
            let pred = model.forward(g, &full, &sample)?;
            let tgt = g.constant(&target);
            g.mse(pred, tgt)
        },
        &checked,
        GRADCHECK_EPS,
        fault,
    )
}

/// Runs [`gradcheck_model`] on the configured model, or the default
/// 8-variable 96→96 model when no configuration is given.
pub fn cmd_gradcheck(config_path: Option<&Path>, seed: u64, fault: Option<BackwardFault>) -> Result<GradCheckDoc> {
    let config = match config_path {
        Some(path) => {
            let cfg = RunConfig::load(path)?;
            let frame = cfg.frame()?;
            cfg.model.resolve(&frame)?
        }
        None => ModelConfig::default(),
    };
    let report = gradcheck_model(&config, seed, fault)?;
    let groups: Vec<GradGroup> = report
        .groups
        .iter()
        .map(|g| GradGroup {
            name: g.name.clone(),
            elements: g.elements,
            max_relative_error: g.max_error,
        })
        .collect();
    for g in &groups {
        let mark = if g.max_relative_error < GRADCHECK_TOLERANCE { "ok" } else { "FAIL" };
        println!(
            "{:<14} {:>6} elements  max rel err {:.3e}  {mark}",
            g.name, g.elements, g.max_relative_error
        );
    }
    Ok(GradCheckDoc {
        seed,
        eps: GRADCHECK_EPS,
        tolerance: GRADCHECK_TOLERANCE,
        passed: report.passes(GRADCHECK_TOLERANCE),
        groups,
    })
}

/// Writes the tap-summed kernel of a checkpoint as a labelled CSV matrix:
/// one row per output channel, one column per dataset variable.
pub fn cmd_export_weights(checkpoint: &Path, out: &Path) -> Result<Tensor> {
    let (model, stored_names) = load_checkpoint(checkpoint)?;
    let c = &model.config;
    let names: Vec<String> = if stored_names.len() == c.n_vars {
        stored_names
    } else {
        (0..c.n_vars).map(|i| format!("var_{i}")).collect()
    };
    let raw = correlation_matrix(&model.params.cross);
    let channel_var = c.kernel_input_variables();
    let mut by_var = vec![0.0; raw.rows() * c.n_vars];
    for r in 0..raw.rows() {
        for (ch, &v) in channel_var.iter().enumerate() {
            by_var[r * c.n_vars + v] = raw.at(r, ch);
        }
    }
    let matrix = Tensor::new(&[raw.rows(), c.n_vars], by_var)?;
    let row_labels: Vec<String> = match c.mode {
        ForecastMode::ManyToOne => vec![names[c.endo_index].clone()],
        ForecastMode::ManyToMany => names.clone(),
    };
    let mut w = csv::Writer::from_path(out).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let mut header = vec!["output".to_string()];
    header.extend(names);
    w.write_record(&header).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for (r, label) in row_labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend(matrix.row_slice(r).iter().map(f64::to_string));
        w.write_record(&rec).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(matrix)
}

/// Generator settings read by `synth`: a TOML table of [`SynthSpec`] fields.
pub fn load_synth_spec(path: &Path) -> Result<SynthSpec> {
    let text = std::fs::read_to_string(path)?;
    let de = toml::Deserializer::parse(&text)
        .map_err(|e| Error::config("<document>", e.to_string().trim_end().to_string()))?;
    let spec: SynthSpec = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        Error::config(key, e.into_inner().to_string().trim_end().to_string())
    })?;
    spec.validate("synthetic")?;
    Ok(spec)
}

pub fn cmd_synth(spec: &SynthSpec, out: &Path) -> Result<SeriesFrame> {
    let frame = synth_exo_driven(spec)?;
    save_csv(&frame, out)?;
    println!(
        "wrote {} variables x {} steps to {}",
        frame.n_vars(),
        frame.len(),
        out.display()
    );
    Ok(frame)
}
