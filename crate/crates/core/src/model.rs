//! The assembled forecaster in many-to-one and many-to-many modes, losses and
//! metrics, the embedding as a plug-in for a linear host, and the variable
//! dependency matrix read off the convolution kernel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::WindowSample;
use crate::error::{Error, Result};
use crate::layers::{
    self, de_norm_node, embed_variant, instance_norm, stack_inputs, CrossCorrParams,
    CrossCorrVars, EmbedVariant, PatchHeadParams, PatchHeadVars, PeMode,
};
use crate::ndgrad::{Graph, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMode {
    /// Forecast the endogenous variable from all variables.
    ManyToOne,
    /// Forecast every variable, with weights shared across channels.
    ManyToMany,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub patch_len: usize,
    pub hidden_dim: usize,
    pub n_vars: usize,
    pub endo_index: usize,
    pub variant: EmbedVariant,
    pub mode: ForecastMode,
    pub kernel_size: usize,
    pub alpha_init: f64,
    pub beta_init: f64,
    pub pe_mode: PeMode,
    pub eps: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            lookback: 96,
            horizon: 96,
            patch_len: 16,
            hidden_dim: 32,
            n_vars: 8,
            endo_index: 7,
            variant: EmbedVariant::Sum,
            mode: ForecastMode::ManyToOne,
            kernel_size: 3,
            alpha_init: 0.9,
            beta_init: 0.9,
            pe_mode: PeMode::LearnableSinusoidalInit,
            eps: layers::DEFAULT_NORM_EPS,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Checks every invariant, reporting the first violation as `model.<field>`.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::config(format!("model.{field}"), msg));
        if self.patch_len < 1 {
            return bad("patch_len", "must be at least 1".into());
        }
        if self.lookback < 2 {
            return bad("lookback", format!("{} is shorter than 2", self.lookback));
        }
        if self.patch_len > self.lookback {
            return bad(
                "patch_len",
                format!("{} exceeds lookback {}", self.patch_len, self.lookback),
            );
        }
        if self.horizon < 1 {
            return bad("horizon", "must be at least 1".into());
        }
        if self.hidden_dim < 1 {
            return bad("hidden_dim", "must be at least 1".into());
        }
        if self.n_vars < 1 {
            return bad("n_vars", "must be at least 1".into());
        }
        if self.endo_index >= self.n_vars {
            return bad(
                "endo_index",
                format!("{} out of range for {} variables", self.endo_index, self.n_vars),
            );
        }
        if self.kernel_size.is_multiple_of(2) {
            return bad("kernel_size", format!("{} is not odd", self.kernel_size));
        }
        if !self.alpha_init.is_finite() {
            return bad("alpha_init", "must be finite".into());
        }
        if !self.beta_init.is_finite() {
            return bad("beta_init", "must be finite".into());
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad("eps", format!("{} is not a valid epsilon", self.eps));
        }
        Ok(())
    }

    /// Length of the embedded sequence fed to patching.
    pub fn embedded_len(&self) -> usize {
        self.variant.embedded_len(self.lookback)
    }

    /// Number of patches `k`.
    pub fn n_patches(&self) -> usize {
        self.embedded_len().div_ceil(self.patch_len)
    }

    /// Dataset variable feeding each convolution input channel. Many-to-one
    /// stacks exogenous variables first and the endogenous one last.
    pub fn kernel_input_variables(&self) -> Vec<usize> {
        match self.mode {
            ForecastMode::ManyToOne => (0..self.n_vars)
                .filter(|&v| v != self.endo_index)
                .chain([self.endo_index])
                .collect(),
            ForecastMode::ManyToMany => (0..self.n_vars).collect(),
        }
    }

    /// Convolution output channels: 1, or one per variable in many-to-many mode.
    pub fn cross_channels(&self) -> usize {
        match self.mode {
            ForecastMode::ManyToOne => 1,
            ForecastMode::ManyToMany => self.n_vars,
        }
    }
}

/// Every learnable of the forecaster.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossLinearParams {
    pub cross: CrossCorrParams,
    pub patch_head: PatchHeadParams,
}

/// Parameter names in the canonical order used by graphs, optimizers and checkpoints.
pub const PARAM_NAMES: [&str; 9] = [
    "cross.kernel",
    "cross.bias",
    "cross.alpha",
    "head.proj1_w",
    "head.proj1_b",
    "head.pos_emb",
    "head.beta",
    "head.proj2_w",
    "head.proj2_b",
];

impl CrossLinearParams {
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let cross = CrossCorrParams::init(
            config.cross_channels(),
            config.n_vars,
            config.kernel_size,
            config.alpha_init,
            &mut rng,
        );
        let patch_head = PatchHeadParams::init(
            config.patch_len,
            config.hidden_dim,
            config.n_patches(),
            config.horizon,
            config.beta_init,
            config.pe_mode,
            &mut rng,
        );
        Ok(Self { cross, patch_head })
    }

    pub fn tensors(&self) -> [&Tensor; 9] {
        let (c, h) = (&self.cross, &self.patch_head);
        [
            &c.kernel,
            &c.bias,
            c.alpha.as_tensor(),
            &h.proj1_w,
            &h.proj1_b,
            &h.pos_emb,
            h.beta.as_tensor(),
            &h.proj2_w,
            &h.proj2_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 9] {
        let (c, h) = (&mut self.cross, &mut self.patch_head);
        [
            &mut c.kernel,
            &mut c.bias,
            c.alpha.as_tensor_mut(),
            &mut h.proj1_w,
            &mut h.proj1_b,
            &mut h.pos_emb,
            h.beta.as_tensor_mut(),
            &mut h.proj2_w,
            &mut h.proj2_b,
        ]
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.tensors()
            .iter()
            .filter(|t| t.requires_grad())
            .map(|t| t.len())
            .sum()
    }

    /// Checks the parameter shapes against a configuration.
    pub fn check_shapes(&self, config: &ModelConfig) -> Result<()> {
        let expected = Self::init_shapes(config);
        for ((name, want), t) in PARAM_NAMES.iter().zip(expected).zip(self.tensors()) {
            if t.shape() != want.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name} has shape {:?}, config implies {want:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }

    fn init_shapes(c: &ModelConfig) -> [Vec<usize>; 9] {
        let k = c.n_patches();
        [
            vec![c.cross_channels(), c.n_vars, c.kernel_size],
            vec![c.cross_channels()],
            vec![1],
            vec![c.patch_len, c.hidden_dim],
            vec![c.hidden_dim],
            vec![k, c.hidden_dim],
            vec![1],
            vec![k * c.hidden_dim, c.horizon],
            vec![c.horizon],
        ]
    }
}

/// Graph handles for [`CrossLinearParams`].
#[derive(Clone, Copy, Debug)]
pub struct ModelVars {
    pub cross: CrossCorrVars,
    pub head: PatchHeadVars,
}

impl ModelVars {
    /// Interprets handles given in [`PARAM_NAMES`] order.
    pub fn from_slice(v: &[Var]) -> Result<Self> {
        let &[kernel, bias, alpha, proj1_w, proj1_b, pos_emb, beta, proj2_w, proj2_b] = v else {
            return Err(Error::Contract(format!(
                "expected {} parameter handles, got {}",
                PARAM_NAMES.len(),
                v.len()
            )));
        };
        Ok(Self {
            cross: CrossCorrVars {
                kernel,
                bias,
                alpha,
            },
            head: PatchHeadVars {
                proj1_w,
                proj1_b,
                pos_emb,
                beta,
                proj2_w,
                proj2_b,
            },
        })
    }
}

/// A forecast together with whether de-normalization has been applied.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastOutput {
    /// `[1×S]` many-to-one, `[N×S]` many-to-many.
    pub pred: Tensor,
    pub denormalized: bool,
}

/// Anything trainable by [`crate::train::train`].
pub trait Forecaster {
    fn param_names(&self) -> Vec<String>;
    fn parameters(&self) -> Vec<&Tensor>;
    fn parameters_mut(&mut self) -> Vec<&mut Tensor>;

    /// Records the de-normalized forecast for one window; `vars` are the
    /// parameters bound in [`Forecaster::parameters`] order.
    fn forward(&self, g: &mut Graph, vars: &[Var], sample: &WindowSample) -> Result<Var>;

    /// The values the forecast is scored against.
    fn target(&self, sample: &WindowSample) -> Tensor;

    fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.parameters().into_iter().map(|t| g.leaf(t)).collect()
    }

    fn predict(&self, sample: &WindowSample) -> Result<Tensor> {
        let mut g = Graph::new();
        let vars: Vec<Var> = self.parameters().into_iter().map(|t| g.constant(t)).collect();
        let out = self.forward(&mut g, &vars, sample)?;
        Ok(g.tensor(out))
    }

    fn param_count(&self) -> usize {
        self.parameters()
            .iter()
            .filter(|t| t.requires_grad())
            .map(|t| t.len())
            .sum()
    }
}

/// The full forecaster: configuration plus parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossLinear {
    pub config: ModelConfig,
    pub params: CrossLinearParams,
}

impl CrossLinear {
    pub fn new(config: ModelConfig) -> Result<Self> {
        let params = CrossLinearParams::init(&config)?;
        Ok(Self { config, params })
    }

    pub fn from_parts(config: ModelConfig, params: CrossLinearParams) -> Result<Self> {
        config.validate()?;
        params.check_shapes(&config)?;
        Ok(Self { config, params })
    }

    fn require_mode(&self, mode: ForecastMode) -> Result<()> {
        if self.config.mode != mode {
            return Err(Error::config(
                "model.mode",
                format!("operation needs {mode:?}, model is {:?}", self.config.mode),
            ));
        }
        Ok(())
    }

    /// Many-to-one forecast `[1×S]` in the units of `endo`.
    pub fn forward_m2o(&self, endo: &Tensor, exo: Option<&Tensor>) -> Result<ForecastOutput> {
        let mut g = Graph::new();
        let vars = self.bind_constants(&mut g)?;
        let out = self.graph_m2o(&mut g, &vars, endo, exo)?;
        Ok(ForecastOutput {
            pred: g.tensor(out),
            denormalized: true,
        })
    }

    /// Many-to-many forecast `[N×S]`, row `i` in the units of `x` row `i`.
    pub fn forward_m2m(&self, x: &Tensor) -> Result<ForecastOutput> {
        let mut g = Graph::new();
        let vars = self.bind_constants(&mut g)?;
        let out = self.graph_m2m(&mut g, &vars, x)?;
        Ok(ForecastOutput {
            pred: g.tensor(out),
            denormalized: true,
        })
    }

    fn bind_constants(&self, g: &mut Graph) -> Result<ModelVars> {
        let v: Vec<Var> = self.params.tensors().iter().map(|t| g.constant(t)).collect();
        ModelVars::from_slice(&v)
    }

    pub fn graph_m2o(
        &self,
        g: &mut Graph,
        vars: &ModelVars,
        endo: &Tensor,
        exo: Option<&Tensor>,
    ) -> Result<Var> {
        self.require_mode(ForecastMode::ManyToOne)?;
        let c = &self.config;
        let n_exo = exo.map_or(0, Tensor::rows);
        if endo.shape() != [1, c.lookback] || n_exo + 1 != c.n_vars {
            return Err(Error::shape(
                "forward_m2o",
                &[n_exo + 1, endo.cols()],
                &[c.n_vars, c.lookback],
            ));
        }
        let (endo_n, stats) = instance_norm(endo, c.eps)?;
        let exo_n = exo.map(|x| instance_norm(x, c.eps)).transpose()?.map(|(t, _)| t);
        let stacked = stack_inputs(&endo_n, exo_n.as_ref())?;
        let stacked = g.constant(&stacked);
        let residual = g.constant(&endo_n);
        let emb = embed_variant(g, c.variant, stacked, residual, &vars.cross)?;
        let pred = self.patch_and_head(g, vars, emb, 1)?;
        de_norm_node(g, pred, &stats)
    }

    pub fn graph_m2m(&self, g: &mut Graph, vars: &ModelVars, x: &Tensor) -> Result<Var> {
        self.require_mode(ForecastMode::ManyToMany)?;
        let c = &self.config;
        if x.shape() != [c.n_vars, c.lookback] {
            return Err(Error::shape("forward_m2m", x.shape(), &[c.n_vars, c.lookback]));
        }
        let (xn, stats) = instance_norm(x, c.eps)?;
        let xn = g.constant(&xn);
        let emb = embed_variant(g, c.variant, xn, xn, &vars.cross)?;
        let pred = self.patch_and_head(g, vars, emb, c.n_vars)?;
        de_norm_node(g, pred, &stats)
    }

    fn patch_and_head(&self, g: &mut Graph, vars: &ModelVars, emb: Var, channels: usize) -> Result<Var> {
        let patches = layers::patchify(g, emb, self.config.patch_len)?;
        let projected = layers::patch_project(g, patches, &vars.head, channels)?;
        layers::head(g, projected, &vars.head, channels)
    }
}

impl Forecaster for CrossLinear {
    fn param_names(&self) -> Vec<String> {
        PARAM_NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn parameters(&self) -> Vec<&Tensor> {
        self.params.tensors().to_vec()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.params.tensors_mut().into_iter().collect()
    }

    fn forward(&self, g: &mut Graph, vars: &[Var], sample: &WindowSample) -> Result<Var> {
        let vars = ModelVars::from_slice(vars)?;
        match self.config.mode {
            ForecastMode::ManyToOne => {
                self.graph_m2o(g, &vars, &sample.endo_look, sample.exo_look.as_ref())
            }
            ForecastMode::ManyToMany => self.graph_m2m(g, &vars, &sample.full_lookback()),
        }
    }

    fn target(&self, sample: &WindowSample) -> Tensor {
        match self.config.mode {
            ForecastMode::ManyToOne => sample.endo_target.clone(),
            ForecastMode::ManyToMany => sample.full_target(),
        }
    }
}

fn squared_error_mean(pred: &Tensor, target: &Tensor, op: &'static str) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(op, pred.shape(), target.shape()));
    }
    let n = pred.len() as f64;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

/// Mean squared error over the `S` endogenous steps.
pub fn loss_m2o(pred: &Tensor, target: &Tensor) -> Result<f64> {
    if pred.rows() != 1 {
        return Err(Error::shape("loss_m2o", pred.shape(), &[1, pred.cols()]));
    }
    squared_error_mean(pred, target, "loss_m2o")
}

/// Mean squared error over all `N×S` entries, endogenous and exogenous alike.
pub fn loss_m2m(pred: &Tensor, target: &Tensor) -> Result<f64> {
    squared_error_mean(pred, target, "loss_m2m")
}

/// Running totals for dataset-level MSE and MAE.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricAccumulator {
    pub squared: f64,
    pub absolute: f64,
    pub count: usize,
}

impl MetricAccumulator {
    pub fn add(&mut self, pred: &Tensor, target: &Tensor) -> Result<()> {
        if pred.shape() != target.shape() {
            return Err(Error::shape("metric", pred.shape(), target.shape()));
        }
        for (p, t) in pred.data().iter().zip(target.data()) {
            let e = p - t;
            self.squared += e * e;
            self.absolute += e.abs();
        }
        self.count += pred.len();
        Ok(())
    }

    pub fn merge(&mut self, other: &MetricAccumulator) {
        self.squared += other.squared;
        self.absolute += other.absolute;
        self.count += other.count;
    }

    pub fn mse(&self) -> Result<f64> {
        self.finish(self.squared)
    }

    pub fn mae(&self) -> Result<f64> {
        self.finish(self.absolute)
    }

    fn finish(&self, total: f64) -> Result<f64> {
        if self.count == 0 {
            return Err(Error::Contract("metrics over an empty collection".into()));
        }
        Ok(total / self.count as f64)
    }
}

fn accumulate(preds: &[Tensor], targets: &[Tensor]) -> Result<MetricAccumulator> {
    if preds.len() != targets.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} targets",
            preds.len(),
            targets.len()
        )));
    }
    let mut acc = MetricAccumulator::default();
    for (p, t) in preds.iter().zip(targets) {
        acc.add(p, t)?;
    }
    Ok(acc)
}

pub fn metric_mse(preds: &[Tensor], targets: &[Tensor]) -> Result<f64> {
    accumulate(preds, targets)?.mse()
}

pub fn metric_mae(preds: &[Tensor], targets: &[Tensor]) -> Result<f64> {
    accumulate(preds, targets)?.mae()
}

/// Embeds a host model's input `[N×T]` (variables in frame order) with a
/// trained or trainable cross-correlation layer. A single output channel
/// blends with row `endo_index` and yields `[1×T]`; `N` channels blend
/// row-for-row and yield `[N×T]`.
pub fn plugin_embed_node(
    g: &mut Graph,
    host_input: Var,
    cross: &CrossCorrVars,
    endo_index: usize,
) -> Result<Var> {
    let (n, _) = match g.shape(host_input) {
        &[n, t] => (n, t),
        other => return Err(Error::shape("plugin_embed", other, &[0, 0])),
    };
    let kshape = g.shape(cross.kernel).to_vec();
    if kshape.len() != 3 || kshape[1] != n {
        return Err(Error::shape("plugin_embed", &kshape, &[0, n, 0]));
    }
    let residual = match kshape[0] {
        1 => g.select_rows(host_input, &[endo_index])?,
        c if c == n => host_input,
        _ => return Err(Error::shape("plugin_embed", &kshape, &[n, n, kshape[2]])),
    };
    embed_variant(g, EmbedVariant::Sum, host_input, residual, cross)
}

/// Eager form of [`plugin_embed_node`].
pub fn plugin_embed(host_input: &Tensor, cross: &CrossCorrParams, endo_index: usize) -> Result<Tensor> {
    let mut g = Graph::new();
    let x = g.constant(host_input);
    let vars = cross.bind(&mut g);
    let out = plugin_embed_node(&mut g, x, &vars, endo_index)?;
    Ok(g.tensor(out))
}

/// Channel-independent linear baseline on the endogenous series: instance
/// norm, one affine map `T→S`, de-norm. With a plug-in attached the affine
/// map reads the cross-correlation embedding instead of the raw series.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearHost {
    /// `[T×S]`
    pub weight: Tensor,
    /// `[S]`
    pub bias: Tensor,
    pub plugin: Option<CrossCorrParams>,
    pub eps: f64,
}

impl LinearHost {
    pub fn init(lookback: usize, horizon: usize, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (lookback as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..=bound)).collect() };
        let weight = Tensor::new(&[lookback, horizon], draw(lookback * horizon))
            .expect("positive shape")
            .with_requires_grad(true);
        let bias = Tensor::new(&[horizon], draw(horizon))
            .expect("positive shape")
            .with_requires_grad(true);
        Self {
            weight,
            bias,
            plugin: None,
            eps: layers::DEFAULT_NORM_EPS,
        }
    }

    /// Attaches a single-channel embedding over `n_vars` variables.
    pub fn with_plugin(mut self, n_vars: usize, kernel_size: usize, alpha: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
        self.plugin = Some(CrossCorrParams::init(1, n_vars, kernel_size, alpha, &mut rng));
        self
    }

    pub fn lookback(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn horizon(&self) -> usize {
        self.weight.shape()[1]
    }

    fn graph(&self, g: &mut Graph, vars: &[Var], full: &Tensor, endo_index: usize) -> Result<Var> {
        if full.cols() != self.lookback() || endo_index >= full.rows() {
            return Err(Error::shape(
                "linear_host",
                full.shape(),
                &[endo_index + 1, self.lookback()],
            ));
        }
        let (xn, stats) = instance_norm(full, self.eps)?;
        let xn = g.constant(&xn);
        let input = match &self.plugin {
            Some(_) => {
                let cross = CrossCorrVars {
                    kernel: vars[2],
                    bias: vars[3],
                    alpha: vars[4],
                };
                plugin_embed_node(g, xn, &cross, endo_index)?
            }
            None => g.select_rows(xn, &[endo_index])?,
        };
        let y = g.matmul(input, vars[0])?;
        let y = g.add_row_bias(y, vars[1])?;
        de_norm_node(g, y, &stats.row(endo_index))
    }
}

impl Forecaster for LinearHost {
    fn param_names(&self) -> Vec<String> {
        let mut names = vec!["host.weight".to_string(), "host.bias".to_string()];
        if self.plugin.is_some() {
            names.extend(PARAM_NAMES[..3].iter().map(|s| s.to_string()));
        }
        names
    }

    fn parameters(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.weight, &self.bias];
        if let Some(p) = &self.plugin {
            out.extend([&p.kernel, &p.bias, p.alpha.as_tensor()]);
        }
        out
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.weight, &mut self.bias];
        if let Some(p) = &mut self.plugin {
            out.extend([&mut p.kernel, &mut p.bias, p.alpha.as_tensor_mut()]);
        }
        out
    }

    fn forward(&self, g: &mut Graph, vars: &[Var], sample: &WindowSample) -> Result<Var> {
        self.graph(g, vars, &sample.full_lookback(), sample.endo_index)
    }

    fn target(&self, sample: &WindowSample) -> Tensor {
        sample.endo_target.clone()
    }
}

/// Host forecast `[1×S]` from an endogenous lookback alone.
pub fn linear_host_forward(endo: &Tensor, host: &LinearHost) -> Result<Tensor> {
    if host.plugin.is_some() {
        return Err(Error::Contract(
            "linear_host_forward takes a host without plug-in".into(),
        ));
    }
    let mut g = Graph::new();
    let vars: Vec<Var> = host.parameters().into_iter().map(|t| g.constant(t)).collect();
    let out = host.graph(&mut g, &vars, endo, 0)?;
    Ok(g.tensor(out))
}

/// `[C_out×N]` matrix of kernel weights summed over taps; entry `(i, j)`
/// reads as the dependence of output channel `i` on input variable `j`.
pub fn correlation_matrix(cross: &CrossCorrParams) -> Tensor {
    let (c, n, w) = (cross.c_out(), cross.n_vars(), cross.kernel_size());
    let k = cross.kernel.data();
    let data = (0..c * n).map(|ij| k[ij * w..(ij + 1) * w].iter().sum()).collect();
    Tensor::new(&[c, n], data).expect("positive shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample_at, SeriesFrame};
    use rand::Rng;

    fn small_config(mode: ForecastMode, variant: EmbedVariant, n: usize) -> ModelConfig {
        ModelConfig {
            lookback: 12,
            horizon: 4,
            patch_len: 5,
            hidden_dim: 3,
            n_vars: n,
            endo_index: n - 1,
            variant,
            mode,
            ..ModelConfig::default()
        }
    }

    fn random(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn validate_reports_key() {
        let mut c = ModelConfig::default();
        c.kernel_size = 4;
        match c.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "model.kernel_size"),
            other => panic!("{other:?}"),
        }
        c.kernel_size = 3;
        c.endo_index = 8;
        assert!(c.validate().is_err());
    }

    #[test]
    fn patch_counts() {
        let mut c = ModelConfig::default();
        assert_eq!(c.n_patches(), 6);
        c.variant = EmbedVariant::Concat;
        assert_eq!(c.n_patches(), 12);
        c.lookback = 100;
        assert_eq!(c.n_patches(), 13);
    }

    #[test]
    fn constant_input_is_finite() {
        let m = CrossLinear::new(small_config(ForecastMode::ManyToOne, EmbedVariant::Sum, 3)).unwrap();
        let out = m
            .forward_m2o(&Tensor::full(&[1, 12], 4.0), Some(&Tensor::full(&[2, 12], 4.0)))
            .unwrap();
        assert!(out.pred.is_finite());
        assert!(out.pred.data().iter().all(|v| (v - 4.0).abs() < 1.0));
    }

    #[test]
    fn zero_weights_give_bias_denormed() {
        let mut m = CrossLinear::new(small_config(ForecastMode::ManyToOne, EmbedVariant::Sum, 2)).unwrap();
        let h = &mut m.params.patch_head;
        h.proj1_w = Tensor::zeros(h.proj1_w.shape());
        h.proj1_b = Tensor::zeros(h.proj1_b.shape());
        h.proj2_w = Tensor::zeros(h.proj2_w.shape());
        h.proj2_b = Tensor::new(&[4], vec![0.5, -1.0, 2.0, 0.0]).unwrap();
        h.beta.set(1.0);
        m.params.cross.alpha.set(1.0);
        let endo = random(&[1, 12], 1);
        let (_, stats) = instance_norm(&endo, 1e-5).unwrap();
        let out = m.forward_m2o(&endo, Some(&random(&[1, 12], 2))).unwrap();
        for (i, b) in [0.5, -1.0, 2.0, 0.0].iter().enumerate() {
            let want = b * stats.std[0] + stats.mean[0];
            assert!((out.pred.data()[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic() {
        let c = small_config(ForecastMode::ManyToOne, EmbedVariant::Concat, 3);
        let (e, x) = (random(&[1, 12], 3), random(&[2, 12], 4));
        let a = CrossLinear::new(c.clone()).unwrap().forward_m2o(&e, Some(&x)).unwrap();
        let b = CrossLinear::new(c).unwrap().forward_m2o(&e, Some(&x)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn m2m_single_var_matches_m2o() {
        let c1 = small_config(ForecastMode::ManyToOne, EmbedVariant::Sum, 1);
        let m1 = CrossLinear::new(c1.clone()).unwrap();
        let mut c2 = c1;
        c2.mode = ForecastMode::ManyToMany;
        let m2 = CrossLinear::from_parts(c2, m1.params.clone()).unwrap();
        let x = random(&[1, 12], 5);
        let a = m1.forward_m2o(&x, None).unwrap().pred;
        let b = m2.forward_m2m(&x).unwrap().pred;
        assert!(a.max_abs_diff(&b) < 1e-12);
        assert!(m1.forward_m2m(&x).is_err());
    }

    #[test]
    fn m2m_permutation_equivariant() {
        let c = small_config(ForecastMode::ManyToMany, EmbedVariant::Sum, 3);
        let m = CrossLinear::new(c.clone()).unwrap();
        let x = random(&[3, 12], 6);
        let perm = [2usize, 0, 1];
        let xp = Tensor::from_rows(&perm.iter().map(|&i| x.row_slice(i).to_vec()).collect::<Vec<_>>()).unwrap();
        let mut pm = m.params.clone();
        let w = 3;
        let k = m.params.cross.kernel.data();
        let mut kp = vec![0.0; k.len()];
        for (o_new, &o_old) in perm.iter().enumerate() {
            for (i_new, &i_old) in perm.iter().enumerate() {
                for tap in 0..w {
                    kp[(o_new * 3 + i_new) * w + tap] = k[(o_old * 3 + i_old) * w + tap];
                }
            }
        }
        pm.cross.kernel = Tensor::new(&[3, 3, 3], kp).unwrap();
        let b = m.params.cross.bias.data();
        pm.cross.bias = Tensor::new(&[3], perm.iter().map(|&i| b[i]).collect()).unwrap();
        let mut cp = c;
        cp.endo_index = 1;
        let mp = CrossLinear::from_parts(cp, pm).unwrap();
        let a = m.forward_m2m(&x).unwrap().pred;
        let bp = mp.forward_m2m(&xp).unwrap().pred;
        for (new, &old) in perm.iter().enumerate() {
            for s in 0..4 {
                assert!((bp.at(new, s) - a.at(old, s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn m2m_shared_head() {
        let c = small_config(ForecastMode::ManyToMany, EmbedVariant::EndoOnly, 2);
        let m = CrossLinear::new(c).unwrap();
        let row: Vec<f64> = random(&[1, 12], 7).data().to_vec();
        let shifted: Vec<f64> = row.iter().map(|v| 3.0 * v + 1.0).collect();
        let x = Tensor::from_rows(&[row, shifted]).unwrap();
        let (_, stats) = instance_norm(&x, 1e-5).unwrap();
        let out = m.forward_m2m(&x).unwrap().pred;
        for s in 0..4 {
            let a = (out.at(0, s) - stats.mean[0]) / stats.std[0];
            let b = (out.at(1, s) - stats.mean[1]) / stats.std[1];
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn endo_only_ignores_exo() {
        let m = CrossLinear::new(small_config(ForecastMode::ManyToOne, EmbedVariant::EndoOnly, 3)).unwrap();
        let e = random(&[1, 12], 8);
        let a = m.forward_m2o(&e, Some(&random(&[2, 12], 9))).unwrap();
        let b = m.forward_m2o(&e, Some(&random(&[2, 12], 10))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scale_equivariance_without_exo() {
        let mut c = small_config(ForecastMode::ManyToOne, EmbedVariant::Sum, 1);
        c.eps = 0.0;
        let m = CrossLinear::new(c).unwrap();
        let e = random(&[1, 12], 11);
        let shifted = Tensor::row(&e.data().iter().map(|v| 2.5 * v - 3.0).collect::<Vec<_>>());
        let a = m.forward_m2o(&e, None).unwrap().pred;
        let b = m.forward_m2o(&shifted, None).unwrap().pred;
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((2.5 * x - 3.0 - y).abs() < 1e-9);
        }
    }

    #[test]
    fn losses() {
        let p = Tensor::new(&[1, 2], vec![1., 1.]).unwrap();
        let t = Tensor::new(&[1, 2], vec![0., 2.]).unwrap();
        assert_eq!(loss_m2o(&p, &t).unwrap(), 1.0);
        assert_eq!(loss_m2o(&p, &p).unwrap(), 0.0);
        let pm = Tensor::new(&[3, 2], vec![1., 1., 5., 5., 6., 6.]).unwrap();
        let tm = Tensor::new(&[3, 2], vec![0., 2., 5., 5., 6., 6.]).unwrap();
        assert!((loss_m2m(&pm, &tm).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(loss_m2o(&p, &tm).is_err());
    }

    #[test]
    fn metrics() {
        let p = [Tensor::row(&[1.0])];
        let t = [Tensor::row(&[3.0])];
        assert_eq!(metric_mse(&p, &t).unwrap(), 4.0);
        assert_eq!(metric_mae(&p, &t).unwrap(), 2.0);
        assert_eq!(metric_mse(&t, &t).unwrap(), 0.0);
        assert!(matches!(metric_mse(&[], &[]), Err(Error::Contract(_))));

        let preds: Vec<Tensor> = (0..5).map(|i| random(&[2, 3], 20 + i)).collect();
        let targets: Vec<Tensor> = (0..5).map(|i| random(&[2, 3], 40 + i)).collect();
        let (mut sq, mut ab, mut n) = (0.0, 0.0, 0.0);
        for (p, t) in preds.iter().zip(&targets) {
            for j in 0..p.len() {
                let e = p.data()[j] - t.data()[j];
                sq += e * e;
                ab += e.abs();
                n += 1.0;
            }
        }
        assert!((metric_mse(&preds, &targets).unwrap() - sq / n).abs() < 1e-12);
        assert!((metric_mae(&preds, &targets).unwrap() - ab / n).abs() < 1e-12);
    }

    #[test]
    fn plugin_alpha_one_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&[3, 10], 12);
        let cross = CrossCorrParams::init(1, 3, 3, 1.0, &mut rng);
        let out = plugin_embed(&x, &cross, 1).unwrap();
        assert_eq!(out.data(), x.row_slice(1));
        let cross_n = CrossCorrParams::init(3, 3, 3, 1.0, &mut rng);
        assert_eq!(plugin_embed(&x, &cross_n, 1).unwrap(), x);
    }

    #[test]
    fn plugged_host_with_alpha_one_matches_host() {
        let frame = SeriesFrame::new(
            vec!["a".into(), "b".into()],
            vec![
                random(&[1, 30], 13).data().to_vec(),
                random(&[1, 30], 14).data().to_vec(),
            ],
            1,
        )
        .unwrap();
        let s = sample_at(&frame, 0, 10, 5);
        let host = LinearHost::init(10, 5, 3);
        let mut plugged = host.clone().with_plugin(2, 3, 1.0, 3);
        plugged.plugin.as_mut().unwrap().alpha.set(1.0);
        let a = host.predict(&s).unwrap();
        let b = plugged.predict(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.shape(), &[1, 5]);
        assert_eq!(linear_host_forward(&s.endo_look, &host).unwrap(), a);
    }

    #[test]
    fn host_zero_weights_predict_mean() {
        let mut host = LinearHost::init(6, 3, 0);
        host.weight = Tensor::zeros(&[6, 3]);
        host.bias = Tensor::zeros(&[3]);
        let e = random(&[1, 6], 15);
        let mean = e.data().iter().sum::<f64>() / 6.0;
        let out = linear_host_forward(&e, &host).unwrap();
        assert!(out.data().iter().all(|v| (v - mean).abs() < 1e-12));
    }

    #[test]
    fn host_identity_is_persistence_like() {
        let mut host = LinearHost::init(4, 4, 0);
        let mut w = vec![0.0; 16];
        for i in 0..4 {
            w[i * 4 + i] = 1.0;
        }
        host.weight = Tensor::new(&[4, 4], w).unwrap();
        host.bias = Tensor::zeros(&[4]);
        host.eps = 0.0;
        let e = Tensor::row(&[1., 4., 2., 8.]);
        let out = linear_host_forward(&e, &host).unwrap();
        assert!(out.max_abs_diff(&e) < 1e-12);
    }

    #[test]
    fn correlation_matrix_sums_taps() {
        let mut cross = CrossCorrParams::zeros(3, 3, 3, 0.5);
        assert!(correlation_matrix(&cross).data().iter().all(|v| *v == 0.0));
        let mut k = vec![0.0; 27];
        k[(2 * 3 + 1) * 3 + 1] = 0.5;
        cross.kernel = Tensor::new(&[3, 3, 3], k).unwrap();
        let m = correlation_matrix(&cross);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.at(i, j), if (i, j) == (2, 1) { 0.5 } else { 0.0 });
            }
        }
        cross.kernel = random(&[3, 3, 3], 16);
        let m = correlation_matrix(&cross);
        let k = cross.kernel.data();
        for i in 0..3 {
            for j in 0..3 {
                let want = k[(i * 3 + j) * 3] + k[(i * 3 + j) * 3 + 1] + k[(i * 3 + j) * 3 + 2];
                assert!((m.at(i, j) - want).abs() <= 1e-15);
            }
        }
    }
}
