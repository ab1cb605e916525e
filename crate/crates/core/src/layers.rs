//! CrossLinear building blocks: parameter-free instance normalization, the
//! cross-correlation embedding and its ablation variants, patching, the
//! patch projection with positional-embedding blend, and the linear head.
//!
//! Graph-level functions take [`Var`] handles produced by the matching
//! `bind` method so the same code serves training, inference and gradient
//! checking.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndgrad::{Graph, Scalar, Tensor, Var};

pub const DEFAULT_NORM_EPS: f64 = 1e-5;

/// Per-row statistics captured by [`instance_norm`].
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceStats {
    pub mean: Vec<f64>,
    /// `sqrt(population variance + eps)`.
    pub std: Vec<f64>,
    pub eps: f64,
}

impl InstanceStats {
    /// Statistics of a single row, e.g. the endogenous one.
    pub fn row(&self, i: usize) -> InstanceStats {
        InstanceStats {
            mean: vec![self.mean[i]],
            std: vec![self.std[i]],
            eps: self.eps,
        }
    }
}

/// Normalizes every row of `window[C×T]` to zero mean and (for non-constant
/// rows) unit variance.
pub fn instance_norm(window: &Tensor, eps: f64) -> Result<(Tensor, InstanceStats)> {
    let &[rows, len] = window.shape() else {
        return Err(Error::shape("instance_norm", window.shape(), &[0, 0]));
    };
    if len < 2 {
        return Err(Error::Contract(format!(
            "instance_norm needs at least 2 time steps, got {len}"
        )));
    }
    let mut out = Vec::with_capacity(rows * len);
    let mut mean = Vec::with_capacity(rows);
    let mut std = Vec::with_capacity(rows);
    for r in 0..rows {
        let x = window.row_slice(r);
        let mu = x.iter().sum::<f64>() / len as f64;
        let var = x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / len as f64;
        let sigma = (var + eps).sqrt();
        out.extend(x.iter().map(|v| (v - mu) / sigma));
        mean.push(mu);
        std.push(sigma);
    }
    Ok((
        Tensor::new(&[rows, len], out)?,
        InstanceStats { mean, std, eps },
    ))
}

/// `pred·σ + μ` row by row (eager form).
pub fn de_norm(pred: &Tensor, stats: &InstanceStats) -> Result<Tensor> {
    let mut g = Graph::new();
    let p = g.constant(pred);
    let out = de_norm_node(&mut g, p, stats)?;
    Ok(g.tensor(out))
}

pub fn de_norm_node(g: &mut Graph, pred: Var, stats: &InstanceStats) -> Result<Var> {
    g.row_affine(pred, &stats.std, &stats.mean)
}

/// How the cross-correlation signal is combined with the raw input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedVariant {
    /// `α·x + (1−α)·cross`.
    Sum,
    /// The raw input only (α pinned to 1).
    EndoOnly,
    /// The convolution output only (α pinned to 0).
    CrossOnly,
    /// Raw input and convolution output joined along time.
    Concat,
}

impl EmbedVariant {
    pub const ALL: [EmbedVariant; 4] = [
        EmbedVariant::Sum,
        EmbedVariant::EndoOnly,
        EmbedVariant::CrossOnly,
        EmbedVariant::Concat,
    ];

    /// Length of the embedded sequence for a lookback of `t`.
    pub fn embedded_len(self, t: usize) -> usize {
        match self {
            EmbedVariant::Concat => 2 * t,
            _ => t,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EmbedVariant::Sum => "Sum",
            EmbedVariant::EndoOnly => "Endo Only",
            EmbedVariant::CrossOnly => "Cross Only",
            EmbedVariant::Concat => "Concat",
        }
    }
}

fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::new(shape, data)
        .expect("positive shape")
        .with_requires_grad(true)
}

/// Single-layer convolution over stacked variables plus the residual weight α.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossCorrParams {
    /// `[C_out×N×κ]`
    pub kernel: Tensor,
    /// `[C_out]`
    pub bias: Tensor,
    pub alpha: Scalar,
}

#[derive(Clone, Copy, Debug)]
pub struct CrossCorrVars {
    pub kernel: Var,
    pub bias: Var,
    pub alpha: Var,
}

impl CrossCorrParams {
    /// Uniform(±1/√(N·κ)) kernel and bias.
    pub fn init(
        c_out: usize,
        n_vars: usize,
        kernel_size: usize,
        alpha: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let bound = 1.0 / ((n_vars * kernel_size) as f64).sqrt();
        Self {
            kernel: uniform(&[c_out, n_vars, kernel_size], bound, rng),
            bias: uniform(&[c_out], bound, rng),
            alpha: Scalar::new(alpha),
        }
    }

    pub fn zeros(c_out: usize, n_vars: usize, kernel_size: usize, alpha: f64) -> Self {
        Self {
            kernel: Tensor::zeros(&[c_out, n_vars, kernel_size]).with_requires_grad(true),
            bias: Tensor::zeros(&[c_out]).with_requires_grad(true),
            alpha: Scalar::new(alpha),
        }
    }

    pub fn c_out(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn n_vars(&self) -> usize {
        self.kernel.shape()[1]
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel.shape()[2]
    }

    pub fn bind(&self, g: &mut Graph) -> CrossCorrVars {
        CrossCorrVars {
            kernel: g.leaf(&self.kernel),
            bias: g.leaf(&self.bias),
            alpha: g.leaf(self.alpha.as_tensor()),
        }
    }
}

/// Exogenous rows first, endogenous row last.
pub fn stack_inputs(endo: &Tensor, exo: Option<&Tensor>) -> Result<Tensor> {
    let t = endo.cols();
    if endo.shape() != [1, t] {
        return Err(Error::shape("stack_inputs", endo.shape(), &[1, t]));
    }
    let mut rows = Vec::new();
    if let Some(exo) = exo {
        if exo.cols() != t || exo.shape().len() != 2 {
            return Err(Error::shape("stack_inputs", endo.shape(), exo.shape()));
        }
        rows.extend(exo.to_rows());
    }
    rows.push(endo.row_slice(0).to_vec());
    Tensor::from_rows(&rows)
}

/// Embeds `stacked[N×T]` and combines it with `residual` (the endogenous row
/// in many-to-one mode, all rows in many-to-many mode) according to `variant`.
pub fn embed_variant(
    g: &mut Graph,
    variant: EmbedVariant,
    stacked: Var,
    residual: Var,
    vars: &CrossCorrVars,
) -> Result<Var> {
    if variant == EmbedVariant::EndoOnly {
        return Ok(residual);
    }
    let width = g.shape(vars.kernel)[2];
    if width.is_multiple_of(2) {
        return Err(Error::Contract(format!(
            "kernel size must be odd to preserve length, got {width}"
        )));
    }
    let cross = g.conv1d(stacked, vars.kernel, vars.bias, (width - 1) / 2)?;
    if g.shape(cross) != g.shape(residual) {
        return Err(Error::shape("embed", g.shape(residual), g.shape(cross)));
    }
    match variant {
        EmbedVariant::Sum => g.blend(vars.alpha, residual, cross),
        EmbedVariant::CrossOnly => Ok(cross),
        EmbedVariant::Concat => g.concat_cols(residual, cross),
        EmbedVariant::EndoOnly => unreachable!(),
    }
}

/// Sum-variant embedding of one endogenous row against its exogenous rows.
pub fn cross_corr_embed(
    g: &mut Graph,
    endo: &Tensor,
    exo: Option<&Tensor>,
    vars: &CrossCorrVars,
) -> Result<Var> {
    let stacked = stack_inputs(endo, exo)?;
    let s = g.constant(&stacked);
    let e = g.constant(endo);
    embed_variant(g, EmbedVariant::Sum, s, e, vars)
}

/// Rewrites a Sum-variant embedding as a pure convolution: returns
/// `K′ = (1−α)K + α·S` where `S` is the center-tap selector of the
/// endogenous input channel, so that `conv(K′, x) = α·x_endo + (1−α)·conv(K, x)`
/// for bias-free convolutions.
pub fn fold_residual_kernel(kernel: &Tensor, alpha: f64, endo_index: usize) -> Result<Tensor> {
    let &[c_out, n_vars, width] = kernel.shape() else {
        return Err(Error::shape("fold_residual_kernel", kernel.shape(), &[1, 0, 0]));
    };
    if c_out != 1 {
        return Err(Error::shape("fold_residual_kernel", kernel.shape(), &[1, n_vars, width]));
    }
    if width % 2 == 0 {
        return Err(Error::Contract(format!(
            "selection kernel needs a center tap, kernel size {width} is even"
        )));
    }
    if endo_index >= n_vars {
        return Err(Error::Contract(format!(
            "endogenous index {endo_index} out of range for {n_vars} variables"
        )));
    }
    let mut data: Vec<f64> = kernel.data().iter().map(|k| (1.0 - alpha) * k).collect();
    data[endo_index * width + width / 2] += alpha;
    Tensor::new(kernel.shape(), data)
}

/// Where the positional embedding comes from and whether it trains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeMode {
    LearnableSinusoidalInit,
    FixedSinusoidal,
}

/// Standard transformer sinusoid table, `[positions×dim]`.
pub fn sinusoidal_pe(positions: usize, dim: usize) -> Tensor {
    let mut data = vec![0.0; positions * dim];
    for pos in 0..positions {
        for i in 0..dim {
            let pair = (i / 2) as f64;
            let angle = pos as f64 / 10000f64.powf(2.0 * pair / dim as f64);
            data[pos * dim + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    Tensor::new(&[positions, dim], data).expect("positive shape")
}

/// Patch projection, positional embedding and forecasting head.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchHeadParams {
    /// `[p×d]`
    pub proj1_w: Tensor,
    /// `[d]`
    pub proj1_b: Tensor,
    /// `[k×d]`
    pub pos_emb: Tensor,
    pub beta: Scalar,
    /// `[(k·d)×S]`
    pub proj2_w: Tensor,
    /// `[S]`
    pub proj2_b: Tensor,
}

#[derive(Clone, Copy, Debug)]
pub struct PatchHeadVars {
    pub proj1_w: Var,
    pub proj1_b: Var,
    pub pos_emb: Var,
    pub beta: Var,
    pub proj2_w: Var,
    pub proj2_b: Var,
}

impl PatchHeadParams {
    pub fn init(
        patch_len: usize,
        hidden: usize,
        n_patches: usize,
        horizon: usize,
        beta: f64,
        pe_mode: PeMode,
        rng: &mut impl Rng,
    ) -> Self {
        let b1 = 1.0 / (patch_len as f64).sqrt();
        let proj1_w = uniform(&[patch_len, hidden], b1, rng);
        let proj1_b = uniform(&[hidden], b1, rng);
        let b2 = 1.0 / ((n_patches * hidden) as f64).sqrt();
        let proj2_w = uniform(&[n_patches * hidden, horizon], b2, rng);
        let proj2_b = uniform(&[horizon], b2, rng);
        let pos_emb = sinusoidal_pe(n_patches, hidden)
            .with_requires_grad(pe_mode == PeMode::LearnableSinusoidalInit);
        Self {
            proj1_w,
            proj1_b,
            pos_emb,
            beta: Scalar::new(beta),
            proj2_w,
            proj2_b,
        }
    }

    pub fn patch_len(&self) -> usize {
        self.proj1_w.shape()[0]
    }

    pub fn hidden(&self) -> usize {
        self.proj1_w.shape()[1]
    }

    pub fn n_patches(&self) -> usize {
        self.pos_emb.shape()[0]
    }

    pub fn horizon(&self) -> usize {
        self.proj2_b.len()
    }

    pub fn bind(&self, g: &mut Graph) -> PatchHeadVars {
        PatchHeadVars {
            proj1_w: g.leaf(&self.proj1_w),
            proj1_b: g.leaf(&self.proj1_b),
            pos_emb: g.leaf(&self.pos_emb),
            beta: g.leaf(self.beta.as_tensor()),
            proj2_w: g.leaf(&self.proj2_w),
            proj2_b: g.leaf(&self.proj2_b),
        }
    }
}

/// `[R×L]` → `[(R·⌈L/p⌉)×p]`, replicate-padding the tail.
pub fn patchify(g: &mut Graph, emb: Var, patch_len: usize) -> Result<Var> {
    g.patchify(emb, patch_len)
}

/// `β·(patches·W₁ + b₁) + (1−β)·PE` with the positional table repeated for
/// each of the `channels` series sharing the projection.
pub fn patch_project(
    g: &mut Graph,
    patches: Var,
    vars: &PatchHeadVars,
    channels: usize,
) -> Result<Var> {
    let k = g.shape(vars.pos_emb)[0];
    if g.shape(patches)[0] != channels * k {
        return Err(Error::shape(
            "patch_project",
            g.shape(patches),
            &[channels * k, g.shape(vars.proj1_w)[0]],
        ));
    }
    let proj = g.matmul(patches, vars.proj1_w)?;
    let proj = g.add_row_bias(proj, vars.proj1_b)?;
    let pe = if channels > 1 {
        g.tile_rows(vars.pos_emb, channels)?
    } else {
        vars.pos_emb
    };
    g.blend(vars.beta, proj, pe)
}

/// Flattens each channel's `k×d` block and maps it to `S` outputs: `[R×S]`.
pub fn head(g: &mut Graph, patch_emb: Var, vars: &PatchHeadVars, channels: usize) -> Result<Var> {
    let n = g.value(patch_emb).len();
    if channels == 0 || !n.is_multiple_of(channels) {
        return Err(Error::shape("head", g.shape(patch_emb), &[channels]));
    }
    let flat = g.reshape(patch_emb, &[channels, n / channels])?;
    let y = g.matmul(flat, vars.proj2_w)?;
    g.add_row_bias(y, vars.proj2_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn random_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn instance_norm_constant_row() {
        let (n, s) = instance_norm(&Tensor::row(&[2., 2., 2.]), 1e-5).unwrap();
        assert!(n.data().iter().all(|v| v.abs() < 1e-12));
        assert_eq!(s.mean, vec![2.0]);
        assert!((s.std[0] - 1e-5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn instance_norm_two_points() {
        let (n, s) = instance_norm(&Tensor::row(&[1., 3.]), 0.0).unwrap();
        assert_eq!(n.data(), &[-1., 1.]);
        assert_eq!((s.mean[0], s.std[0]), (2.0, 1.0));
    }

    #[test]
    fn instance_norm_rows_are_standardized() {
        let x = random_tensor(&[3, 40], &mut rng());
        let (n, s) = instance_norm(&x, DEFAULT_NORM_EPS).unwrap();
        for r in 0..3 {
            let row = n.row_slice(r);
            let mu = row.iter().sum::<f64>() / 40.0;
            let var = row.iter().map(|v| v * v).sum::<f64>() / 40.0;
            assert!(mu.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-3);
            assert!(s.std[r] >= DEFAULT_NORM_EPS.sqrt());
        }
        assert!(instance_norm(&Tensor::row(&[1.0]), 1e-5).is_err());
    }

    #[test]
    fn de_norm_cases() {
        let stats = InstanceStats {
            mean: vec![5.0],
            std: vec![2.0],
            eps: 1e-5,
        };
        assert_eq!(de_norm(&Tensor::zeros(&[1, 3]), &stats).unwrap().data(), &[5.; 3]);
        let id = InstanceStats {
            mean: vec![0.0],
            std: vec![1.0],
            eps: 0.0,
        };
        assert_eq!(de_norm(&Tensor::row(&[1.0]), &id).unwrap().data(), &[1.0]);
        let x = random_tensor(&[1, 30], &mut rng());
        let (n, s) = instance_norm(&x, 1e-5).unwrap();
        assert!(de_norm(&n, &s).unwrap().max_abs_diff(&x) < 1e-9);
    }

    #[test]
    fn alpha_one_returns_endo() {
        let mut r = rng();
        let endo = random_tensor(&[1, 6], &mut r);
        let exo = random_tensor(&[2, 6], &mut r);
        let params = CrossCorrParams::init(1, 3, 3, 1.0, &mut r);
        let mut g = Graph::new();
        let v = params.bind(&mut g);
        let out = cross_corr_embed(&mut g, &endo, Some(&exo), &v).unwrap();
        assert_eq!(g.value(out), endo.data());
    }

    #[test]
    fn alpha_zero_zero_kernel_is_zero() {
        let mut r = rng();
        let endo = random_tensor(&[1, 5], &mut r);
        let exo = random_tensor(&[1, 5], &mut r);
        let params = CrossCorrParams::zeros(1, 2, 3, 0.0);
        let mut g = Graph::new();
        let v = params.bind(&mut g);
        let out = cross_corr_embed(&mut g, &endo, Some(&exo), &v).unwrap();
        assert!(g.value(out).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn exo_center_tap_passes_exo_through() {
        // rows: exo first, endo last
        let kernel = Tensor::new(&[1, 2, 3], vec![0., 1., 0., 0., 0., 0.]).unwrap();
        let params = CrossCorrParams {
            kernel,
            bias: Tensor::zeros(&[1]),
            alpha: Scalar::new(0.0),
        };
        let mut g = Graph::new();
        let v = params.bind(&mut g);
        let endo = Tensor::row(&[1., 2., 3.]);
        let exo = Tensor::row(&[1., 1., 1.]);
        let out = cross_corr_embed(&mut g, &endo, Some(&exo), &v).unwrap();
        assert_eq!(g.value(out), &[1., 1., 1.]);
    }

    #[test]
    fn variants() {
        let mut r = rng();
        let endo = random_tensor(&[1, 8], &mut r);
        let exo = random_tensor(&[2, 8], &mut r);
        let stacked = stack_inputs(&endo, Some(&exo)).unwrap();
        let mut params = CrossCorrParams::init(1, 3, 3, 0.0, &mut r);
        let mut g = Graph::new();
        let v = params.bind(&mut g);
        let s = g.constant(&stacked);
        let e = g.constant(&endo);
        let endo_only = embed_variant(&mut g, EmbedVariant::EndoOnly, s, e, &v).unwrap();
        assert_eq!(g.value(endo_only), endo.data());
        let sum0 = embed_variant(&mut g, EmbedVariant::Sum, s, e, &v).unwrap();
        let cross = embed_variant(&mut g, EmbedVariant::CrossOnly, s, e, &v).unwrap();
        assert_eq!(g.value(sum0), g.value(cross));
        let cat = embed_variant(&mut g, EmbedVariant::Concat, s, e, &v).unwrap();
        assert_eq!(g.shape(cat), &[1, 16]);
        assert_eq!(&g.value(cat)[..8], endo.data());

        params.kernel = Tensor::zeros(&[1, 3, 2]);
        let mut g = Graph::new();
        let v = params.bind(&mut g);
        let s = g.constant(&stacked);
        let e = g.constant(&endo);
        assert!(embed_variant(&mut g, EmbedVariant::Sum, s, e, &v).is_err());
    }

    #[test]
    fn stack_rejects_length_mismatch() {
        assert!(stack_inputs(&Tensor::row(&[1., 2.]), Some(&Tensor::row(&[1., 2., 3.]))).is_err());
    }

    #[test]
    fn patchify_slicing_oracle() {
        for (len, p) in [(96usize, 16usize), (5, 2), (96, 96), (7, 3), (1, 4)] {
            let x: Vec<f64> = (0..len).map(|i| i as f64 * 0.5 - 3.0).collect();
            let mut g = Graph::new();
            let v = g.constant(&Tensor::row(&x));
            let pt = patchify(&mut g, v, p).unwrap();
            let k = len.div_ceil(p);
            assert_eq!(g.shape(pt), &[k, p]);
            // slicing oracle
            for i in 0..k {
                for j in 0..p {
                    let want = x[(i * p + j).min(len - 1)];
                    assert_eq!(g.value(pt)[i * p + j], want);
                }
            }
            assert_eq!(&g.value(pt)[..len], &x[..]);
        }
    }

    fn head_params(p: usize, d: usize, k: usize, s: usize) -> PatchHeadParams {
        PatchHeadParams::init(p, d, k, s, 0.9, PeMode::LearnableSinusoidalInit, &mut rng())
    }

    #[test]
    fn patch_project_beta_endpoints() {
        let mut hp = head_params(4, 3, 2, 5);
        let mut r = rng();
        let patches = random_tensor(&[2, 4], &mut r);
        let other = random_tensor(&[2, 4], &mut r);

        hp.beta.set(1.0);
        let mut g = Graph::new();
        let v = hp.bind(&mut g);
        let pt = g.constant(&patches);
        let a = patch_project(&mut g, pt, &v, 1).unwrap();
        hp.pos_emb = random_tensor(&[2, 3], &mut r);
        let mut g2 = Graph::new();
        let v2 = hp.bind(&mut g2);
        let pt2 = g2.constant(&patches);
        let b = patch_project(&mut g2, pt2, &v2, 1).unwrap();
        assert_eq!(g.value(a), g2.value(b));

        hp.beta.set(0.0);
        let mut g = Graph::new();
        let v = hp.bind(&mut g);
        let o = g.constant(&other);
        let out = patch_project(&mut g, o, &v, 1).unwrap();
        assert_eq!(g.value(out), hp.pos_emb.data());
    }

    #[test]
    fn patch_project_half_blend() {
        let mut hp = head_params(2, 3, 2, 1);
        hp.proj1_w = Tensor::zeros(&[2, 3]);
        hp.proj1_b = Tensor::zeros(&[3]);
        hp.pos_emb = Tensor::full(&[2, 3], 2.0);
        hp.beta.set(0.5);
        let mut g = Graph::new();
        let v = hp.bind(&mut g);
        let pt = g.constant(&Tensor::full(&[2, 2], 9.0));
        let out = patch_project(&mut g, pt, &v, 1).unwrap();
        assert_eq!(g.value(out), &[1.0; 6]);
        let bad = g.constant(&Tensor::zeros(&[2, 3]));
        assert!(patch_project(&mut g, bad, &v, 1).is_err());
    }

    #[test]
    fn head_cases() {
        let mut hp = head_params(1, 1, 1, 2);
        hp.proj2_w = Tensor::new(&[1, 2], vec![1., 1.]).unwrap();
        hp.proj2_b = Tensor::zeros(&[2]);
        let mut g = Graph::new();
        let v = hp.bind(&mut g);
        let pe = g.constant(&Tensor::new(&[1, 1], vec![3.]).unwrap());
        let out = head(&mut g, pe, &v, 1).unwrap();
        assert_eq!(g.value(out), &[3., 3.]);

        hp.proj2_w = Tensor::zeros(&[1, 2]);
        hp.proj2_b = Tensor::new(&[2], vec![0.25, -4.0]).unwrap();
        let mut g = Graph::new();
        let v = hp.bind(&mut g);
        let pe = g.constant(&Tensor::new(&[1, 1], vec![3.]).unwrap());
        let out = head(&mut g, pe, &v, 1).unwrap();
        assert_eq!(g.value(out), &[0.25, -4.0]);
    }

    #[test]
    fn fold_endpoints_and_errors() {
        let k = random_tensor(&[1, 3, 3], &mut rng());
        let s = fold_residual_kernel(&k, 1.0, 2).unwrap();
        let mut sel = [0.0; 9];
        sel[2 * 3 + 1] = 1.0;
        assert_eq!(s.data(), &sel[..]);
        assert_eq!(fold_residual_kernel(&k, 0.0, 2).unwrap().data(), k.data());
        assert!(fold_residual_kernel(&Tensor::zeros(&[1, 3, 2]), 0.5, 0).is_err());
        assert!(fold_residual_kernel(&k, 0.5, 3).is_err());
    }

    #[test]
    fn sinusoid_first_row() {
        let pe = sinusoidal_pe(3, 4);
        assert_eq!(pe.row_slice(0), &[0.0, 1.0, 0.0, 1.0]);
        assert!((pe.at(1, 0) - 1f64.sin()).abs() < 1e-15);
    }
}
