use std::sync::Arc;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Deliberate backward-pass corruption used to prove the gradient checker
/// actually catches broken derivatives. Never enabled in normal runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BackwardFault {
    /// Multiplies the right-operand gradient of every matmul by the factor.
    ScaleMatMulRhs(f64),
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Conv1d {
        input: Var,
        kernel: Var,
        bias: Var,
        pad: usize,
    },
    Blend {
        alpha: Var,
        x: Var,
        y: Var,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    Scale(Var, f64),
    AddRowBias(Var, Var),
    Reshape(Var),
    ConcatCols(Var, Var),
    Patchify {
        input: Var,
        patch_len: usize,
    },
    TileRows(Var),
    RowAffine {
        input: Var,
        scale: Vec<f64>,
    },
    SelectRows {
        input: Var,
        rows: Vec<usize>,
    },
    Mse {
        pred: Var,
        target: Var,
    },
}

impl Op {
    fn operands(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Hadamard(a, b)
            | Op::AddRowBias(a, b)
            | Op::ConcatCols(a, b) => vec![*a, *b],
            Op::Conv1d {
                input,
                kernel,
                bias,
                ..
            } => vec![*input, *kernel, *bias],
            Op::Blend { alpha, x, y } => vec![*alpha, *x, *y],
            Op::Scale(a, _) | Op::Reshape(a) => vec![*a],
            Op::TileRows(input) => vec![*input],
            Op::Patchify { input, .. }
            | Op::RowAffine { input, .. }
            | Op::SelectRows { input, .. } => vec![*input],
            Op::Mse { pred, target } => vec![*pred, *target],
        }
    }
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Arc<Vec<f64>>,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run computation graph.
///
/// Every operation appends a node whose operands already exist, so the
/// recording order is a topological order and [`Graph::backward`] simply walks
/// it in reverse. Gradients from repeated uses of a node add up.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    fault: Option<BackwardFault>,
}

fn dims2(shape: &[usize]) -> Option<(usize, usize)> {
    match shape {
        [r, c] => Some((*r, *c)),
        _ => None,
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fault(fault: BackwardFault) -> Self {
        Self {
            fault: Some(fault),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Operands of a recorded node, in argument order.
    pub fn operands(&self, v: Var) -> Vec<Var> {
        self.nodes[v.0].op.operands()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op) -> Var {
        let requires_grad = op
            .operands()
            .iter()
            .any(|o| self.nodes[o.0].requires_grad);
        self.push_with(shape, Arc::new(value), op, requires_grad)
    }

    fn push_with(
        &mut self,
        shape: Vec<usize>,
        value: Arc<Vec<f64>>,
        op: Op,
        requires_grad: bool,
    ) -> Var {
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a tensor as an input; it is differentiated iff it requires grad.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push_with(
            t.shape().to_vec(),
            t.shared_data(),
            Op::Leaf,
            t.requires_grad(),
        )
    }

    /// Records a tensor that never receives a gradient.
    pub fn constant(&mut self, t: &Tensor) -> Var {
        self.push_with(t.shape().to_vec(), t.shared_data(), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::from_shared(n.shape.clone(), Arc::clone(&n.value))
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last `backward` target with respect to `v`, if any flowed.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    fn matrix(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        dims2(self.shape(v)).ok_or_else(|| Error::shape(op, self.shape(v), &[0, 0]))
    }

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    /// `a[m×k] · b[k×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix(a, "matmul")?;
        let (k2, n) = self.matrix(b, "matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", self.shape(a), self.shape(b)));
        }
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let orow = &mut out[i * n..(i + 1) * n];
            for t in 0..k {
                add_scaled(orow, &bv[t * n..(t + 1) * n], av[i * k + t]);
            }
        }
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b)))
    }

    /// Stride-1 1-D cross-correlation (no kernel flip) with symmetric zero padding.
    ///
    /// `input[C_in×L]`, `kernel[C_out×C_in×κ]`, `bias[C_out]` → `[C_out×(L+2·pad−κ+1)]`.
    pub fn conv1d(&mut self, input: Var, kernel: Var, bias: Var, pad: usize) -> Result<Var> {
        let (c_in, len) = self.matrix(input, "conv1d")?;
        let &[c_out, kc_in, width] = self.shape(kernel) else {
            return Err(Error::shape("conv1d", self.shape(kernel), &[0, 0, 0]));
        };
        if kc_in != c_in {
            return Err(Error::shape("conv1d", self.shape(input), self.shape(kernel)));
        }
        if self.shape(bias) != [c_out] {
            return Err(Error::shape("conv1d", self.shape(bias), &[c_out]));
        }
        if width > len + 2 * pad {
            return Err(Error::shape(
                "conv1d",
                self.shape(kernel),
                &[c_in, len + 2 * pad],
            ));
        }
        let out_len = len + 2 * pad - width + 1;
        let (x, w, b) = (self.value(input), self.value(kernel), self.value(bias));
        let mut out = vec![0.0; c_out * out_len];
        for o in 0..c_out {
            let orow = &mut out[o * out_len..(o + 1) * out_len];
            orow.fill(b[o]);
            for c in 0..c_in {
                let xrow = &x[c * len..(c + 1) * len];
                for j in 0..width {
                    let tap = w[(o * c_in + c) * width + j];
                    // padded[t + j] = x[t + j - pad]
                    let lo = pad.saturating_sub(j);
                    let hi = (len + pad).saturating_sub(j).min(out_len);
                    for t in lo..hi {
                        orow[t] += tap * xrow[t + j - pad];
                    }
                }
            }
        }
        Ok(self.push(
            vec![c_out, out_len],
            out,
            Op::Conv1d {
                input,
                kernel,
                bias,
                pad,
            },
        ))
    }

    /// `alpha·x + (1−alpha)·y` with a one-element `alpha`.
    pub fn blend(&mut self, alpha: Var, x: Var, y: Var) -> Result<Var> {
        if self.value(alpha).len() != 1 {
            return Err(Error::shape("blend", self.shape(alpha), &[1]));
        }
        self.same_shape(x, y, "blend")?;
        let a = self.value(alpha)[0];
        let out = self
            .value(x)
            .iter()
            .zip(self.value(y))
            .map(|(xv, yv)| a * xv + (1.0 - a) * yv)
            .collect();
        Ok(self.push(self.shape(x).to_vec(), out, Op::Blend { alpha, x, y }))
    }

    fn zip_with(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        self.same_shape(a, b, name)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| f(*x, *y))
            .collect();
        Ok(self.push(self.shape(a).to_vec(), out, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(a, b, "hadamard", |x, y| x * y, Op::Hadamard(a, b))
    }

    pub fn scale(&mut self, c: f64, a: Var) -> Var {
        let out = self.value(a).iter().map(|x| c * x).collect();
        self.push(self.shape(a).to_vec(), out, Op::Scale(a, c))
    }

    /// Adds a length-`C` bias to every row of an `R×C` matrix.
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (r, c) = self.matrix(a, "add_row_bias")?;
        if self.value(bias).len() != c {
            return Err(Error::shape("add_row_bias", self.shape(a), self.shape(bias)));
        }
        let bv = self.value(bias);
        let mut out = self.value(a).to_vec();
        for row in out.chunks_exact_mut(c) {
            add_into(row, bv);
        }
        debug_assert_eq!(out.len(), r * c);
        Ok(self.push(vec![r, c], out, Op::AddRowBias(a, bias)))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let n: usize = shape.iter().product();
        if n != self.value(a).len() || shape.contains(&0) {
            return Err(Error::shape("reshape", self.shape(a), shape));
        }
        let value = Arc::clone(&self.nodes[a.0].value);
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push_with(shape.to_vec(), value, Op::Reshape(a), rg))
    }

    /// Joins `a[R×C1]` and `b[R×C2]` along the trailing (time) axis.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c1) = self.matrix(a, "concat_cols")?;
        let (r2, c2) = self.matrix(b, "concat_cols")?;
        if r != r2 {
            return Err(Error::shape("concat_cols", self.shape(a), self.shape(b)));
        }
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = Vec::with_capacity(r * (c1 + c2));
        for i in 0..r {
            out.extend_from_slice(&av[i * c1..(i + 1) * c1]);
            out.extend_from_slice(&bv[i * c2..(i + 1) * c2]);
        }
        Ok(self.push(vec![r, c1 + c2], out, Op::ConcatCols(a, b)))
    }

    /// Splits each row of `input[R×L]` into `k = ⌈L/p⌉` non-overlapping patches,
    /// replicating the last value to fill a short final patch. Output is
    /// `[(R·k)×p]`, row `r·k + i` holding patch `i` of input row `r`.
    pub fn patchify(&mut self, input: Var, patch_len: usize) -> Result<Var> {
        let (r, len) = self.matrix(input, "patchify")?;
        if patch_len == 0 {
            return Err(Error::Contract("patch length must be at least 1".into()));
        }
        let k = len.div_ceil(patch_len);
        let x = self.value(input);
        let mut out = Vec::with_capacity(r * k * patch_len);
        for row in 0..r {
            let xrow = &x[row * len..(row + 1) * len];
            for pos in 0..k * patch_len {
                out.push(xrow[pos.min(len - 1)]);
            }
        }
        Ok(self.push(
            vec![r * k, patch_len],
            out,
            Op::Patchify { input, patch_len },
        ))
    }

    /// Repeats the whole `R×C` block `times` times vertically.
    pub fn tile_rows(&mut self, input: Var, times: usize) -> Result<Var> {
        let (r, c) = self.matrix(input, "tile_rows")?;
        if times == 0 {
            return Err(Error::Contract("tile_rows needs times >= 1".into()));
        }
        let out = self.value(input).repeat(times);
        Ok(self.push(vec![r * times, c], out, Op::TileRows(input)))
    }

    /// Per-row affine map with constant coefficients: `out[r][c] = in[r][c]·scale[r] + shift[r]`.
    pub fn row_affine(&mut self, input: Var, scale: &[f64], shift: &[f64]) -> Result<Var> {
        let (r, c) = self.matrix(input, "row_affine")?;
        if scale.len() != r || shift.len() != r {
            return Err(Error::shape("row_affine", self.shape(input), &[scale.len(), shift.len()]));
        }
        let mut out = self.value(input).to_vec();
        for (i, row) in out.chunks_exact_mut(c).enumerate() {
            for v in row {
                *v = *v * scale[i] + shift[i];
            }
        }
        Ok(self.push(
            vec![r, c],
            out,
            Op::RowAffine {
                input,
                scale: scale.to_vec(),
            },
        ))
    }

    pub fn select_rows(&mut self, input: Var, rows: &[usize]) -> Result<Var> {
        let (r, c) = self.matrix(input, "select_rows")?;
        if rows.is_empty() || rows.iter().any(|&i| i >= r) {
            return Err(Error::shape("select_rows", self.shape(input), rows));
        }
        let x = self.value(input);
        let out = rows
            .iter()
            .flat_map(|&i| x[i * c..(i + 1) * c].iter().copied())
            .collect();
        Ok(self.push(
            vec![rows.len(), c],
            out,
            Op::SelectRows {
                input,
                rows: rows.to_vec(),
            },
        ))
    }

    /// Mean squared error; the target must not require a gradient.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape(pred, target, "mse")?;
        if self.requires_grad(target) {
            return Err(Error::Contract("mse target must not require grad".into()));
        }
        let (p, t) = (self.value(pred), self.value(target));
        let n = p.len() as f64;
        let loss = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
        Ok(self.push(vec![1], vec![loss], Op::Mse { pred, target }))
    }

    /// Reverse pass from a one-element node; afterwards [`Graph::grad`] returns
    /// `∂loss/∂v` for every node that requires grad.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(gout) = grads[i].take() else {
                continue;
            };
            if self.nodes[i].requires_grad {
                self.backprop_node(i, &gout, &mut grads);
            }
            grads[i] = Some(gout);
        }
        self.grads = grads;
        Ok(())
    }

    fn backprop_node(&self, i: usize, gout: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            let node = &nodes[v.0];
            if node.requires_grad {
                let g = grads[v.0].get_or_insert_with(|| vec![0.0; node.value.len()]);
                f(g);
            }
        };
        match &nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = dims2(&nodes[a.0].shape).unwrap();
                let n = nodes[b.0].shape[1];
                let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                acc(*a, &mut |ga| {
                    for r in 0..m {
                        let grow = &gout[r * n..(r + 1) * n];
                        for t in 0..k {
                            ga[r * k + t] += dot(grow, &bv[t * n..(t + 1) * n]);
                        }
                    }
                });
                let fault = match self.fault {
                    Some(BackwardFault::ScaleMatMulRhs(s)) => s,
                    None => 1.0,
                };
                acc(*b, &mut |gb| {
                    for r in 0..m {
                        let grow = &gout[r * n..(r + 1) * n];
                        for t in 0..k {
                            let x = av[r * k + t] * fault;
                            add_scaled(&mut gb[t * n..(t + 1) * n], grow, x);
                        }
                    }
                });
            }
            Op::Conv1d {
                input,
                kernel,
                bias,
                pad,
            } => {
                let pad = *pad;
                let (c_in, len) = dims2(&nodes[input.0].shape).unwrap();
                let (c_out, width) = (nodes[kernel.0].shape[0], nodes[kernel.0].shape[2]);
                let out_len = nodes[i].shape[1];
                let (x, w) = (&nodes[input.0].value, &nodes[kernel.0].value);
                let span = |j: usize| (pad.saturating_sub(j), (len + pad).saturating_sub(j).min(out_len));
                acc(*input, &mut |gx| {
                    for o in 0..c_out {
                        let grow = &gout[o * out_len..(o + 1) * out_len];
                        for c in 0..c_in {
                            for j in 0..width {
                                let tap = w[(o * c_in + c) * width + j];
                                let (lo, hi) = span(j);
                                for t in lo..hi {
                                    gx[c * len + t + j - pad] += tap * grow[t];
                                }
                            }
                        }
                    }
                });
                acc(*kernel, &mut |gw| {
                    for o in 0..c_out {
                        let grow = &gout[o * out_len..(o + 1) * out_len];
                        for c in 0..c_in {
                            let xrow = &x[c * len..(c + 1) * len];
                            for j in 0..width {
                                let (lo, hi) = span(j);
                                let mut s = 0.0;
                                for t in lo..hi {
                                    s += xrow[t + j - pad] * grow[t];
                                }
                                gw[(o * c_in + c) * width + j] += s;
                            }
                        }
                    }
                });
                acc(*bias, &mut |gb| {
                    for o in 0..c_out {
                        gb[o] += gout[o * out_len..(o + 1) * out_len].iter().sum::<f64>();
                    }
                });
            }
            Op::Blend { alpha, x, y } => {
                let a = nodes[alpha.0].value[0];
                let (xv, yv) = (&nodes[x.0].value, &nodes[y.0].value);
                acc(*alpha, &mut |ga| {
                    ga[0] += xv
                        .iter()
                        .zip(yv.iter())
                        .zip(gout)
                        .map(|((xe, ye), g)| (xe - ye) * g)
                        .sum::<f64>();
                });
                acc(*x, &mut |gx| add_scaled(gx, gout, a));
                acc(*y, &mut |gy| add_scaled(gy, gout, 1.0 - a));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |g| add_into(g, gout));
                acc(*b, &mut |g| add_into(g, gout));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |g| add_into(g, gout));
                acc(*b, &mut |g| add_scaled(g, gout, -1.0));
            }
            Op::Hadamard(a, b) => {
                let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                acc(*a, &mut |g| {
                    for ((ge, be), go) in g.iter_mut().zip(bv.iter()).zip(gout) {
                        *ge += be * go;
                    }
                });
                acc(*b, &mut |g| {
                    for ((ge, ae), go) in g.iter_mut().zip(av.iter()).zip(gout) {
                        *ge += ae * go;
                    }
                });
            }
            Op::Scale(a, c) => acc(*a, &mut |g| add_scaled(g, gout, *c)),
            Op::AddRowBias(a, bias) => {
                let c = nodes[bias.0].value.len();
                acc(*a, &mut |g| add_into(g, gout));
                acc(*bias, &mut |g| {
                    for row in gout.chunks_exact(c) {
                        add_into(g, row);
                    }
                });
            }
            Op::Reshape(a) => acc(*a, &mut |g| add_into(g, gout)),
            Op::ConcatCols(a, b) => {
                let (r, c1) = dims2(&nodes[a.0].shape).unwrap();
                let c2 = nodes[b.0].shape[1];
                let w = c1 + c2;
                acc(*a, &mut |g| {
                    for row in 0..r {
                        add_into(&mut g[row * c1..(row + 1) * c1], &gout[row * w..row * w + c1]);
                    }
                });
                acc(*b, &mut |g| {
                    for row in 0..r {
                        add_into(
                            &mut g[row * c2..(row + 1) * c2],
                            &gout[row * w + c1..(row + 1) * w],
                        );
                    }
                });
            }
            Op::Patchify { input, patch_len } => {
                let (r, len) = dims2(&nodes[input.0].shape).unwrap();
                let padded = len.div_ceil(*patch_len) * patch_len;
                acc(*input, &mut |g| {
                    for row in 0..r {
                        for pos in 0..padded {
                            g[row * len + pos.min(len - 1)] += gout[row * padded + pos];
                        }
                    }
                });
            }
            Op::TileRows(input) => {
                let n = nodes[input.0].value.len();
                acc(*input, &mut |g| {
                    for block in gout.chunks_exact(n) {
                        add_into(g, block);
                    }
                });
            }
            Op::RowAffine { input, scale, .. } => {
                let c = nodes[input.0].shape[1];
                acc(*input, &mut |g| {
                    for (r, (grow, orow)) in
                        g.chunks_exact_mut(c).zip(gout.chunks_exact(c)).enumerate()
                    {
                        add_scaled(grow, orow, scale[r]);
                    }
                });
            }
            Op::SelectRows { input, rows } => {
                let c = nodes[input.0].shape[1];
                acc(*input, &mut |g| {
                    for (k, &src) in rows.iter().enumerate() {
                        add_into(&mut g[src * c..(src + 1) * c], &gout[k * c..(k + 1) * c]);
                    }
                });
            }
            Op::Mse { pred, target } => {
                let (p, t) = (&nodes[pred.0].value, &nodes[target.0].value);
                let s = 2.0 * gout[0] / p.len() as f64;
                acc(*pred, &mut |g| {
                    for ((ge, pe), te) in g.iter_mut().zip(p.iter()).zip(t.iter()) {
                        *ge += s * (pe - te);
                    }
                });
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add_scaled(dst: &mut [f64], src: &[f64], s: f64) {
    for (d, v) in dst.iter_mut().zip(src) {
        *d += s * v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape, data.to_vec()).unwrap()
    }

    fn p(shape: &[usize], data: &[f64]) -> Tensor {
        t(shape, data).with_requires_grad(true)
    }

    #[test]
    fn matmul_identity_and_zero() {
        let mut g = Graph::new();
        let i2 = g.constant(&t(&[2, 2], &[1., 0., 0., 1.]));
        let m = g.constant(&t(&[2, 2], &[3., 4., 5., 6.]));
        let out = g.matmul(i2, m).unwrap();
        assert_eq!(g.value(out), &[3., 4., 5., 6.]);
        let a = g.constant(&t(&[1, 2], &[1., 2.]));
        let z = g.constant(&t(&[2, 1], &[0., 0.]));
        let out = g.matmul(a, z).unwrap();
        assert_eq!(g.value(out), &[0.]);
    }

    #[test]
    fn matmul_hand_case() {
        let mut g = Graph::new();
        let a = g.constant(&t(&[2, 2], &[1., 2., 3., 4.]));
        let b = g.constant(&t(&[2, 1], &[5., 6.]));
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.shape(c), &[2, 1]);
        assert_eq!(g.value(c), &[17., 39.]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.constant(&Tensor::zeros(&[2, 3]));
        let b = g.constant(&Tensor::zeros(&[2, 3]));
        let err = g.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn conv1d_difference_kernel() {
        let mut g = Graph::new();
        let x = g.constant(&t(&[1, 3], &[1., 2., 3.]));
        let k = g.constant(&t(&[1, 1, 3], &[1., 0., -1.]));
        let b = g.constant(&t(&[1], &[0.]));
        let out = g.conv1d(x, k, b, 1).unwrap();
        assert_eq!(g.value(out), &[-2., -2., 2.]);
    }

    #[test]
    fn conv1d_zero_kernel_gives_bias_and_center_tap_is_identity() {
        let mut g = Graph::new();
        let x = g.constant(&t(&[1, 4], &[0.3, -1., 2., 7.]));
        let kz = g.constant(&Tensor::zeros(&[1, 1, 3]));
        let b = g.constant(&t(&[1], &[1.5]));
        let out = g.conv1d(x, kz, b, 1).unwrap();
        assert_eq!(g.value(out), &[1.5; 4]);
        let kc = g.constant(&t(&[1, 1, 3], &[0., 1., 0.]));
        let b0 = g.constant(&t(&[1], &[0.]));
        let out = g.conv1d(x, kc, b0, 1).unwrap();
        assert_eq!(g.value(out), g.value(x));
    }

    #[test]
    fn conv1d_shape_errors() {
        let mut g = Graph::new();
        let x = g.constant(&Tensor::zeros(&[2, 2]));
        let k = g.constant(&Tensor::zeros(&[1, 2, 5]));
        let b = g.constant(&Tensor::zeros(&[1]));
        assert!(g.conv1d(x, k, b, 0).is_err());
        let k3 = g.constant(&Tensor::zeros(&[1, 3, 1]));
        assert!(g.conv1d(x, k3, b, 0).is_err());
    }

    #[test]
    fn blend_endpoints_and_midpoint() {
        let mut g = Graph::new();
        let x = g.constant(&t(&[1, 2], &[2., -1.]));
        let y = g.constant(&t(&[1, 2], &[4., 9.]));
        for (a, want) in [(1.0, [2., -1.]), (0.0, [4., 9.]), (0.5, [3., 4.])] {
            let al = g.constant(&Tensor::scalar(a));
            let out = g.blend(al, x, y).unwrap();
            assert_eq!(g.value(out), &want);
        }
        let al = g.constant(&Tensor::scalar(0.5));
        let bad = g.constant(&Tensor::zeros(&[2, 1]));
        assert!(g.blend(al, x, bad).is_err());
    }

    #[test]
    fn elementwise_ops() {
        let mut g = Graph::new();
        let a = g.constant(&t(&[2], &[1., 2.]));
        let b = g.constant(&t(&[2], &[3., 4.]));
        let s = g.add(a, b).unwrap();
        assert_eq!(g.value(s), &[4., 6.]);
        let z = g.sub(a, a).unwrap();
        assert_eq!(g.value(z), &[0., 0.]);
        let m = g.constant(&t(&[2], &[1., -1.]));
        let sc = g.scale(2.0, m);
        assert_eq!(g.value(sc), &[2., -2.]);
        let h = g.hadamard(a, b).unwrap();
        assert_eq!(g.value(h), &[3., 8.]);
        let c = g.constant(&Tensor::zeros(&[3]));
        assert!(g.add(a, c).is_err());
    }

    #[test]
    fn mse_values() {
        let mut g = Graph::new();
        let p1 = g.constant(&t(&[2], &[0., 0.]));
        let t1 = g.constant(&t(&[2], &[1., 1.]));
        let l = g.mse(p1, t1).unwrap();
        assert_eq!(g.value(l), &[1.0]);
        let l0 = g.mse(t1, t1).unwrap();
        assert_eq!(g.value(l0), &[0.0]);
        let p3 = g.constant(&t(&[3], &[1., 2., 3.]));
        let t3 = g.constant(&t(&[3], &[2., 2., 5.]));
        let l = g.mse(p3, t3).unwrap();
        let oracle = [(1.0f64, 2.0f64), (2., 2.), (3., 5.)]
            .iter()
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / 3.0;
        assert!((g.value(l)[0] - oracle).abs() < 1e-15);
        assert!((g.value(l)[0] - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn backward_square() {
        let mut g = Graph::new();
        let x = g.leaf(&p(&[1], &[3.]));
        let zero = g.constant(&t(&[1], &[0.]));
        let l = g.mse(x, zero).unwrap();
        g.backward(l).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[6.0]);
    }

    #[test]
    fn unused_parameter_gets_no_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(&p(&[1], &[3.]));
        let unused = g.leaf(&p(&[1], &[1.]));
        let zero = g.constant(&t(&[1], &[0.]));
        let l = g.mse(x, zero).unwrap();
        g.backward(l).unwrap();
        assert!(g.grad(unused).is_none_or(|gr| gr == [0.0]));
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::new();
        let x = g.leaf(&p(&[2], &[3., 1.]));
        assert!(matches!(g.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn reuse_accumulates() {
        // x + x and 2x both give gradient 2 through a linear probe.
        let probe = t(&[1], &[0.]);
        let mut g = Graph::new();
        let x = g.leaf(&p(&[1], &[0.25]));
        let z = g.constant(&probe);
        let xx = g.add(x, x).unwrap();
        let l = g.mse(xx, z).unwrap();
        g.backward(l).unwrap();
        let via_add = g.grad(x).unwrap()[0];

        let mut g2 = Graph::new();
        let x2 = g2.leaf(&p(&[1], &[0.25]));
        let z2 = g2.constant(&probe);
        let two = g2.scale(2.0, x2);
        let l2 = g2.mse(two, z2).unwrap();
        g2.backward(l2).unwrap();
        assert_eq!(via_add, g2.grad(x2).unwrap()[0]);
    }

    #[test]
    fn operands_precede_their_node() {
        let mut g = Graph::new();
        let x = g.leaf(&p(&[1, 4], &[1., 2., 3., 4.]));
        let k = g.leaf(&p(&[1, 1, 3], &[0.1, 0.2, 0.3]));
        let b = g.leaf(&p(&[1], &[0.]));
        let c = g.conv1d(x, k, b, 1).unwrap();
        let pt = g.patchify(c, 3).unwrap();
        let r = g.reshape(pt, &[1, 6]).unwrap();
        let _ = g.concat_cols(r, x).unwrap();
        for i in 0..g.len() {
            for o in g.operands(Var(i)) {
                assert!(o.0 < i);
            }
        }
    }

    #[test]
    fn patchify_replicates_tail() {
        let mut g = Graph::new();
        let x = g.constant(&t(&[1, 5], &[1., 2., 3., 4., 5.]));
        let pt = g.patchify(x, 2).unwrap();
        assert_eq!(g.shape(pt), &[3, 2]);
        assert_eq!(g.value(pt), &[1., 2., 3., 4., 5., 5.]);
    }
}
