use super::graph::{BackwardFault, Graph, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Below this analytic magnitude the absolute error is reported instead.
pub const ABS_FALLBACK: f64 = 1e-8;

/// Worst disagreement between analytic and central-difference gradients,
/// one entry per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupError>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupError {
    pub name: String,
    pub max_error: f64,
    pub elements: usize,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_error).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.groups.iter().all(|g| g.max_error < tol)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if analytic.abs() < ABS_FALLBACK {
        diff
    } else {
        diff / analytic.abs().max(numeric.abs())
    }
}

/// Compares reverse-mode gradients of `f` against central differences
/// `(f(θ+ε) − f(θ−ε)) / 2ε` for every element of every parameter.
///
/// `f` receives a fresh graph and the parameter handles (in `params` order)
/// and must return a one-element loss node.
pub fn finite_diff_check<F>(f: F, params: &[(String, Tensor)], eps: f64) -> Result<GradCheckReport>
where
    F: FnMut(&mut Graph, &[Var]) -> Result<Var>,
{
    finite_diff_check_with(f, params, eps, None)
}

/// As [`finite_diff_check`], optionally building the analytic graph with a
/// deliberately broken backward pass.
pub fn finite_diff_check_with<F>(
    mut f: F,
    params: &[(String, Tensor)],
    eps: f64,
    fault: Option<BackwardFault>,
) -> Result<GradCheckReport>
where
    F: FnMut(&mut Graph, &[Var]) -> Result<Var>,
{
    if !(1e-8..=1e-4).contains(&eps) {
        return Err(Error::Contract(format!(
            "finite-difference step {eps} outside [1e-8, 1e-4]"
        )));
    }
    let mut work: Vec<Tensor> = params
        .iter()
        .map(|(_, t)| t.clone().with_requires_grad(true))
        .collect();

    let analytic: Vec<Vec<f64>> = {
        let mut g = match fault {
            Some(fl) => Graph::with_fault(fl),
            None => Graph::new(),
        };
        let vars: Vec<Var> = work.iter().map(|t| g.leaf(t)).collect();
        let loss = f(&mut g, &vars)?;
        check_finite(g.value(loss)[0])?;
        g.backward(loss)?;
        vars.iter()
            .zip(&work)
            .map(|(v, t)| g.grad(*v).map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec))
            .collect()
    };

    let mut eval = |work: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = work.iter().map(|t| g.leaf(t)).collect();
        let loss = f(&mut g, &vars)?;
        check_finite(g.value(loss)[0])
    };

    let mut groups = Vec::with_capacity(params.len());
    for (pi, (name, _)) in params.iter().enumerate() {
        let mut worst = 0.0f64;
        for e in 0..work[pi].len() {
            let orig = work[pi].data()[e];
            work[pi].data_mut()[e] = orig + eps;
            let up = eval(&work)?;
            work[pi].data_mut()[e] = orig - eps;
            let down = eval(&work)?;
            work[pi].data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(relative_error(analytic[pi][e], numeric));
        }
        groups.push(GroupError {
            name: name.clone(),
            max_error: worst,
            elements: work[pi].len(),
        });
    }
    Ok(GradCheckReport { groups })
}

fn check_finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("objective evaluated to {v}")))
    }
}
