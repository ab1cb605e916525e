//! Dense f64 tensors with define-by-run reverse-mode differentiation.
//!
//! A [`Graph`] records operations as they execute. Parameters enter it as
//! leaves via [`Graph::leaf`], constant data via [`Graph::constant`].
//! [`Graph::backward`] then walks the record in reverse and leaves
//! `∂loss/∂node` on every node that requires a gradient. Graphs are
//! throwaway: build one per forward pass and copy the gradients you need
//! into the parameter tensors with [`Tensor::accumulate_grad`].
//!
//! ```
//! use crosslinear::ndgrad::{Graph, Tensor};
//!
//! let w = Tensor::row(&[3.0]).with_requires_grad(true);
//! let mut g = Graph::new();
//! let x = g.leaf(&w);
//! let zero = g.constant(&Tensor::row(&[0.0]));
//! let loss = g.mse(x, zero).unwrap();
//! g.backward(loss).unwrap();
//! assert_eq!(g.grad(x).unwrap(), &[6.0]);
//! ```

mod gradcheck;
mod graph;
mod tensor;

pub use gradcheck::{
    finite_diff_check, finite_diff_check_with, relative_error, GradCheckReport, GroupError,
    ABS_FALLBACK,
};
pub use graph::{BackwardFault, Graph, Var};
pub use tensor::{Scalar, Tensor};
