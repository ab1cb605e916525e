//! The residual blend α·endo + (1−α)·conv(K, x) folds into one convolution
//! with K′ = (1−α)K + α·S, S selecting the endogenous channel's center tap.

use crosslinear::layers::fold_residual_kernel;
use crosslinear::ndgrad::{Graph, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> crosslinear::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (n, t, width, alpha) = (4, 16, 3, 0.35);
    let x = Tensor::new(&[n, t], (0..n * t).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let k = Tensor::new(&[1, n, width], (0..n * width).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let zero_bias = Tensor::zeros(&[1]);
    let endo = n - 1;

    let mut g = Graph::new();
    let (xv, kv, bv) = (g.constant(&x), g.constant(&k), g.constant(&zero_bias));
    let cross = g.conv1d(xv, kv, bv, 1)?;
    let a = g.constant(&Tensor::scalar(alpha));
    let e = g.select_rows(xv, &[endo])?;
    let blended = g.blend(a, e, cross)?;

    let folded = fold_residual_kernel(&k, alpha, endo)?;
    let fv = g.constant(&folded);
    let direct = g.conv1d(xv, fv, bv, 1)?;

    let diff = g.tensor(blended).max_abs_diff(&g.tensor(direct));
    println!("K' = {:?}", folded.data());
    println!("max |blend - conv(K', x)| = {diff:.3e}");
    Ok(())
}
