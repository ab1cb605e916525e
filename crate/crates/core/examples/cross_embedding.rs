//! A hand-set cross-correlation kernel recovering a lead-lag relation: the
//! endogenous series is the exogenous one shifted by a step, and the
//! kernel's taps read the exogenous row one step back.

use crosslinear::layers::{cross_corr_embed, CrossCorrParams};
use crosslinear::ndgrad::{Graph, Tensor};

fn main() -> crosslinear::Result<()> {
    let t = 12;
    let exo: Vec<f64> = (0..t).map(|i| (i as f64 * 0.7).sin()).collect();
    let endo: Vec<f64> = (0..t).map(|i| if i == 0 { 0.0 } else { exo[i - 1] }).collect();
    let exo = Tensor::row(&exo);
    let endo = Tensor::row(&endo);

    // Channels are exogenous first, endogenous last; taps are [t-1, t, t+1].
    let mut cross = CrossCorrParams::zeros(1, 2, 3, 0.0);
    cross.kernel = Tensor::new(&[1, 2, 3], vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0])?;
    for alpha in [0.0, 0.5, 1.0] {
        cross.alpha = crosslinear::ndgrad::Scalar::new(alpha);
        let mut g = Graph::new();
        let vars = cross.bind(&mut g);
        let emb = cross_corr_embed(&mut g, &endo, Some(&exo), &vars)?;
        let out = g.tensor(emb);
        let err = out.max_abs_diff(&endo);
        println!("alpha {alpha:.1}: max |embedding - endo| = {err:.3e}");
    }
    Ok(())
}
