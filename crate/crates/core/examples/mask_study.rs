//! Evaluates one trained model with parts of its lookback masked: zeros or
//! standard-normal noise over half or all of the endogenous or exogenous
//! inputs.

use crosslinear::cli::default_mask_grid;
use crosslinear::data::{synth_exo_driven, SplitSpec, SynthSpec};
use crosslinear::model::{CrossLinear, ModelConfig};
use crosslinear::train::{evaluate, train, Dataset, EvalOptions, LrSchedule, TrainConfig};

fn main() -> crosslinear::Result<()> {
    let frame = synth_exo_driven(&SynthSpec::new(4, 2500, 2, 0.1, 1))?;
    let data = Dataset::prepare(&frame, &SplitSpec::default(), 32, 8, true)?;
    let mut model = CrossLinear::new(ModelConfig {
        lookback: 32,
        horizon: 8,
        patch_len: 8,
        n_vars: 4,
        endo_index: 3,
        ..ModelConfig::default()
    })?;
    let cfg = TrainConfig {
        lr: 1e-3,
        batch_size: 8,
        epochs: 4,
        lr_schedule: LrSchedule::Constant,
        ..TrainConfig::default()
    };
    train(&mut model, &data, &cfg)?;

    let clean = evaluate(&model, &data.test, &EvalOptions::default())?;
    println!("{:<24} {:>9.5} {:>9.5}", "No Mask", clean.mse, clean.mae);
    for spec in default_mask_grid(0) {
        let m = evaluate(&model, &data.test, &EvalOptions { mask: Some(&spec), raw_units: None })?;
        println!("{:<24} {:>9.5} {:>9.5}", spec.label(), m.mse, m.mae);
    }
    Ok(())
}
