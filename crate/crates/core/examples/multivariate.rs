//! Many-to-many forecasting: every variable is forecast, each output channel
//! mixing all inputs, with per-variable normalization and a shared head.

use crosslinear::data::{synth_exo_driven, SplitSpec, SynthSpec};
use crosslinear::model::{CrossLinear, ForecastMode, Forecaster, ModelConfig};
use crosslinear::train::{train, Dataset, LrSchedule, TrainConfig};

fn main() -> crosslinear::Result<()> {
    let frame = synth_exo_driven(&SynthSpec::new(3, 2000, 2, 0.1, 5))?;
    let data = Dataset::prepare(&frame, &SplitSpec::default(), 32, 8, true)?;
    let mut model = CrossLinear::new(ModelConfig {
        lookback: 32,
        horizon: 8,
        patch_len: 8,
        n_vars: 3,
        endo_index: 2,
        mode: ForecastMode::ManyToMany,
        ..ModelConfig::default()
    })?;
    let cfg = TrainConfig {
        lr: 1e-3,
        batch_size: 8,
        epochs: 3,
        lr_schedule: LrSchedule::Constant,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &data, &cfg)?;
    let sample = data.test.get(0);
    let pred = model.predict(&sample)?;
    println!("prediction shape {:?} for {} variables", pred.shape(), frame.n_vars());
    println!("test mse {:.5} mae {:.5}", report.test_mse, report.test_mae);
    Ok(())
}
