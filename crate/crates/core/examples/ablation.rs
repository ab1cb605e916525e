//! Trains the four embedding variants on the same synthetic data and seed.

use crosslinear::data::{synth_exo_driven, SplitSpec, SynthSpec};
use crosslinear::layers::EmbedVariant;
use crosslinear::model::{CrossLinear, Forecaster, ModelConfig};
use crosslinear::train::{train, Dataset, LrSchedule, TrainConfig};

fn main() -> crosslinear::Result<()> {
    let frame = synth_exo_driven(&SynthSpec::new(5, 5000, 3, 0.1, 0))?;
    let data = Dataset::prepare(&frame, &SplitSpec::default(), 48, 12, true)?;
    let cfg = TrainConfig {
        lr: 1e-3,
        batch_size: 8,
        epochs: 10,
        lr_schedule: LrSchedule::Constant,
        ..TrainConfig::default()
    };
    println!("{:<12} {:>8} {:>10} {:>10}", "variant", "params", "MSE", "MAE");
    for variant in EmbedVariant::ALL {
        let mut model = CrossLinear::new(ModelConfig {
            lookback: 48,
            horizon: 12,
            patch_len: 8,
            n_vars: 5,
            endo_index: 4,
            variant,
            ..ModelConfig::default()
        })?;
        let report = train(&mut model, &data, &cfg)?;
        println!(
            "{:<12} {:>8} {:>10.5} {:>10.5}",
            variant.label(),
            model.param_count(),
            report.test_mse,
            report.test_mae
        );
    }
    Ok(())
}
