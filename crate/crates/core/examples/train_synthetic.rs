//! Trains the many-to-one forecaster on exogenous-driven synthetic data and
//! reports validation history and test metrics.

use crosslinear::data::{synth_exo_driven, SplitSpec, SynthSpec};
use crosslinear::model::{CrossLinear, ModelConfig};
use crosslinear::train::{train, Dataset, LrSchedule, TrainConfig};

fn main() -> crosslinear::Result<()> {
    let frame = synth_exo_driven(&SynthSpec::new(5, 5000, 3, 0.1, 0))?;
    let data = Dataset::prepare(&frame, &SplitSpec::default(), 48, 12, true)?;
    let config = ModelConfig {
        lookback: 48,
        horizon: 12,
        patch_len: 8,
        n_vars: frame.n_vars(),
        endo_index: frame.endo_index(),
        ..ModelConfig::default()
    };
    let mut model = CrossLinear::new(config)?;
    let cfg = TrainConfig {
        lr: 1e-3,
        batch_size: 8,
        epochs: 10,
        lr_schedule: LrSchedule::Constant,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &data, &cfg)?;
    println!("windows: train {} val {} test {}", report.train_windows, report.val_windows, report.test_windows);
    for e in &report.epochs {
        println!("epoch {:>2}  train {:.5}  val mse {:.5}", e.epoch, e.train_loss, e.val_mse);
    }
    println!("best epoch {}  test mse {:.5}  mae {:.5}", report.best_epoch, report.test_mse, report.test_mae);
    Ok(())
}
