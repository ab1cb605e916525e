//! Trains a many-to-many model and prints the learned variable-to-variable
//! weight matrix (kernel taps summed).

use crosslinear::data::{synth_exo_driven, SplitSpec, SynthSpec};
use crosslinear::model::{correlation_matrix, CrossLinear, ForecastMode, ModelConfig};
use crosslinear::train::{train, Dataset, LrSchedule, TrainConfig};

fn main() -> crosslinear::Result<()> {
    let frame = synth_exo_driven(&SynthSpec::new(4, 2000, 2, 0.1, 3))?;
    let data = Dataset::prepare(&frame, &SplitSpec::default(), 32, 8, true)?;
    let mut model = CrossLinear::new(ModelConfig {
        lookback: 32,
        horizon: 8,
        patch_len: 8,
        n_vars: 4,
        endo_index: 3,
        mode: ForecastMode::ManyToMany,
        alpha_init: 0.5,
        ..ModelConfig::default()
    })?;
    let cfg = TrainConfig {
        lr: 1e-3,
        batch_size: 8,
        epochs: 3,
        lr_schedule: LrSchedule::Constant,
        ..TrainConfig::default()
    };
    train(&mut model, &data, &cfg)?;
    let m = correlation_matrix(&model.params.cross);
    print!("{:>8}", "");
    for name in frame.names() {
        print!("{name:>9}");
    }
    println!();
    for (i, name) in frame.names().iter().enumerate() {
        print!("{name:>8}");
        for j in 0..m.cols() {
            print!("{:>9.3}", m.at(i, j));
        }
        println!();
    }
    Ok(())
}
