//! Attaches the cross-correlation embedding to a plain linear forecaster and
//! compares test error with and without it.

use crosslinear::data::{synth_exo_driven, SplitSpec, SynthSpec};
use crosslinear::model::LinearHost;
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
    let mut host = LinearHost::init(48, 12, 0);
    let plain = train(&mut host, &data, &cfg)?;
    let mut plugged = LinearHost::init(48, 12, 0).with_plugin(5, 3, 0.9, 0);
    let with = train(&mut plugged, &data, &cfg)?;
    println!("linear host           test mse {:.5}", plain.test_mse);
    println!("linear host + plug-in test mse {:.5}", with.test_mse);
    Ok(())
}
