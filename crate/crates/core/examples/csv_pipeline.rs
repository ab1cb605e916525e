//! CSV in, checkpoint out: writes a synthetic CSV, ingests it, splits it
//! chronologically, trains, saves and reloads a checkpoint.

use crosslinear::data::{chrono_split, load_csv, save_csv, synth_exo_driven, SplitSpec, SynthSpec};
use crosslinear::model::{CrossLinear, ModelConfig};
use crosslinear::train::{evaluate, load_checkpoint, save_checkpoint, train, Dataset, EvalOptions, LrSchedule, TrainConfig};

fn main() -> crosslinear::Result<()> {
    let dir = std::env::temp_dir().join("crosslinear_csv_pipeline");
    std::fs::create_dir_all(&dir)?;
    let csv = dir.join("series.csv");
    save_csv(&synth_exo_driven(&SynthSpec::new(3, 1500, 2, 0.1, 9))?, &csv)?;

    let frame = load_csv(&csv)?;
    let split = SplitSpec::Counts { train: 1000, val: 200, test: 300 };
    let ranges = chrono_split(frame.len(), &split)?;
    println!("{:?} endo={} splits {:?}", frame.names(), frame.endo_name(), ranges);

    let data = Dataset::prepare(&frame, &split, 24, 6, true)?;
    let mut model = CrossLinear::new(ModelConfig {
        lookback: 24,
        horizon: 6,
        patch_len: 6,
        n_vars: frame.n_vars(),
        endo_index: frame.endo_index(),
        ..ModelConfig::default()
    })?;
    let cfg = TrainConfig { lr: 1e-3, batch_size: 8, epochs: 3, lr_schedule: LrSchedule::Constant, ..TrainConfig::default() };
    train(&mut model, &data, &cfg)?;

    let ckpt = dir.join("checkpoint.json");
    save_checkpoint(&model, frame.names(), &ckpt)?;
    let (restored, _) = load_checkpoint(&ckpt)?;
    let a = evaluate(&model, &data.test, &EvalOptions::default())?;
    let b = evaluate(&restored, &data.test, &EvalOptions::default())?;
    println!("test mse {:.6} / reloaded {:.6} (identical: {})", a.mse, b.mse, a.mse == b.mse);
    Ok(())
}
