//! Trains the default model on a Sines dataset and prints the loss log.
//!
//! cargo run --release -p tsmae-core --example train_sines -- [epochs1 epochs2 epochs3]

use std::time::Instant;

use tsmae::data::{generate_sines, NormStats};
use tsmae::model::{init_params, ModelConfig};
use tsmae::train::{prepare, TrainConfig, Trainer};

fn main() -> tsmae::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let series = generate_sines(256, 24, 5, 17)?;
    let mut model = ModelConfig::new(6, 4, 5);
    model.seed = 17;
    let bundle = init_params(&model)?.with_norm(NormStats::fit(&series)?);
    let data = prepare(&bundle, &series)?;
    let mut cfg = TrainConfig::new(6);
    cfg.seed = 17;
    if args.len() == 3 {
        cfg.epochs = [args[0], args[1], args[2]];
    }
    let start = Instant::now();
    let mut trainer = Trainer::new(bundle, cfg)?;
    trainer.run_until(&data, |_| false, |log| {
        if log.epoch == 1 || log.epoch % 20 == 0 {
            println!("phase {} epoch {:4} loss {:.6}  ({:.1}s)", log.phase, log.epoch, log.loss, start.elapsed().as_secs_f64());
        }
    })?;
    Ok(())
}
