//! Train one network on the surrogate table with the variance-weighted loss
//! and report per-species R² on the test split.
//!
//! ```text
//! cargo run --release --example train_weighted -- [n_points] [epochs] [standard|weighted]
//! ```

use flamelut::data::generate_surrogate;
use flamelut::experiment::{run_single, ExperimentConfig};
use flamelut::{LossMode, SurrogateProfile};

fn main() -> flamelut::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(20_000, |s| s.parse().expect("n_points"));
    let epochs: usize = args.next().map_or(20, |s| s.parse().expect("epochs"));
    let mode: LossMode = args.next().map_or(Ok(LossMode::Weighted), |s| s.parse())?;

    let table = generate_surrogate(n, 1, &SurrogateProfile::default())?;
    let cfg = ExperimentConfig {
        epochs,
        diagnostics: false,
        ..Default::default()
    };
    let run = run_single(&table, &cfg, 1, mode)?;

    let weights: Vec<String> = run
        .loss_spec
        .weights()
        .iter()
        .map(|w| format!("{w:.3e}"))
        .collect();
    println!("{mode} loss, weights [{}]", weights.join(", "));
    for rec in run.history.epochs.iter().step_by((epochs / 5).max(1)) {
        println!(
            "epoch {:>3}  validation loss {:.4e}",
            rec.epoch, rec.total_val_loss
        );
    }
    print!("{}", run.report.render());
    Ok(())
}
