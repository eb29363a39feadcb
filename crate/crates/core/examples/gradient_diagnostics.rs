//! Track the per-species gradient standard deviation during training, with
//! and without variance weighting, and write both histories as CSV.
//!
//! ```text
//! cargo run --release --example gradient_diagnostics -- [n_points] [epochs] [out_dir]
//! ```

use std::path::PathBuf;

use flamelut::data::generate_surrogate;
use flamelut::experiment::{run_single, ExperimentConfig};
use flamelut::{LossMode, SurrogateProfile};

fn main() -> flamelut::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(20_000, |s| s.parse().expect("n_points"));
    let epochs: usize = args.next().map_or(10, |s| s.parse().expect("epochs"));
    let out = args.next().map(PathBuf::from);

    let table = generate_surrogate(n, 1, &SurrogateProfile::default())?;
    let cfg = ExperimentConfig {
        epochs,
        ..Default::default()
    };
    for mode in [LossMode::Standard, LossMode::Weighted] {
        let run = run_single(&table, &cfg, 1, mode)?;
        let names = &run.history.target_names;
        println!("{mode}: gradient std per species");
        println!(
            "epoch {}",
            names.iter().map(|s| format!("{s:>9}")).collect::<String>()
        );
        for rec in &run.history.epochs {
            let sigma = rec.grad_std.as_ref().expect("diagnostics are on");
            let cells: String = sigma.iter().map(|v| format!(" {v:>8.1e}")).collect();
            println!("{:>5}{cells}", rec.epoch);
        }
        let last = run
            .history
            .last()
            .and_then(|r| r.grad_std.clone())
            .unwrap_or_default();
        let max = last.iter().cloned().fold(0.0, f64::max);
        let min = last.iter().cloned().fold(f64::INFINITY, f64::min);
        println!("final max/min spread {:.1}\n", max / min);
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir).map_err(|e| flamelut::Error::Io {
                context: dir.display().to_string(),
                source: e,
            })?;
            run.history
                .save_csv(&dir.join(format!("history_{mode}.csv")))?;
        }
    }
    Ok(())
}
