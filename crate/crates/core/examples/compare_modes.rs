//! Standard against variance-weighted training over several seeds, printed
//! as one table of mean ± std R² (percent) per species.
//!
//! The full-size run (100 000 points, 50 epochs, 5 seeds) takes several
//! minutes per network on one core.
//!
//! ```text
//! cargo run --release --example compare_modes -- [n_points] [epochs] [seeds]
//! ```

use flamelut::data::generate_surrogate;
use flamelut::experiment::{compare, ExperimentConfig};
use flamelut::SurrogateProfile;

fn main() -> flamelut::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(20_000, |s| s.parse().expect("n_points"));
    let epochs: usize = args.next().map_or(20, |s| s.parse().expect("epochs"));
    let seeds: u64 = args.next().map_or(3, |s| s.parse().expect("seeds"));

    let table = generate_surrogate(n, 1, &SurrogateProfile::default())?;
    let cfg = ExperimentConfig {
        epochs,
        diagnostics: false,
        seeds: (1..=seeds).collect(),
        ..Default::default()
    };
    let cmp = compare(&table, &cfg)?;
    print!("{}", cmp.table);
    for (s, w) in cmp.standard.iter().zip(&cmp.weighted) {
        println!(
            "seed {}: lowest species R² standard {:.2}%, weighted {:.2}%",
            s.seed,
            100.0 * s.report.min_r2(),
            100.0 * w.report.min_r2()
        );
    }
    Ok(())
}
