//! Generate the surrogate flamelet table and inspect its variance spread.
//!
//! ```text
//! cargo run --release --example generate_surrogate -- [n_points] [out.csv]
//! ```

use std::path::PathBuf;

use flamelut::data::{generate_surrogate, save_table};
use flamelut::loss::{column_variances, variance_weights};
use flamelut::SurrogateProfile;

fn main() -> flamelut::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args
        .next()
        .map_or(100_000, |s| s.parse().expect("n_points"));
    let out = args.next().map(PathBuf::from);

    let profile = SurrogateProfile::default();
    let table = generate_surrogate(n, 1, &profile)?;
    let vars = column_variances(table.targets());
    let weights = variance_weights(table.targets())?;

    println!("{n} rows, inputs {:?}", table.input_names());
    println!("{:<6} {:>12} {:>12}", "species", "Var(Y)", "weight");
    for ((name, v), w) in table.target_names().iter().zip(&vars).zip(&weights) {
        println!("{name:<6} {v:>12.3e} {w:>12.3e}");
    }
    let max = vars.iter().cloned().fold(0.0, f64::max);
    let min = vars.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("variance spread {:.3e}", max / min);

    if let Some(path) = out {
        save_table(&path, &table)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
