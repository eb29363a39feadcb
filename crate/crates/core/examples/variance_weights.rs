//! Variance weights for a table CSV, or for the built-in surrogate when no
//! path is given. Prints the weights file that `train` would write.
//!
//! ```text
//! cargo run --release --example variance_weights -- [table.csv]
//! ```

use std::path::Path;

use flamelut::data::{generate_surrogate, load_table};
use flamelut::loss::weights_to_toml;
use flamelut::{LossSpec, SurrogateProfile};

fn main() -> flamelut::Result<()> {
    let table = match std::env::args().nth(1) {
        Some(path) => load_table(Path::new(&path))?,
        None => generate_surrogate(100_000, 1, &SurrogateProfile::default())?,
    };
    let spec = LossSpec::from_variance(table.targets(), table.target_names())?;
    print!("{}", weights_to_toml(&spec, table.target_names())?);

    // A species four decades rarer than the carrier gets a weight four
    // decades larger.
    let w = spec.weights();
    let max = w.iter().cloned().fold(0.0, f64::max);
    let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("# weight ratio {:.3e}", max / min);
    Ok(())
}
