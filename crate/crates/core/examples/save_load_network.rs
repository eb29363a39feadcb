//! Save a trained network in the text format, load it back and check that
//! predictions are bit-identical.
//!
//! ```text
//! cargo run --release --example save_load_network -- [out.txt]
//! ```

use std::path::PathBuf;

use flamelut::data::generate_surrogate;
use flamelut::experiment::{run_single, ExperimentConfig};
use flamelut::{LossMode, Network, SurrogateProfile};

fn main() -> flamelut::Result<()> {
    let path = std::env::args().nth(1).map_or_else(
        || std::env::temp_dir().join("flamelut_network.txt"),
        PathBuf::from,
    );
    let table = generate_surrogate(5_000, 1, &SurrogateProfile::default())?;
    let cfg = ExperimentConfig {
        epochs: 3,
        diagnostics: false,
        ..Default::default()
    };
    let run = run_single(&table, &cfg, 7, LossMode::Weighted)?;
    run.network.save(&path)?;

    let loaded = Network::load(&path)?;
    let x = run.prepared.test.inputs();
    let same = loaded.predict(x)? == run.network.predict(x)?;
    println!(
        "layers {:?}, {} parameters, saved to {}",
        loaded.layer_sizes(),
        loaded.param_count(),
        path.display()
    );
    println!("predictions identical after reload: {same}");
    Ok(())
}
