//! Compare backpropagated gradients with central finite differences, for the
//! full loss and for each single-species loss.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use flamelut::loss::{loss_output_gradient, per_target_mse, total_loss};
use flamelut::rng::SeedStream;
use flamelut::{LossSpec, Matrix, Network};

const STEP: f64 = 1e-6;

fn numeric(net: &Network, f: &dyn Fn(&Network) -> f64) -> Vec<f64> {
    let base = net.params();
    let mut probe = net.clone();
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] += STEP;
            probe.set_params(&p).unwrap();
            let up = f(&probe);
            p[i] -= 2.0 * STEP;
            probe.set_params(&p).unwrap();
            (up - f(&probe)) / (2.0 * STEP)
        })
        .collect()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let n = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let d = n(&mut a.iter().zip(b).map(|(x, y)| x - y));
    d / n(&mut a.iter().copied()).max(n(&mut b.iter().copied()))
}

fn main() -> flamelut::Result<()> {
    let net = Network::init_glorot(&[3, 6, 5, 4], 11)?;
    let mut s = SeedStream::new(5);
    let x = Matrix::from_vec(6, 3, (0..18).map(|_| s.uniform(0.0, 1.0)).collect())?;
    let mut t = Matrix::zeros(6, 4);
    for r in 0..6 {
        let raw: Vec<f64> = (0..4).map(|_| s.uniform(0.01, 1.0)).collect();
        let sum: f64 = raw.iter().sum();
        for (c, v) in raw.iter().enumerate() {
            t.set(r, c, v / sum);
        }
    }
    let spec = LossSpec::weighted(vec![1.0, 30.0, 900.0, 27_000.0])?;

    let (y, cache) = net.forward(&x)?;
    let g = loss_output_gradient(&t, &y, &spec)?;
    let full = net.backward(&cache, &g)?.flatten();
    let loss = |n: &Network| {
        total_loss(&per_target_mse(&t, &n.predict(&x).unwrap()).unwrap(), &spec).unwrap()
    };
    println!("{} parameters", net.param_count());
    println!(
        "full loss        relative error {:.2e}",
        rel(&full, &numeric(&net, &loss))
    );

    for (j, part) in net.backward_each_target(&cache, &g)?.iter().enumerate() {
        let w = spec.weights()[j];
        let lj = |n: &Network| w * per_target_mse(&t, &n.predict(&x).unwrap()).unwrap()[j];
        println!(
            "species {j} loss   relative error {:.2e}, gradient std {:.3e}",
            rel(&part.flatten(), &numeric(&net, &lj)),
            part.std()
        );
    }
    Ok(())
}
