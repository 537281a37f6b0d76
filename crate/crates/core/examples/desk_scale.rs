//! Fits the autoencoder on a desk-scale circle-map lattice and prints the
//! state occupancy.
//!
//! cargo run --release -p lcs-core --example desk_scale -- [tau] [seed] [restarts]

use std::time::Instant;

use lcs_core::causal_states::{fit, FitOptions};
use lcs_core::lattice::{evolve, LatticeConfig};
use lcs_core::lightcone::LightconeShape;

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> lcs_core::Result<()> {
    let (tau, seed, restarts) = (arg(1, 1.0), arg(2, 0u64), arg(3, 1usize));
    let start = Instant::now();
    let lattice = LatticeConfig { size: 2000, seed, ..LatticeConfig::default() };
    let field = evolve(&lattice, 300, 200)?;
    let shape = LightconeShape { tau, ..LightconeShape::default() };
    let model = fit(&field, &shape, &FitOptions { restarts, ..FitOptions::default() })?;
    let states = model.encode(&field)?;

    let occupancy = states.occupancy(model.n_states());
    let total: u64 = occupancy.iter().sum();
    let mut fractions: Vec<f64> = occupancy.iter().map(|&c| c as f64 / total as f64).collect();
    fractions.sort_by(|a, b| b.total_cmp(a));
    println!("tau {tau}, seed {seed}: {} states in {:.1?}", model.n_states(), start.elapsed());
    println!("past inertia {:.6}", model.gamma_minus().inertia());
    println!("occupancy {fractions:.4?}");
    println!("top-4 coverage {:.4}", fractions.iter().take(4).sum::<f64>());
    Ok(())
}
