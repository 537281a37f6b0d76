//! Circle-map coupled map lattice on a periodic one-dimensional lattice.
//!
//! `x(r, t+1) = (1 - alpha) f(x(r, t)) + alpha/2 [f(x(r+1, t)) + f(x(r-1, t))]`
//! with the circle map `f(x) = x + omega - kappa/(2 pi) sin(2 pi x) mod 1`.

use std::f64::consts::TAU;

use rand::Rng;

use crate::rng::{self, Purpose};
use crate::{Error, Result, SpacetimeField};

/// Largest `f64` strictly below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeConfig {
    /// Phase shift.
    pub omega: f64,
    /// Nonlinearity strength.
    pub kappa: f64,
    /// Coupling strength in `[0, 1]`.
    pub alpha: f64,
    /// Number of lattice sites.
    pub size: usize,
    /// Seed of the initial condition.
    pub seed: u64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { omega: 0.5, kappa: 1.0, alpha: 1.0, size: 2000, seed: 0 }
    }
}

impl LatticeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && (0.0..1.0).contains(&self.omega)) {
            return Err(Error::config(format!("omega = {} must lie in [0, 1)", self.omega)));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::config(format!("kappa = {} must be >= 0", self.kappa)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(format!("alpha = {} must lie in [0, 1]", self.alpha)));
        }
        if self.size < 3 {
            return Err(Error::config(format!("lattice size {} must be >= 3", self.size)));
        }
        Ok(())
    }
}

/// Reduces `x` into `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let y = x.rem_euclid(1.0);
    // rem_euclid rounds tiny negative inputs up to exactly 1.0
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// One application of the circle map.
#[inline]
pub fn circle_map(x: f64, omega: f64, kappa: f64) -> f64 {
    wrap_unit(x + omega - kappa / TAU * (TAU * x).sin())
}

/// Advances a spatial configuration by one time step.
pub fn step(config: &LatticeConfig, row: &[f64]) -> Result<Vec<f64>> {
    if row.len() != config.size {
        return Err(Error::config(format!(
            "row has {} sites, lattice has {}",
            row.len(),
            config.size
        )));
    }
    let mut out = vec![0.0; row.len()];
    step_into(config, row, &mut out);
    Ok(out)
}

fn step_into(config: &LatticeConfig, row: &[f64], out: &mut [f64]) {
    let n = row.len();
    let mapped: Vec<f64> = row.iter().map(|&x| circle_map(x, config.omega, config.kappa)).collect();
    let center = 1.0 - config.alpha;
    let side = config.alpha / 2.0;
    for r in 0..n {
        let left = mapped[(r + n - 1) % n];
        let right = mapped[(r + 1) % n];
        out[r] = wrap_unit(center * mapped[r] + side * (right + left));
    }
}

/// Random initial row, i.i.d. uniform on `[0, 1)`.
pub fn initial_row(config: &LatticeConfig) -> Vec<f64> {
    let mut rng = rng::stream(config.seed, Purpose::InitialCondition);
    (0..config.size).map(|_| rng.random::<f64>().min(BELOW_ONE)).collect()
}

/// Runs `transient` discarded steps from the seeded initial row, then
/// records `steps` rows. Row 0 is the first post-transient configuration.
pub fn evolve(config: &LatticeConfig, transient: usize, steps: usize) -> Result<SpacetimeField> {
    config.validate()?;
    evolve_from(config, initial_row(config), transient, steps)
}

/// Same as [`evolve`] with an explicit initial row.
pub fn evolve_from(
    config: &LatticeConfig,
    initial: Vec<f64>,
    transient: usize,
    steps: usize,
) -> Result<SpacetimeField> {
    config.validate()?;
    if steps == 0 {
        return Err(Error::config("evolve needs at least one recorded step"));
    }
    if initial.len() != config.size {
        return Err(Error::config(format!(
            "initial row has {} sites, lattice has {}",
            initial.len(),
            config.size
        )));
    }
    let mut current = initial;
    let mut next = vec![0.0; config.size];
    for _ in 0..transient {
        step_into(config, &current, &mut next);
        std::mem::swap(&mut current, &mut next);
    }
    let mut data = Vec::with_capacity(steps * config.size);
    data.extend_from_slice(&current);
    for _ in 1..steps {
        step_into(config, &current, &mut next);
        std::mem::swap(&mut current, &mut next);
        data.extend_from_slice(&current);
    }
    SpacetimeField::from_vec(steps, config.size, data)
}
