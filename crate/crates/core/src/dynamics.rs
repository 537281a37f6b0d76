//! Latent dynamics: a stochastic cellular automaton over local causal
//! states, estimated by counting and run forward with a spatial fallback
//! distribution for neighborhoods the rule has never seen.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::causal_states::{EpsilonModel, Reconstruction};
use crate::rng::{self, Purpose};
use crate::{Error, Grid, Result, StateField, MARGIN};

/// Successor histogram of one neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleEntry {
    pub counts: Vec<u64>,
    pub pmf: Vec<f64>,
}

impl RuleEntry {
    fn from_counts(counts: Vec<u64>) -> Self {
        let total: u64 = counts.iter().sum();
        let pmf = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self { counts, pmf }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Estimated local update rule: neighborhood of `2 radius + 1` states to a
/// PMF over the successor state. Unseen neighborhoods are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaRule {
    radius: usize,
    n_states: usize,
    table: BTreeMap<Vec<u32>, RuleEntry>,
}

impl ScaRule {
    /// Rule from raw successor counts.
    pub fn from_counts(radius: usize, n_states: usize, counts: BTreeMap<Vec<u32>, Vec<u64>>) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (key, c) in counts {
            if key.len() != 2 * radius + 1 || key.iter().any(|&s| s as usize >= n_states) {
                return Err(Error::config(format!("invalid neighborhood {key:?}")));
            }
            if c.len() != n_states || c.iter().sum::<u64>() == 0 {
                return Err(Error::config(format!("invalid histogram for neighborhood {key:?}")));
            }
            table.insert(key, RuleEntry::from_counts(c));
        }
        Ok(Self { radius, n_states, table })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn get(&self, neighborhood: &[u32]) -> Option<&RuleEntry> {
        self.table.get(neighborhood)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<u32>, &RuleEntry)> {
        self.table.iter()
    }

    /// Number of (neighborhood, successor) pairs the rule was counted from.
    pub fn total_count(&self) -> u64 {
        self.table.values().map(RuleEntry::total).sum()
    }

    /// True if every entry is a point mass.
    pub fn is_deterministic(&self) -> bool {
        self.table.values().all(|e| e.counts.iter().filter(|&&c| c > 0).count() == 1)
    }
}

fn neighborhood(row: &[i32], r: usize, radius: usize) -> Option<Vec<u32>> {
    let n = row.len() as isize;
    (-(radius as isize)..=radius as isize)
        .map(|d| {
            let s = row[(r as isize + d).rem_euclid(n) as usize];
            (s != MARGIN).then_some(s as u32)
        })
        .collect()
}

/// Estimates the rule by counting successors of every fully assigned
/// neighborhood.
pub fn estimate_phi(states: &StateField, radius: usize) -> Result<ScaRule> {
    if states.cols() < 2 * radius + 1 {
        return Err(Error::config("state field is narrower than the neighborhood"));
    }
    if states.data().iter().any(|&s| s < MARGIN) {
        return Err(Error::config("negative state label"));
    }
    let n_states = states.label_bound();
    let mut counts: BTreeMap<Vec<u32>, Vec<u64>> = BTreeMap::new();
    let mut pairs = 0u64;
    for t in 0..states.rows().saturating_sub(1) {
        let row = states.row(t);
        let next = states.row(t + 1);
        for (r, &succ) in next.iter().enumerate() {
            if succ == MARGIN {
                continue;
            }
            if let Some(key) = neighborhood(row, r, radius) {
                counts.entry(key).or_insert_with(|| vec![0; n_states])[succ as usize] += 1;
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::config("state field has no two consecutive assigned rows to count from"));
    }
    ScaRule::from_counts(radius, n_states, counts)
}

/// Running estimate of the spatial distribution of states.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDistribution {
    probs: Vec<f64>,
    lambda: f64,
}

fn row_histogram(row: &[i32], n_states: usize) -> Result<Vec<f64>> {
    let mut h = vec![0.0; n_states];
    for &s in row {
        if s < 0 || s as usize >= n_states {
            return Err(Error::config(format!("state {s} outside 0..{n_states}")));
        }
        h[s as usize] += 1.0;
    }
    let total = row.len() as f64;
    h.iter_mut().for_each(|x| *x /= total);
    Ok(h)
}

impl SpatialDistribution {
    /// Starts from the histogram of `row`. `lambda` in `[0, 1]` is the
    /// weight of each new row in the exponential moving average.
    pub fn from_row(row: &[i32], n_states: usize, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::config(format!("spatial lambda = {lambda} outside [0, 1]")));
        }
        if row.is_empty() {
            return Err(Error::config("empty row"));
        }
        Ok(Self { probs: row_histogram(row, n_states)?, lambda })
    }

    pub fn pmf(&self) -> &[f64] {
        &self.probs
    }

    /// `H <- (1 - lambda) H + lambda hist(row)`.
    pub fn update(&mut self, row: &[i32]) -> Result<()> {
        let h = row_histogram(row, self.probs.len())?;
        for (p, x) in self.probs.iter_mut().zip(h) {
            *p = (1.0 - self.lambda) * *p + self.lambda * x;
        }
        Ok(())
    }
}

/// Output of [`evolve_states`].
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    /// `steps x N` forecast; row `k` is `k + 1` steps after the seed row.
    pub states: StateField,
    /// Sites per step that fell back to the spatial distribution.
    pub fallbacks: Vec<usize>,
}

impl Evolution {
    pub fn fallback_rates(&self) -> Vec<f64> {
        let n = self.states.cols() as f64;
        self.fallbacks.iter().map(|&f| f as f64 / n).collect()
    }
}

/// Synchronous forecast of the state field from `last_row`.
///
/// Each site samples its successor from the rule entry of its neighborhood
/// or, if that neighborhood is unseen, from `spatial`. The spatial
/// distribution absorbs each row once the row is complete.
pub fn evolve_states(
    rule: &ScaRule,
    last_row: &[i32],
    steps: usize,
    seed: u64,
    mut spatial: SpatialDistribution,
) -> Result<Evolution> {
    let n = last_row.len();
    if n < 2 * rule.radius() + 1 {
        return Err(Error::config("row is narrower than the rule neighborhood"));
    }
    if last_row.iter().any(|&s| s < 0 || s as usize >= spatial.pmf().len()) {
        return Err(Error::config("seed row contains margin or out-of-range labels"));
    }
    let mut data = Vec::with_capacity(steps * n);
    let mut fallbacks = Vec::with_capacity(steps);
    let mut current = last_row.to_vec();
    for step in 1..=steps {
        let next: Vec<(i32, bool)> = (0..n)
            .into_par_iter()
            .map(|r| {
                let key = neighborhood(&current, r, rule.radius()).expect("no margin in forecast rows");
                let u = rng::point_uniform(seed, Purpose::Forecast, step, r);
                match rule.get(&key) {
                    Some(entry) => (rng::sample_pmf(&entry.pmf, u) as i32, false),
                    None => (rng::sample_pmf(spatial.pmf(), u) as i32, true),
                }
            })
            .collect();
        fallbacks.push(next.iter().filter(|x| x.1).count());
        current = next.into_iter().map(|x| x.0).collect();
        spatial.update(&current)?;
        data.extend_from_slice(&current);
    }
    Ok(Evolution { states: Grid::from_vec(steps, n, data)?, fallbacks })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastOptions {
    pub steps: usize,
    /// Seed of the latent evolution.
    pub seed: u64,
    /// Seed of the decoding of the forecast.
    pub decode_seed: u64,
    pub spatial_lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    /// Time index (in the input state field) of the seed row.
    pub start_row: usize,
    pub evolution: Evolution,
    /// Decoded forecast, aligned row for row with `evolution.states`.
    pub observable: Reconstruction,
}

/// Evolves the last fully assigned row of `states` and decodes the result.
pub fn forecast(
    model: &EpsilonModel,
    rule: &ScaRule,
    states: &StateField,
    opts: &ForecastOptions,
) -> Result<Forecast> {
    let start_row = (0..states.rows())
        .rev()
        .find(|&t| states.row(t).iter().all(|&s| s != MARGIN))
        .ok_or_else(|| Error::config("state field has no fully assigned row to forecast from"))?;
    let seed_row = states.row(start_row);
    let n_states = model.n_states().max(rule.n_states());
    let n = states.cols();
    if opts.steps == 0 {
        let empty = Grid::<f64>::filled(0, n, 0.0);
        return Ok(Forecast {
            start_row,
            evolution: Evolution { states: StateField::filled(0, n, 0), fallbacks: Vec::new() },
            observable: Reconstruction {
                field: empty.clone(),
                covered: Grid::filled(0, n, false),
                weight_sum: empty,
            },
        });
    }
    let spatial = SpatialDistribution::from_row(seed_row, n_states, opts.spatial_lambda)?;
    let evolution = evolve_states(rule, seed_row, opts.steps, opts.seed, spatial)?;
    let with_seed = Grid::from_vec(1, n, seed_row.to_vec())?.concat_rows(&evolution.states)?;
    let decoded = model.decode(&with_seed, opts.decode_seed)?;
    let rows = with_seed.rows();
    let observable = Reconstruction {
        field: decoded.field.slice_rows(1, rows),
        covered: decoded.covered.slice_rows(1, rows),
        weight_sum: decoded.weight_sum.slice_rows(1, rows),
    };
    Ok(Forecast { start_row, evolution, observable })
}
