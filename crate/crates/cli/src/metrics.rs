//! Evaluation of reconstructions and forecasts.

use lcs_core::{Grid, SpacetimeField, StateField, MARGIN};
use serde::{Deserialize, Serialize};

/// Number of most occupied training states treated as domain states.
pub const DOMAIN_STATES: usize = 4;

/// Mean absolute error over covered points; `None` if nothing is covered.
pub fn reconstruction_mae(truth: &SpacetimeField, recon: &SpacetimeField, covered: &Grid<bool>) -> Option<f64> {
    assert_eq!(truth.shape(), recon.shape());
    assert_eq!(truth.shape(), covered.shape());
    let (mut sum, mut n) = (0.0, 0usize);
    for ((&a, &b), &c) in truth.data().iter().zip(recon.data()).zip(covered.data()) {
        if c {
            sum += (a - b).abs();
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Fraction of assigned points in each state.
pub fn occupancy_fractions(states: &StateField, n_states: usize) -> Vec<f64> {
    let counts = states.occupancy(n_states);
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 }).collect()
}

/// Ids of the `k` most occupied states, ties by smaller id.
pub fn top_states(occupancy: &[f64], k: usize) -> Vec<i32> {
    let mut ids: Vec<usize> = (0..occupancy.len()).collect();
    ids.sort_by(|&a, &b| occupancy[b].total_cmp(&occupancy[a]).then(a.cmp(&b)));
    ids.into_iter().take(k).map(|s| s as i32).collect()
}

pub fn top_coverage(occupancy: &[f64], k: usize) -> f64 {
    top_states(occupancy, k).iter().map(|&s| occupancy[s as usize]).sum()
}

/// Per-lead scores of a latent forecast. Row `k` of the forecast is lead
/// `k + 1` and is compared with row `offset + k` of the reference field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeadScores {
    /// Fraction of reference-assigned sites where the forecast state matches.
    pub accuracy: Vec<Option<f64>>,
    /// Expected accuracy of drawing each site independently from the
    /// training state marginal.
    pub baseline: Vec<Option<f64>>,
    /// Among sites in a domain state in the reference, the fraction also
    /// forecast in a domain state.
    pub domain_persistence: Vec<Option<f64>>,
}

pub fn lead_scores(forecast: &StateField, reference: &StateField, offset: usize, marginal: &[f64], domain: &[i32]) -> LeadScores {
    assert_eq!(forecast.cols(), reference.cols());
    let leads = forecast.rows().min(reference.rows().saturating_sub(offset));
    let mut out = LeadScores { accuracy: vec![], baseline: vec![], domain_persistence: vec![] };
    for k in 0..leads {
        let (pred, truth) = (forecast.row(k), reference.row(offset + k));
        let (mut n, mut hits, mut base) = (0usize, 0usize, 0.0);
        let (mut nd, mut kept) = (0usize, 0usize);
        for (&p, &s) in pred.iter().zip(truth) {
            if s == MARGIN {
                continue;
            }
            n += 1;
            hits += (p == s) as usize;
            base += marginal.get(s as usize).copied().unwrap_or(0.0);
            if domain.contains(&s) {
                nd += 1;
                kept += domain.contains(&p) as usize;
            }
        }
        let frac = |a: f64, b: usize| (b > 0).then(|| a / b as f64);
        out.accuracy.push(frac(hits as f64, n));
        out.baseline.push(frac(base, n));
        out.domain_persistence.push(frac(kept as f64, nd));
    }
    out
}

/// Mean absolute error of each forecast row against reference row `offset + k`.
pub fn observable_errors(forecast: &SpacetimeField, reference: &SpacetimeField, offset: usize) -> Vec<f64> {
    let leads = forecast.rows().min(reference.rows().saturating_sub(offset));
    (0..leads)
        .map(|k| {
            let (a, b) = (forecast.row(k), reference.row(offset + k));
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
        })
        .collect()
}

pub fn mean(values: &[Option<f64>]) -> Option<f64> {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}
