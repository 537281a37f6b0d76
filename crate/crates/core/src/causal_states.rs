//! The spacetime autoencoder: the ε-map `ψ(γ⁻(ℓ⁻))` as encoder and a
//! stochastic decoder that places sampled future-cluster centroids.

use rayon::prelude::*;

use crate::clustering::{
    agglomerate, build_contingency, kmeans_prescaled, ClusterModel, KMeansOptions, PsiMap,
};
use crate::lightcone::{extract_all, gather, interior_rows, LightconeShape, Side};
use crate::rng::{self, Purpose};
use crate::{Error, Grid, Result, SpacetimeField, StateField, MARGIN};

const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Per-depth weight of a decoded prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeWeighting {
    /// `exp(-tau d)`, the factor the metric applies to squared differences.
    #[default]
    Exponential,
    /// `exp(-tau d / 2)`, the factor the metric applies to differences.
    SqrtExponential,
}

impl DecodeWeighting {
    pub fn weight(self, tau: f64, depth: usize) -> f64 {
        match self {
            DecodeWeighting::Exponential => (-tau * depth as f64).exp(),
            DecodeWeighting::SqrtExponential => (-tau * depth as f64 / 2.0).exp(),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            DecodeWeighting::Exponential => 0,
            DecodeWeighting::SqrtExponential => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(DecodeWeighting::Exponential),
            1 => Ok(DecodeWeighting::SqrtExponential),
            _ => Err(Error::config(format!("unknown decode weighting code {code}"))),
        }
    }
}

/// Which rows [`EpsilonModel::encode_with`] leaves unassigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncodeMode {
    /// Rows without a full past or a full future cone.
    #[default]
    BothMargins,
    /// Only rows without a full past cone; for encoding the leading edge
    /// of a field as it streams in.
    PastMarginOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub k_past: usize,
    pub k_future: usize,
    pub chi2_alpha: f64,
    pub seed: u64,
    pub max_iter: usize,
    pub rel_tol: f64,
    /// K-Means restarts per side.
    pub restarts: usize,
    pub weighting: DecodeWeighting,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            k_past: 10,
            k_future: 40,
            chi2_alpha: 0.05,
            seed: 0,
            max_iter: 100,
            rel_tol: 1e-6,
            restarts: 1,
            weighting: DecodeWeighting::Exponential,
        }
    }
}

/// Learned encoder and decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonModel {
    shape: LightconeShape,
    gamma_minus: ClusterModel,
    gamma_plus: ClusterModel,
    psi: PsiMap,
    weighting: DecodeWeighting,
}

/// Decoded observable field with its coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub field: SpacetimeField,
    /// True where at least one prediction landed.
    pub covered: Grid<bool>,
    /// Sum of prediction weights per point.
    pub weight_sum: Grid<f64>,
}

/// Fits the ε-map: K-Means on past and future cones, joint counting, and
/// chi-square agglomeration of past clusters.
pub fn fit(field: &SpacetimeField, shape: &LightconeShape, opts: &FitOptions) -> Result<EpsilonModel> {
    let cones = extract_all(field, shape)?;
    let kopts = |k, seed| KMeansOptions { k, seed, max_iter: opts.max_iter, rel_tol: opts.rel_tol, restarts: opts.restarts };

    let mut past = cones.past;
    past.scale_in_place(&crate::lightcone::scale_factors(shape, Side::Past));
    let past_fit = kmeans_prescaled(&past, shape, Side::Past, &kopts(opts.k_past, opts.seed))?;
    drop(past);

    let mut future = cones.future;
    future.scale_in_place(&crate::lightcone::scale_factors(shape, Side::Future));
    let future_fit =
        kmeans_prescaled(&future, shape, Side::Future, &kopts(opts.k_future, opts.seed.wrapping_add(1)))?;

    let table = build_contingency(
        &past_fit.labels,
        &future_fit.labels,
        past_fit.model.k(),
        future_fit.model.k(),
    )?;
    let psi = agglomerate(&table, opts.chi2_alpha)?;
    EpsilonModel::from_parts(*shape, past_fit.model, future_fit.model, psi, opts.weighting)
}

impl EpsilonModel {
    pub fn from_parts(
        shape: LightconeShape,
        gamma_minus: ClusterModel,
        gamma_plus: ClusterModel,
        psi: PsiMap,
        weighting: DecodeWeighting,
    ) -> Result<Self> {
        shape.validate()?;
        if gamma_minus.side() != Side::Past || gamma_plus.side() != Side::Future {
            return Err(Error::config("cluster models are on the wrong lightcone sides"));
        }
        if gamma_minus.shape() != &shape || gamma_plus.shape() != &shape {
            return Err(Error::config("cluster models disagree with the lightcone shape"));
        }
        if psi.mapping.len() != gamma_minus.k() {
            return Err(Error::config("psi map does not cover every past cluster"));
        }
        if psi.state_pmfs.iter().any(|p| p.len() != gamma_plus.k()) {
            return Err(Error::config("state distributions do not match the future clusters"));
        }
        Ok(Self { shape, gamma_minus, gamma_plus, psi, weighting })
    }

    pub fn shape(&self) -> &LightconeShape {
        &self.shape
    }

    pub fn gamma_minus(&self) -> &ClusterModel {
        &self.gamma_minus
    }

    pub fn gamma_plus(&self) -> &ClusterModel {
        &self.gamma_plus
    }

    pub fn psi(&self) -> &PsiMap {
        &self.psi
    }

    pub fn weighting(&self) -> DecodeWeighting {
        self.weighting
    }

    pub fn n_states(&self) -> usize {
        self.psi.n_states()
    }

    /// State of a single past lightcone vector.
    pub fn state_of(&self, past: &[f64]) -> Result<i32> {
        let cluster = self.gamma_minus.assign(past)?;
        Ok(self.psi.state_of(cluster) as i32)
    }

    /// Encodes a field, leaving both margins unassigned.
    pub fn encode(&self, field: &SpacetimeField) -> Result<StateField> {
        self.encode_with(field, EncodeMode::BothMargins)
    }

    pub fn encode_with(&self, field: &SpacetimeField, mode: EncodeMode) -> Result<StateField> {
        let shape = &self.shape;
        if field.cols() < shape.min_sites() {
            return Err(Error::config(format!(
                "field width {} is below the lightcone width {}",
                field.cols(),
                shape.min_sites()
            )));
        }
        let rows = match mode {
            EncodeMode::BothMargins => interior_rows(field.rows(), shape),
            EncodeMode::PastMarginOnly => {
                (field.rows() > shape.h_minus).then_some(shape.h_minus..field.rows())
            }
        }
        .ok_or_else(|| Error::config(format!("field with {} rows is too short to encode", field.rows())))?;

        let offsets = shape.offsets(Side::Past);
        let factors = self.gamma_minus.scale_factors();
        let n = field.cols();
        let mut out = StateField::filled(field.rows(), n, MARGIN);
        out.data_mut()[rows.start * n..rows.end * n]
            .par_chunks_mut(n)
            .zip(rows)
            .for_each(|(labels, t)| {
                let mut buf = vec![0.0; offsets.len()];
                for (r, label) in labels.iter_mut().enumerate() {
                    gather(field, r, t, &offsets, true, &mut buf);
                    for (x, f) in buf.iter_mut().zip(factors) {
                        *x *= f;
                    }
                    *label = self.psi.state_of(self.gamma_minus.assign_scaled(&buf)) as i32;
                }
            });
        Ok(out)
    }

    /// Future cluster sampled for every assigned point; -1 elsewhere.
    pub fn sample_future_clusters(&self, states: &StateField, seed: u64) -> Result<Grid<i32>> {
        let n_states = self.n_states() as i32;
        if let Some(&bad) = states.data().iter().find(|&&s| s != MARGIN && !(0..n_states).contains(&s)) {
            return Err(Error::config(format!("state label {bad} outside 0..{n_states}")));
        }
        let n = states.cols();
        let mut samples = Grid::filled(states.rows(), n, -1);
        samples.data_mut().par_chunks_mut(n).enumerate().for_each(|(t, row)| {
            for (r, slot) in row.iter_mut().enumerate() {
                let s = states.get(r, t);
                if s != MARGIN {
                    let u = rng::point_uniform(seed, Purpose::Decode, t, r);
                    *slot = rng::sample_pmf(&self.psi.state_pmfs[s as usize], u) as i32;
                }
            }
        });
        Ok(samples)
    }

    /// Stochastic decoding.
    ///
    /// Every assigned point samples one future cluster from its state's
    /// predictive distribution and places that cluster's centroid with its
    /// apex at the point. Each target averages the predictions landing on
    /// it, weighted per depth. Points nothing lands on are left at 0 and
    /// flagged in `covered`.
    pub fn decode(&self, states: &StateField, seed: u64) -> Result<Reconstruction> {
        if states.cols() < self.shape.min_sites() {
            return Err(Error::config("state field is narrower than the lightcone"));
        }
        if states.assigned_count() == 0 {
            return Err(Error::config("cannot decode a state field that is entirely margin"));
        }
        let samples = self.sample_future_clusters(states, seed)?;
        let offsets = self.shape.offsets(Side::Future);
        let weights: Vec<f64> =
            offsets.iter().map(|o| self.weighting.weight(self.shape.tau, o.depth)).collect();
        let (rows, n) = states.shape();

        let mut values = vec![0.0; rows * n];
        let mut weight_sum = vec![0.0; rows * n];
        values
            .par_chunks_mut(n)
            .zip(weight_sum.par_chunks_mut(n))
            .enumerate()
            .for_each(|(t, (vals, wsums))| {
                for r in 0..n {
                    let mut acc = 0.0;
                    let mut wsum = 0.0;
                    for (idx, (o, &w)) in offsets.iter().zip(&weights).enumerate() {
                        if o.depth > t {
                            continue;
                        }
                        let c = samples.get_wrapped(r as isize - o.dr, t - o.depth);
                        if c < 0 {
                            continue;
                        }
                        acc += w * self.gamma_plus.centroid(c as usize)[idx];
                        wsum += w;
                    }
                    if wsum > 0.0 {
                        vals[r] = (acc / wsum).clamp(0.0, BELOW_ONE);
                    }
                    wsums[r] = wsum;
                }
            });

        let weight_sum = Grid::from_vec(rows, n, weight_sum)?;
        Ok(Reconstruction {
            field: Grid::from_vec(rows, n, values)?,
            covered: weight_sum.map(|w| w > 0.0),
            weight_sum,
        })
    }
}
