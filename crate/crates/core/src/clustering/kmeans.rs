//! Lloyd's K-Means under the lightcone metric.
//!
//! Coordinates are multiplied by `sqrt(exp(-tau d(n)))` up front, so both
//! the nearest-centroid step and the mean step are exact Euclidean
//! operations in the scaled space. Reductions run over fixed-size chunks
//! combined in chunk order, so results do not depend on the thread count.

use rand::Rng;
use rayon::prelude::*;

use crate::lightcone::{scale_factors, LightconeShape, Side, VectorSet};
use crate::rng::{self, Purpose};
use crate::{Error, Result};

const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once the relative inertia improvement drops below this.
    pub rel_tol: f64,
    /// Independent seedings; the run with the lowest final inertia wins.
    pub restarts: usize,
}

impl KMeansOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        Self { k, seed, max_iter: 100, rel_tol: 1e-6, restarts: 1 }
    }
}

/// Raw Lloyd output in whatever coordinates the data was given in.
#[derive(Debug, Clone)]
pub struct LloydRun {
    pub centroids: VectorSet,
    pub labels: Vec<u32>,
    /// Inertia after every assignment step, starting with the seeding.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

/// Fitted γ-equivalence over one lightcone side.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    shape: LightconeShape,
    side: Side,
    centroids: VectorSet,
    scaled: VectorSet,
    factors: Vec<f64>,
    counts: Vec<u64>,
    inertia: f64,
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub model: ClusterModel,
    /// Cluster id of every training vector under the returned model.
    pub labels: Vec<u32>,
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid and its squared distance; ties go to the
/// lowest index.
#[inline]
fn nearest(v: &[f64], centroids: &VectorSet) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(v, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn ordered_sum(values: &[f64]) -> f64 {
    let partials: Vec<f64> = values.par_chunks(CHUNK).map(|c| c.iter().sum::<f64>()).collect();
    partials.iter().sum()
}

/// Assigns every vector; returns the inertia and the number of changed labels.
fn assign_all(data: &VectorSet, centroids: &VectorSet, labels: &mut [u32], dists: &mut [f64]) -> (f64, usize) {
    let dim = data.dim();
    let partials: Vec<(f64, usize)> = data
        .as_slice()
        .par_chunks(CHUNK * dim)
        .zip(labels.par_chunks_mut(CHUNK))
        .zip(dists.par_chunks_mut(CHUNK))
        .map(|((block, labels), dists)| {
            let mut sum = 0.0;
            let mut changed = 0;
            for ((v, label), dist) in block.chunks_exact(dim).zip(labels.iter_mut()).zip(dists.iter_mut()) {
                let (j, d) = nearest(v, centroids);
                if *label != j as u32 {
                    changed += 1;
                    *label = j as u32;
                }
                *dist = d;
                sum += d;
            }
            (sum, changed)
        })
        .collect();
    partials.iter().fold((0.0, 0), |(s, c), &(ps, pc)| (s + ps, c + pc))
}

fn cluster_sums(data: &VectorSet, labels: &[u32], k: usize) -> (Vec<f64>, Vec<u64>) {
    let dim = data.dim();
    let partials: Vec<(Vec<f64>, Vec<u64>)> = data
        .as_slice()
        .par_chunks(CHUNK * dim)
        .zip(labels.par_chunks(CHUNK))
        .map(|(block, labels)| {
            let mut sums = vec![0.0; k * dim];
            let mut counts = vec![0u64; k];
            for (v, &l) in block.chunks_exact(dim).zip(labels) {
                let l = l as usize;
                counts[l] += 1;
                for (s, x) in sums[l * dim..(l + 1) * dim].iter_mut().zip(v) {
                    *s += x;
                }
            }
            (sums, counts)
        })
        .collect();
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0u64; k];
    for (ps, pc) in partials {
        for (s, p) in sums.iter_mut().zip(ps) {
            *s += p;
        }
        for (c, p) in counts.iter_mut().zip(pc) {
            *c += p;
        }
    }
    (sums, counts)
}

/// Samples an index with probability proportional to `weights`.
fn weighted_index(weights: &[f64], total: f64, u: f64) -> usize {
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if target < acc {
            return i;
        }
    }
    last
}

/// Greedy distance-weighted seeding. Several candidates are drawn per
/// round and the one lowering the potential most is kept. Seeding stops
/// early when every point coincides with a chosen center.
fn seed_centroids(data: &VectorSet, k: usize, seed: u64) -> VectorSet {
    let mut rng = rng::stream(seed, Purpose::KMeansSeeding);
    let dim = data.dim();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let first = rng.random_range(0..data.len());
    let mut chosen = data.row(first).to_vec();
    let mut d2: Vec<f64> = data.as_slice().par_chunks(dim).map(|v| sq_dist(v, data.row(first))).collect();
    while chosen.len() / dim < k {
        let total = ordered_sum(&d2);
        if total <= 0.0 {
            break;
        }
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let idx = weighted_index(&d2, total, rng.random::<f64>());
            let cand = data.row(idx);
            let next: Vec<f64> = data
                .as_slice()
                .par_chunks(dim)
                .zip(d2.par_iter())
                .map(|(v, &d)| d.min(sq_dist(v, cand)))
                .collect();
            let potential = ordered_sum(&next);
            if best.as_ref().is_none_or(|b| potential < b.0) {
                best = Some((potential, idx, next));
            }
        }
        let (_, idx, next) = best.expect("at least two trials");
        chosen.extend_from_slice(data.row(idx));
        d2 = next;
    }
    VectorSet::new(dim, chosen).expect("whole vectors")
}

fn validate(data: &VectorSet, opts: &KMeansOptions) -> Result<()> {
    if opts.k == 0 {
        return Err(Error::config("K-Means needs k >= 1"));
    }
    if data.len() < opts.k {
        return Err(Error::config(format!("{} vectors cannot form {} clusters", data.len(), opts.k)));
    }
    if opts.rel_tol.is_nan() || opts.rel_tol < 0.0 {
        return Err(Error::config("rel_tol must be >= 0"));
    }
    if data.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite value in K-Means input"));
    }
    Ok(())
}

/// Plain Euclidean Lloyd iteration.
///
/// Clusters that empty out are re-seeded with the points farthest from
/// their centroids; when no point lies off its centroid the cluster is
/// dropped, so fewer than `k` centroids come back on degenerate data.
pub fn lloyd(data: &VectorSet, opts: &KMeansOptions) -> Result<LloydRun> {
    validate(data, opts)?;
    let dim = data.dim();
    let m = data.len();
    let mut centroids = seed_centroids(data, opts.k, opts.seed);
    let mut labels = vec![u32::MAX; m];
    let mut dists = vec![0.0; m];
    let (mut inertia, _) = assign_all(data, &centroids, &mut labels, &mut dists);
    let mut trace = vec![inertia];
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let k = centroids.len();
        let (sums, counts) = cluster_sums(data, &labels, k);
        let mut next = sums;
        for (j, &n) in counts.iter().enumerate() {
            if n > 0 {
                for x in &mut next[j * dim..(j + 1) * dim] {
                    *x /= n as f64;
                }
            }
        }
        let empties: Vec<usize> = (0..k).filter(|&j| counts[j] == 0).collect();
        let mut keep = vec![true; k];
        if !empties.is_empty() {
            let means = VectorSet::new(dim, next.clone()).expect("whole vectors");
            let mut far: Vec<(f64, usize)> = data
                .iter()
                .zip(&labels)
                .enumerate()
                .map(|(i, (v, &l))| (sq_dist(v, means.row(l as usize)), i))
                .filter(|&(d, _)| d > 0.0)
                .collect();
            far.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut donors = far.into_iter();
            for j in empties {
                match donors.next() {
                    Some((_, i)) => next[j * dim..(j + 1) * dim].copy_from_slice(data.row(i)),
                    None => keep[j] = false,
                }
            }
        }
        let reseeded = keep.iter().any(|&x| !x) || counts.contains(&0);
        let next: Vec<f64> = next
            .chunks_exact(dim)
            .zip(&keep)
            .filter(|(_, &kept)| kept)
            .flat_map(|(c, _)| c.iter().copied())
            .collect();
        centroids = VectorSet::new(dim, next).expect("whole vectors");
        let (new_inertia, changed) = assign_all(data, &centroids, &mut labels, &mut dists);
        trace.push(new_inertia);
        let stalled = inertia <= 0.0 || inertia - new_inertia < opts.rel_tol * inertia;
        inertia = new_inertia;
        if (changed == 0 && !reseeded) || stalled {
            break;
        }
    }

    Ok(LloydRun { centroids, labels, inertia_trace: trace, iterations })
}

/// K-Means under the lightcone metric on unscaled lightcone vectors.
pub fn kmeans(vectors: &VectorSet, shape: &LightconeShape, side: Side, opts: &KMeansOptions) -> Result<KMeansFit> {
    shape.validate()?;
    if vectors.dim() != shape.len(side) {
        return Err(Error::config(format!(
            "vectors of dimension {} do not match the {side:?} template length {}",
            vectors.dim(),
            shape.len(side)
        )));
    }
    let mut scaled = vectors.clone();
    scaled.scale_in_place(&scale_factors(shape, side));
    kmeans_prescaled(&scaled, shape, side, opts)
}

/// Same as [`kmeans`] for vectors already multiplied by the scale factors.
pub fn kmeans_prescaled(
    scaled: &VectorSet,
    shape: &LightconeShape,
    side: Side,
    opts: &KMeansOptions,
) -> Result<KMeansFit> {
    let factors = scale_factors(shape, side);
    if scaled.dim() != factors.len() {
        return Err(Error::config("scaled vectors do not match the template length"));
    }
    let mut run = lloyd(scaled, opts)?;
    for restart in 1..opts.restarts {
        // high bits keep restart seeds clear of small neighbouring seeds
        let seed = opts.seed ^ ((restart as u64) << 40);
        let candidate = lloyd(scaled, &KMeansOptions { seed, ..*opts })?;
        let final_inertia = |r: &LloydRun| *r.inertia_trace.last().expect("nonempty trace");
        if final_inertia(&candidate) < final_inertia(&run) {
            run = candidate;
        }
    }
    let unscaled: Vec<f64> = run
        .centroids
        .iter()
        .flat_map(|c| c.iter().zip(&factors).map(|(x, f)| x / f).collect::<Vec<_>>())
        .collect();
    let mut model = ClusterModel::new(*shape, side, VectorSet::new(scaled.dim(), unscaled)?)?;
    loop {
        let mut labels = vec![u32::MAX; scaled.len()];
        let mut dists = vec![0.0; scaled.len()];
        let (inertia, _) = assign_all(scaled, &model.scaled, &mut labels, &mut dists);
        let mut counts = vec![0u64; model.k()];
        for &l in &labels {
            counts[l as usize] += 1;
        }
        if counts.iter().all(|&n| n > 0) {
            model.counts = counts;
            model.inertia = inertia;
            return Ok(KMeansFit {
                model,
                labels,
                inertia_trace: run.inertia_trace,
                iterations: run.iterations,
            });
        }
        let kept: Vec<f64> = model
            .centroids
            .iter()
            .zip(&counts)
            .filter(|(_, &n)| n > 0)
            .flat_map(|(c, _)| c.iter().copied())
            .collect();
        model = ClusterModel::new(*shape, side, VectorSet::new(scaled.dim(), kept)?)?;
    }
}

impl ClusterModel {
    /// Model with the given unscaled centroids; counts and inertia start at 0.
    pub fn new(shape: LightconeShape, side: Side, centroids: VectorSet) -> Result<Self> {
        shape.validate()?;
        if centroids.dim() != shape.len(side) || centroids.is_empty() {
            return Err(Error::config("centroids do not match the lightcone template"));
        }
        let factors = scale_factors(&shape, side);
        let mut scaled = centroids.clone();
        scaled.scale_in_place(&factors);
        let k = centroids.len();
        Ok(Self { shape, side, centroids, scaled, factors, counts: vec![0; k], inertia: 0.0 })
    }

    pub fn with_stats(mut self, counts: Vec<u64>, inertia: f64) -> Result<Self> {
        if counts.len() != self.k() {
            return Err(Error::config("cluster counts do not match the number of centroids"));
        }
        self.counts = counts;
        self.inertia = inertia;
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn shape(&self) -> &LightconeShape {
        &self.shape
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.centroids.dim()
    }

    /// Centroids in unscaled lightcone coordinates.
    pub fn centroids(&self) -> &VectorSet {
        &self.centroids
    }

    pub fn centroid(&self, j: usize) -> &[f64] {
        self.centroids.row(j)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Sum of squared lightcone distances of training vectors to their centroids.
    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    pub fn scale_factors(&self) -> &[f64] {
        &self.factors
    }

    /// Nearest centroid under the lightcone metric, lowest id on ties.
    pub fn assign(&self, vector: &[f64]) -> Result<usize> {
        if vector.len() != self.dim() {
            return Err(Error::config(format!(
                "vector of length {} does not match cluster dimension {}",
                vector.len(),
                self.dim()
            )));
        }
        let scaled: Vec<f64> = vector.iter().zip(&self.factors).map(|(x, f)| x * f).collect();
        Ok(self.assign_scaled(&scaled))
    }

    /// Same as [`assign`](Self::assign) for a vector already multiplied by the scale factors.
    pub fn assign_scaled(&self, scaled: &[f64]) -> usize {
        nearest(scaled, &self.scaled).0
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::Rng;

    use super::*;
    use crate::lightcone::{lc_distance, LightconeVector};
    use crate::rng::{stream, Purpose};

    fn shape(tau: f64) -> LightconeShape {
        LightconeShape { h_minus: 1, h_plus: 1, c: 1, tau }
    }

    fn random_set(n: usize, dim: usize, seed: u64) -> VectorSet {
        let mut rng = stream(seed, Purpose::Test);
        VectorSet::new(dim, (0..n * dim).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let data = random_set(500, 4, 1);
        let fit = kmeans(&data, &shape(0.7), Side::Past, &KMeansOptions::new(1, 9)).unwrap();
        for n in 0..4 {
            let mean = data.iter().map(|v| v[n]).sum::<f64>() / 500.0;
            assert!((fit.model.centroid(0)[n] - mean).abs() < 1e-12);
        }
        assert_eq!(fit.model.counts(), &[500]);
    }

    /// Exhaustive search over every 2-partition of a small point set.
    fn brute_force_two_clusters(data: &VectorSet, factors: &[f64]) -> f64 {
        let m = data.len();
        let mut best = f64::INFINITY;
        for mask in 1..(1u32 << m) - 1 {
            let mut cost = 0.0;
            for side in [true, false] {
                let members: Vec<&[f64]> =
                    (0..m).filter(|&i| ((mask >> i) & 1 == 1) == side).map(|i| data.row(i)).collect();
                for n in 0..data.dim() {
                    let mean = members.iter().map(|v| v[n]).sum::<f64>() / members.len() as f64;
                    cost += members.iter().map(|v| factors[n].powi(2) * (v[n] - mean).powi(2)).sum::<f64>();
                }
            }
            best = best.min(cost);
        }
        best
    }

    #[test]
    fn separated_clouds() {
        let s = shape(0.8);
        let mut rng = stream(3, Purpose::Test);
        let mut rows = Vec::new();
        for i in 0..12 {
            let base = if i < 6 { 0.1 } else { 0.9 };
            rows.push((0..4).map(|_| base + 0.02 * rng.random::<f64>()).collect::<Vec<_>>());
        }
        let data = VectorSet::from_rows(&rows).unwrap();
        let fit = kmeans(&data, &s, Side::Past, &KMeansOptions::new(2, 4)).unwrap();
        assert!(fit.labels[..6].iter().all(|&l| l == fit.labels[0]));
        assert!(fit.labels[6..].iter().all(|&l| l == fit.labels[6]));
        assert_ne!(fit.labels[0], fit.labels[6]);
        let oracle = brute_force_two_clusters(&data, &scale_factors(&s, Side::Past));
        assert!((fit.model.inertia() - oracle).abs() < 1e-12 * oracle.max(1.0));
    }

    #[test]
    fn degenerate_data_shrinks_k() {
        let data = VectorSet::new(4, [0.3, 0.3, 0.3, 0.3].repeat(50)).unwrap();
        let fit = kmeans(&data, &shape(1.0), Side::Past, &KMeansOptions::new(10, 1)).unwrap();
        assert_eq!(fit.model.k(), 1);
        assert_eq!(fit.model.counts(), &[50]);

        let mut rows = vec![vec![0.1; 4]; 20];
        rows.extend(vec![vec![0.7; 4]; 30]);
        let data = VectorSet::from_rows(&rows).unwrap();
        let fit = kmeans(&data, &shape(1.0), Side::Past, &KMeansOptions::new(10, 1)).unwrap();
        assert_eq!(fit.model.k(), 2);
        assert!(fit.model.inertia() < 1e-20);
    }

    #[test]
    fn errors() {
        let data = random_set(3, 4, 2);
        assert!(kmeans(&data, &shape(1.0), Side::Past, &KMeansOptions::new(4, 1)).is_err());
        assert!(kmeans(&data, &shape(1.0), Side::Past, &KMeansOptions::new(0, 1)).is_err());
        assert!(kmeans(&data, &shape(1.0), Side::Future, &KMeansOptions::new(1, 1)).is_err());
        let bad = VectorSet::new(4, vec![f64::NAN, 0.0, 0.0, 0.0, 0.1, 0.1, 0.1, 0.1]).unwrap();
        assert!(matches!(
            kmeans(&bad, &shape(1.0), Side::Past, &KMeansOptions::new(1, 1)),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn assign_rules() {
        let s = shape(0.0);
        let rows = vec![vec![0.0; 3], vec![1.0; 3], vec![0.5; 3], vec![2.0; 3], vec![3.0; 3], vec![1.0; 3]];
        let model = ClusterModel::new(s, Side::Future, VectorSet::from_rows(&rows).unwrap()).unwrap();
        assert_eq!(model.assign(&[3.0; 3]).unwrap(), 4);
        // 1.5 is equidistant from centroids 1, 3 and 5
        assert_eq!(model.assign(&[1.5; 3]).unwrap(), 1);
        assert!(model.assign(&[0.0; 2]).is_err());
    }

    #[test]
    fn assign_matches_exhaustive_scan() {
        let s = shape(0.9);
        let model = ClusterModel::new(s, Side::Past, random_set(7, 4, 4)).unwrap();
        let probes = random_set(300, 4, 5);
        for v in probes.iter() {
            let v = LightconeVector { side: Side::Past, values: v.to_vec() };
            let mut best = (0, f64::INFINITY);
            for j in 0..model.k() {
                let c = LightconeVector { side: Side::Past, values: model.centroid(j).to_vec() };
                let d = lc_distance(&v, &c, &s).unwrap();
                if d < best.1 {
                    best = (j, d);
                }
            }
            assert_eq!(model.assign(&v.values).unwrap(), best.0);
        }
    }

    #[test]
    fn training_vectors_sit_at_their_nearest_centroid() {
        let data = random_set(2000, 4, 6);
        let fit = kmeans(&data, &shape(0.5), Side::Past, &KMeansOptions::new(6, 2)).unwrap();
        assert_eq!(fit.model.counts().iter().sum::<u64>(), 2000);
        for (v, &l) in data.iter().zip(&fit.labels) {
            assert_eq!(fit.model.assign(v).unwrap(), l as usize);
        }
    }

    #[test]
    fn scaled_space_equivalence() {
        let s = shape(1.3);
        let data = random_set(1500, 4, 8);
        let opts = KMeansOptions::new(5, 77);
        let fit = kmeans(&data, &s, Side::Past, &opts).unwrap();
        let mut scaled = data.clone();
        scaled.scale_in_place(&scale_factors(&s, Side::Past));
        let plain = lloyd(&scaled, &opts).unwrap();
        assert_eq!(fit.labels, plain.labels);
        assert_eq!(fit.inertia_trace, plain.inertia_trace);
    }

    #[test]
    fn restarts_never_worsen_the_fit() {
        let s = shape(0.7);
        let data = random_set(800, 4, 21);
        let one = kmeans(&data, &s, Side::Past, &KMeansOptions::new(6, 5)).unwrap();
        let many = kmeans(&data, &s, Side::Past, &KMeansOptions { restarts: 4, ..KMeansOptions::new(6, 5) }).unwrap();
        assert!(many.model.inertia() <= one.model.inertia() * (1.0 + 1e-12));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn inertia_is_monotone(seed in any::<u64>(), k in 1usize..8) {
            let data = random_set(400, 4, seed);
            let run = lloyd(&data, &KMeansOptions { k, seed, max_iter: 50, rel_tol: 0.0, restarts: 1 }).unwrap();
            for w in run.inertia_trace.windows(2) {
                prop_assert!(w[1] <= w[0], "{:?}", run.inertia_trace);
            }
        }
    }
}
