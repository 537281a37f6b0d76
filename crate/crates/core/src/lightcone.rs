//! Lightcone templates, extraction and the decay-weighted lightcone metric.
//!
//! Flattening order is depth-major with ascending depth and, within one
//! depth, left to right by spatial offset `-c d ..= c d`. The past cone
//! contains the present point at depth 0; the future cone starts at depth 1.

use rayon::prelude::*;

use crate::{Error, Result, SpacetimeField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Past,
    Future,
}

/// Geometry of the past and future lightcone templates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightconeShape {
    /// Past depth in time steps.
    pub h_minus: usize,
    /// Future depth in time steps.
    pub h_plus: usize,
    /// Propagation speed in sites per step.
    pub c: usize,
    /// Temporal decay rate of the metric.
    pub tau: f64,
}

impl Default for LightconeShape {
    fn default() -> Self {
        Self { h_minus: 6, h_plus: 1, c: 1, tau: 1.0 }
    }
}

/// One flattened coordinate of a template: temporal depth and spatial offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeOffset {
    pub depth: usize,
    pub dr: isize,
}

impl LightconeShape {
    pub fn validate(&self) -> Result<()> {
        if self.h_minus < 1 || self.h_plus < 1 {
            return Err(Error::config("lightcone depths must be >= 1"));
        }
        if self.c < 1 {
            return Err(Error::config("propagation speed c must be >= 1"));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::config(format!("tau = {} must be finite and >= 0", self.tau)));
        }
        let deepest = self.h_minus.max(self.h_plus) as f64;
        if (-self.tau * deepest).exp() <= 0.0 {
            return Err(Error::config(format!("tau = {} underflows the decay weights", self.tau)));
        }
        Ok(())
    }

    pub fn past_len(&self) -> usize {
        (self.h_minus + 1) * (self.c * self.h_minus + 1)
    }

    pub fn future_len(&self) -> usize {
        // sum over d = 1..=h of (2 c d + 1)
        self.h_plus * (self.c * (self.h_plus + 1) + 1)
    }

    pub fn len(&self, side: Side) -> usize {
        match side {
            Side::Past => self.past_len(),
            Side::Future => self.future_len(),
        }
    }

    /// Template coordinates in canonical flattening order.
    pub fn offsets(&self, side: Side) -> Vec<ConeOffset> {
        let depths = match side {
            Side::Past => 0..=self.h_minus,
            Side::Future => 1..=self.h_plus,
        };
        let c = self.c as isize;
        depths
            .flat_map(|depth| {
                let reach = c * depth as isize;
                (-reach..=reach).map(move |dr| ConeOffset { depth, dr })
            })
            .collect()
    }

    /// Depth `d(n)` of every flattened coordinate.
    pub fn depths(&self, side: Side) -> Vec<usize> {
        self.offsets(side).into_iter().map(|o| o.depth).collect()
    }

    /// Minimum number of sites for the spatial extent of both templates.
    pub fn min_sites(&self) -> usize {
        2 * self.c + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightconeVector {
    pub side: Side,
    pub values: Vec<f64>,
}

/// `exp(-tau d(n))` for every flattened coordinate of one template.
pub fn decay_weights(shape: &LightconeShape, side: Side) -> Vec<f64> {
    shape.depths(side).into_iter().map(|d| (-shape.tau * d as f64).exp()).collect()
}

/// Square roots of [`decay_weights`]; multiplying coordinates by these turns
/// the lightcone metric into the Euclidean one.
pub fn scale_factors(shape: &LightconeShape, side: Side) -> Vec<f64> {
    decay_weights(shape, side).into_iter().map(f64::sqrt).collect()
}

/// Decay-weighted lightcone distance `sqrt(sum_n exp(-tau d(n)) (a_n - b_n)^2)`.
pub fn lc_distance(a: &LightconeVector, b: &LightconeVector, shape: &LightconeShape) -> Result<f64> {
    if a.side != b.side || a.values.len() != b.values.len() {
        return Err(Error::config("lightcone vectors differ in side or length"));
    }
    let weights = decay_weights(shape, a.side);
    if weights.len() != a.values.len() {
        return Err(Error::config(format!(
            "vector length {} does not match template length {}",
            a.values.len(),
            weights.len()
        )));
    }
    let sum: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .zip(&weights)
        .map(|((x, y), w)| w * (x - y) * (x - y))
        .sum();
    Ok(sum.sqrt())
}

fn check_width(field: &SpacetimeField, shape: &LightconeShape) -> Result<()> {
    if field.cols() < shape.min_sites() {
        return Err(Error::config(format!(
            "field width {} is below the lightcone width {}",
            field.cols(),
            shape.min_sites()
        )));
    }
    Ok(())
}

pub(crate) fn gather(field: &SpacetimeField, r: usize, t: usize, offsets: &[ConeOffset], past: bool, out: &mut [f64]) {
    for (slot, o) in out.iter_mut().zip(offsets) {
        let tt = if past { t - o.depth } else { t + o.depth };
        *slot = field.get_wrapped(r as isize + o.dr, tt);
    }
}

pub fn past_lightcone(
    field: &SpacetimeField,
    r: usize,
    t: usize,
    shape: &LightconeShape,
) -> Result<LightconeVector> {
    check_width(field, shape)?;
    if t < shape.h_minus || t >= field.rows() || r >= field.cols() {
        return Err(Error::Margin { r, t, reason: "no full past lightcone" });
    }
    let offsets = shape.offsets(Side::Past);
    let mut values = vec![0.0; offsets.len()];
    gather(field, r, t, &offsets, true, &mut values);
    Ok(LightconeVector { side: Side::Past, values })
}

pub fn future_lightcone(
    field: &SpacetimeField,
    r: usize,
    t: usize,
    shape: &LightconeShape,
) -> Result<LightconeVector> {
    check_width(field, shape)?;
    if t + shape.h_plus >= field.rows() || r >= field.cols() {
        return Err(Error::Margin { r, t, reason: "no full future lightcone" });
    }
    let offsets = shape.offsets(Side::Future);
    let mut values = vec![0.0; offsets.len()];
    gather(field, r, t, &offsets, false, &mut values);
    Ok(LightconeVector { side: Side::Future, values })
}

/// Dense row-major set of equal-length vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    dim: usize,
    data: Vec<f64>,
}

impl VectorSet {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::config(format!(
                "{} values do not form vectors of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::config("vectors differ in length"));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Multiplies coordinate `n` of every vector by `factors[n]`.
    pub fn scale_in_place(&mut self, factors: &[f64]) {
        assert_eq!(factors.len(), self.dim);
        self.data.par_chunks_mut(self.dim).for_each(|v| {
            for (x, f) in v.iter_mut().zip(factors) {
                *x *= f;
            }
        });
    }
}

/// Lightcones of every non-margin point of a field.
///
/// Rows are ordered time-major then site: row `i` belongs to
/// `t = first_row + i / sites`, `r = i % sites`.
#[derive(Debug, Clone)]
pub struct Lightcones {
    pub past: VectorSet,
    pub future: VectorSet,
    /// `margin[t]` is true for rows without full past or future cones.
    pub margin: Vec<bool>,
    pub first_row: usize,
    pub sites: usize,
}

impl Lightcones {
    pub fn len(&self) -> usize {
        self.past.len()
    }

    pub fn is_empty(&self) -> bool {
        self.past.is_empty()
    }

    /// Spacetime coordinate `(r, t)` of row `i`.
    pub fn coordinate(&self, i: usize) -> (usize, usize) {
        (i % self.sites, self.first_row + i / self.sites)
    }
}

/// Rows `t` in `[h_minus, rows - 1 - h_plus]` carry full past and future cones.
pub fn interior_rows(rows: usize, shape: &LightconeShape) -> Option<std::ops::Range<usize>> {
    if rows < shape.h_minus + shape.h_plus + 1 {
        None
    } else {
        Some(shape.h_minus..rows - shape.h_plus)
    }
}

/// Extracts past and future lightcones at every non-margin point.
pub fn extract_all(field: &SpacetimeField, shape: &LightconeShape) -> Result<Lightcones> {
    shape.validate()?;
    check_width(field, shape)?;
    let rows = interior_rows(field.rows(), shape).ok_or_else(|| {
        Error::config(format!(
            "field with {} rows is shorter than h- + h+ + 1 = {}",
            field.rows(),
            shape.h_minus + shape.h_plus + 1
        ))
    })?;
    let n = field.cols();
    let past = extract_side(field, shape, Side::Past, rows.clone());
    let future = extract_side(field, shape, Side::Future, rows.clone());
    let margin = (0..field.rows()).map(|t| !rows.contains(&t)).collect();
    Ok(Lightcones { past, future, margin, first_row: rows.start, sites: n })
}

/// Lightcones of one side for all sites of the given rows.
pub fn extract_side(
    field: &SpacetimeField,
    shape: &LightconeShape,
    side: Side,
    rows: std::ops::Range<usize>,
) -> VectorSet {
    let offsets = shape.offsets(side);
    let dim = offsets.len();
    let n = field.cols();
    let mut data = vec![0.0; rows.len() * n * dim];
    data.par_chunks_mut(n * dim).zip(rows).for_each(|(block, t)| {
        for (r, out) in block.chunks_exact_mut(dim).enumerate() {
            gather(field, r, t, &offsets, side == Side::Past, out);
        }
    });
    VectorSet { dim, data }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::Grid;

    fn ramp(rows: usize, cols: usize) -> SpacetimeField {
        let data = (0..rows * cols).map(|i| i as f64 / (rows * cols) as f64).collect();
        Grid::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn template_lengths() {
        let s = LightconeShape { h_minus: 6, h_plus: 1, c: 1, tau: 0.0 };
        assert_eq!(s.past_len(), 49);
        assert_eq!(s.future_len(), 3);
        let s = LightconeShape { h_minus: 3, h_plus: 2, c: 2, tau: 0.0 };
        assert_eq!(s.past_len(), 1 + 5 + 9 + 13);
        assert_eq!(s.future_len(), 5 + 9);
        assert_eq!(s.offsets(Side::Past).len(), s.past_len());
        assert_eq!(s.offsets(Side::Future).len(), s.future_len());
    }

    #[test]
    fn depth_one_cones_in_canonical_order() {
        let f = ramp(4, 5);
        let s = LightconeShape { h_minus: 1, h_plus: 1, c: 1, tau: 1.0 };
        let p = past_lightcone(&f, 0, 2, &s).unwrap();
        assert_eq!(p.values, vec![f.get(0, 2), f.get(4, 1), f.get(0, 1), f.get(1, 1)]);
        let q = future_lightcone(&f, 4, 1, &s).unwrap();
        assert_eq!(q.values, vec![f.get(3, 2), f.get(4, 2), f.get(0, 2)]);
    }

    #[test]
    fn margins_are_errors() {
        let f = ramp(8, 5);
        let s = LightconeShape { h_minus: 3, h_plus: 2, c: 1, tau: 1.0 };
        assert!(matches!(past_lightcone(&f, 0, 2, &s), Err(Error::Margin { .. })));
        assert!(past_lightcone(&f, 0, 3, &s).is_ok());
        assert!(matches!(future_lightcone(&f, 0, 6, &s), Err(Error::Margin { .. })));
        assert!(future_lightcone(&f, 0, 5, &s).is_ok());
    }

    #[test]
    fn uniform_field_gives_uniform_cones() {
        let f = Grid::filled(10, 6, 0.3);
        let s = LightconeShape { h_minus: 4, h_plus: 2, c: 1, tau: 1.0 };
        assert!(past_lightcone(&f, 2, 5, &s).unwrap().values.iter().all(|&v| v == 0.3));
        assert!(future_lightcone(&f, 2, 5, &s).unwrap().values.iter().all(|&v| v == 0.3));
    }

    #[test]
    fn extract_all_counts() {
        let s = LightconeShape { h_minus: 6, h_plus: 1, c: 1, tau: 1.0 };
        let f = ramp(8, 7);
        let lc = extract_all(&f, &s).unwrap();
        assert_eq!(lc.len(), 7);
        assert_eq!(lc.first_row, 6);
        assert!(extract_all(&ramp(7, 7), &s).is_err());

        let f = ramp(200, 20);
        let lc = extract_all(&f, &s).unwrap();
        assert_eq!(lc.len(), 193 * 20);
        let margin_rows: Vec<usize> = (0..200).filter(|&t| lc.margin[t]).collect();
        assert_eq!(margin_rows, vec![0, 1, 2, 3, 4, 5, 199]);
    }

    #[test]
    fn extract_rows_match_pointwise_cones() {
        let s = LightconeShape { h_minus: 2, h_plus: 2, c: 1, tau: 0.5 };
        let f = ramp(9, 6);
        let lc = extract_all(&f, &s).unwrap();
        let mut seen = std::collections::HashSet::new();
        for i in 0..lc.len() {
            let (r, t) = lc.coordinate(i);
            assert!(seen.insert((r, t)));
            assert_eq!(lc.past.row(i), past_lightcone(&f, r, t, &s).unwrap().values.as_slice());
            assert_eq!(lc.future.row(i), future_lightcone(&f, r, t, &s).unwrap().values.as_slice());
        }
        assert_eq!(seen.len(), (9 - 4) * 6);
    }

    #[test]
    fn weights() {
        let s = LightconeShape { h_minus: 2, h_plus: 1, c: 1, tau: 0.0 };
        assert!(decay_weights(&s, Side::Past).iter().all(|&w| w == 1.0));
        let s = LightconeShape { tau: 0.8, ..s };
        let w = decay_weights(&s, Side::Past);
        assert_eq!(w[0], 1.0);
        // exp(-1.6), 30-digit reference
        assert!((w[w.len() - 1] - 0.201_896_517_994_655_4).abs() < 1e-15);
        assert!(w.iter().all(|&x| x > 0.0 && x <= 1.0));
    }

    #[test]
    fn distance_examples() {
        let s = LightconeShape { h_minus: 2, h_plus: 1, c: 1, tau: 0.8 };
        let zero = LightconeVector { side: Side::Past, values: vec![0.0; s.past_len()] };
        assert_eq!(lc_distance(&zero, &zero, &s).unwrap(), 0.0);
        let mut a = zero.clone();
        a.values[0] = 1.0;
        assert_eq!(lc_distance(&a, &zero, &s).unwrap(), 1.0);
        let mut b = zero.clone();
        *b.values.last_mut().unwrap() = 1.0;
        // exp(-0.8), 30-digit reference
        assert!((lc_distance(&b, &zero, &s).unwrap() - 0.449_328_964_117_221_6).abs() < 1e-15);
        let short = LightconeVector { side: Side::Past, values: vec![0.0; 3] };
        assert!(lc_distance(&short, &zero, &s).is_err());
    }

    fn vec_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, len)
    }

    proptest! {
        #[test]
        fn metric_axioms(tau in 0.0f64..3.0, a in vec_strategy(9), b in vec_strategy(9), c in vec_strategy(9)) {
            let s = LightconeShape { h_minus: 2, h_plus: 1, c: 1, tau };
            let v = |x: &Vec<f64>| LightconeVector { side: Side::Past, values: x.clone() };
            let (a, b, c) = (v(&a), v(&b), v(&c));
            let ab = lc_distance(&a, &b, &s).unwrap();
            let ba = lc_distance(&b, &a, &s).unwrap();
            let bc = lc_distance(&b, &c, &s).unwrap();
            let ac = lc_distance(&a, &c, &s).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(lc_distance(&a, &a, &s).unwrap(), 0.0);
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn extraction_commutes_with_rotation(k in 0isize..7, seed in 0u64..1000) {
            let s = LightconeShape { h_minus: 2, h_plus: 1, c: 1, tau: 1.0 };
            let data: Vec<f64> = (0..6 * 7).map(|i| ((i as u64 * 2654435761 + seed) % 1000) as f64 / 1000.0).collect();
            let f = Grid::from_vec(6, 7, data).unwrap();
            let a = extract_all(&f, &s).unwrap();
            let b = extract_all(&f.roll_sites(k), &s).unwrap();
            for i in 0..a.len() {
                let (r, t) = a.coordinate(i);
                let j = (t - b.first_row) * 7 + (r as isize + k).rem_euclid(7) as usize;
                prop_assert_eq!(a.past.row(i), b.past.row(j));
                prop_assert_eq!(a.future.row(i), b.future.row(j));
            }
        }
    }
}
