//! Rectangular spacetime grids: time runs down the rows, space along the
//! columns, and space is periodic.

use crate::{Error, Result};

/// Label of spacetime points that carry no local causal state.
pub const MARGIN: i32 = -1;

/// Row-major `rows x cols` grid. Row `t` is the spatial configuration at
/// time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Observable field `X(r, t)` with values in `[0, 1)`.
pub type SpacetimeField = Grid<f64>;

/// Latent field `S(r, t)`; [`MARGIN`] marks unassigned points.
pub type StateField = Grid<i32>;

impl<T: Copy> Grid<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::config("grid must have at least one column"));
        }
        if data.len() != rows * cols {
            return Err(Error::config(format!(
                "grid data has {} values, expected {rows} x {cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        assert!(cols > 0, "grid must have at least one column");
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::config("ragged rows"));
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    /// Number of time steps.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of lattice sites.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, t: usize) -> &[T] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [T] {
        &mut self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn get(&self, r: usize, t: usize) -> T {
        self.data[t * self.cols + r]
    }

    pub fn set(&mut self, r: usize, t: usize, value: T) {
        self.data[t * self.cols + r] = value;
    }

    /// Value at site `r` (any integer, wrapped periodically) and time `t`.
    pub fn get_wrapped(&self, r: isize, t: usize) -> T {
        let r = r.rem_euclid(self.cols as isize) as usize;
        self.data[t * self.cols + r]
    }

    /// Sub-grid of rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.rows);
        Self {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Stacks `other` below `self`.
    pub fn concat_rows(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::config(format!(
                "cannot stack grids of width {} and {}",
                self.cols, other.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self { rows: self.rows + other.rows, cols: self.cols, data })
    }

    /// Cyclic spatial rotation: output site `r` holds input site `r - k`.
    pub fn roll_sites(&self, k: isize) -> Self {
        let mut out = self.clone();
        for t in 0..self.rows {
            for r in 0..self.cols {
                out.set(r, t, self.get_wrapped(r as isize - k, t));
            }
        }
        out
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        Grid { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

impl SpacetimeField {
    /// Checks that every value lies in `[0, 1)` and is finite.
    pub fn validate_unit_range(&self) -> Result<()> {
        match self.data.iter().position(|v| !(0.0..1.0).contains(v)) {
            None => Ok(()),
            Some(i) => Err(Error::config(format!(
                "field value {} at (r={}, t={}) outside [0, 1)",
                self.data[i],
                i % self.cols,
                i / self.cols
            ))),
        }
    }
}

impl StateField {
    pub fn is_margin_row(&self, t: usize) -> bool {
        self.row(t).iter().all(|&s| s == MARGIN)
    }

    /// Number of points carrying a state label.
    pub fn assigned_count(&self) -> usize {
        self.data.iter().filter(|&&s| s != MARGIN).count()
    }

    /// One past the largest assigned label, 0 if all points are margin.
    pub fn label_bound(&self) -> usize {
        self.data.iter().filter(|&&s| s >= 0).map(|&s| s as usize + 1).max().unwrap_or(0)
    }

    /// Occurrence count of each label over assigned points.
    pub fn occupancy(&self, n_states: usize) -> Vec<u64> {
        let mut counts = vec![0u64; n_states];
        for &s in self.data.iter().filter(|&&s| s >= 0) {
            if (s as usize) < n_states {
                counts[s as usize] += 1;
            }
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_lengths() {
        assert!(Grid::from_vec(2, 3, vec![0.0; 5]).is_err());
        assert!(Grid::<f64>::from_vec(1, 0, vec![]).is_err());
        assert!(Grid::from_rows(&[vec![1, 2], vec![3]]).is_err());
    }

    #[test]
    fn wrapped_access() {
        let g = Grid::from_rows(&[vec![1, 2, 3]]).unwrap();
        assert_eq!(g.get_wrapped(-1, 0), 3);
        assert_eq!(g.get_wrapped(3, 0), 1);
        assert_eq!(g.roll_sites(1).row(0), &[3, 1, 2]);
    }

    #[test]
    fn unit_range_check() {
        let ok = Grid::from_rows(&[vec![0.0, 0.5]]).unwrap();
        assert!(ok.validate_unit_range().is_ok());
        let bad = Grid::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert!(bad.validate_unit_range().is_err());
    }

    #[test]
    fn state_counts() {
        let s = Grid::from_rows(&[vec![MARGIN, MARGIN], vec![0, 2]]).unwrap();
        assert!(s.is_margin_row(0));
        assert_eq!(s.assigned_count(), 2);
        assert_eq!(s.label_bound(), 3);
        assert_eq!(s.occupancy(3), vec![1, 0, 1]);
    }
}
