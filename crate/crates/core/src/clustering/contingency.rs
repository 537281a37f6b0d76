use crate::{Error, Result};

/// Joint counts of past cluster `i` with future cluster `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    k_past: usize,
    k_future: usize,
    counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn from_counts(k_past: usize, k_future: usize, counts: Vec<u64>) -> Result<Self> {
        if k_past == 0 || k_future == 0 || counts.len() != k_past * k_future {
            return Err(Error::config(format!(
                "contingency table needs {k_past} x {k_future} counts, got {}",
                counts.len()
            )));
        }
        Ok(Self { k_past, k_future, counts })
    }

    pub fn k_past(&self) -> usize {
        self.k_past
    }

    pub fn k_future(&self) -> usize {
        self.k_future
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.k_future + j]
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.counts[i * self.k_future..(i + 1) * self.k_future]
    }

    pub fn row_total(&self, i: usize) -> u64 {
        self.row(i).iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Counts co-occurrences of aligned past and future cluster ids.
pub fn build_contingency(
    past_ids: &[u32],
    future_ids: &[u32],
    k_past: usize,
    k_future: usize,
) -> Result<ContingencyTable> {
    if past_ids.len() != future_ids.len() {
        return Err(Error::config(format!(
            "{} past ids but {} future ids",
            past_ids.len(),
            future_ids.len()
        )));
    }
    let mut table = ContingencyTable::from_counts(k_past, k_future, vec![0; k_past * k_future])?;
    for (&i, &j) in past_ids.iter().zip(future_ids) {
        let (i, j) = (i as usize, j as usize);
        if i >= k_past || j >= k_future {
            return Err(Error::config(format!(
                "cluster pair ({i}, {j}) outside {k_past} x {k_future}"
            )));
        }
        table.counts[i * k_future + j] += 1;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn single_point() {
        let t = build_contingency(&[3], &[7], 5, 8).unwrap();
        assert_eq!(t.get(3, 7), 1);
        assert_eq!(t.total(), 1);
    }

    #[test]
    fn shared_pair() {
        let t = build_contingency(&[1; 40], &[2; 40], 2, 3).unwrap();
        assert_eq!(t.get(1, 2), 40);
        assert_eq!(t.row_total(0), 0);
    }

    #[test]
    fn out_of_range_and_misaligned() {
        assert!(build_contingency(&[2], &[0], 2, 3).is_err());
        assert!(build_contingency(&[0], &[3], 2, 3).is_err());
        assert!(build_contingency(&[0, 1], &[0], 2, 3).is_err());
    }

    #[test]
    fn matches_naive_recount() {
        let mut rng = stream(5, Purpose::Test);
        let past: Vec<u32> = (0..2000).map(|_| rng.random_range(0..6)).collect();
        let future: Vec<u32> = (0..2000).map(|_| rng.random_range(0..9)).collect();
        let t = build_contingency(&past, &future, 6, 9).unwrap();
        for i in 0..6 {
            for j in 0..9 {
                let naive = past
                    .iter()
                    .zip(&future)
                    .filter(|&(&a, &b)| a as usize == i && b as usize == j)
                    .count() as u64;
                assert_eq!(t.get(i, j), naive);
            }
            let members = past.iter().filter(|&&a| a as usize == i).count() as u64;
            assert_eq!(t.row_total(i), members);
        }
    }
}
