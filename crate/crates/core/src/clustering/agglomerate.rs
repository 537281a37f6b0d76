use crate::clustering::ContingencyTable;
use crate::stats::Chi2Test;
use crate::{Error, Result};

/// ψ-equivalence: past clusters grouped into local causal states.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiMap {
    /// State id of every past cluster.
    pub mapping: Vec<u32>,
    /// Pooled future-cluster counts per state.
    pub state_counts: Vec<Vec<u64>>,
    /// `Pr(C+ | state)`: row-normalized pooled counts.
    pub state_pmfs: Vec<Vec<f64>>,
    /// Accepted merges in the order they happened.
    pub merges: Vec<Merge>,
}

/// One accepted merge of two groups of past clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub left_counts: Vec<u64>,
    pub right_counts: Vec<u64>,
    pub statistic: f64,
}

#[derive(Debug, Clone)]
struct Group {
    members: Vec<usize>,
    counts: Vec<u64>,
    total: u64,
}

impl Group {
    fn pmf(&self) -> Vec<f64> {
        let total = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

impl PsiMap {
    /// Assembles a map from per-state pooled counts.
    pub fn from_parts(mapping: Vec<u32>, state_counts: Vec<Vec<u64>>) -> Result<Self> {
        let n_states = state_counts.len();
        if n_states == 0 || mapping.iter().any(|&s| s as usize >= n_states) {
            return Err(Error::config("psi mapping refers to a missing state"));
        }
        let width = state_counts[0].len();
        let mut state_pmfs = Vec::with_capacity(n_states);
        for counts in &state_counts {
            let total: u64 = counts.iter().sum();
            if counts.len() != width || total == 0 {
                return Err(Error::config("every state needs a nonempty count row of equal width"));
            }
            state_pmfs.push(counts.iter().map(|&c| c as f64 / total as f64).collect());
        }
        Ok(Self { mapping, state_counts, state_pmfs, merges: Vec::new() })
    }

    pub fn n_states(&self) -> usize {
        self.state_pmfs.len()
    }

    pub fn state_of(&self, past_cluster: usize) -> u32 {
        self.mapping[past_cluster]
    }

    /// Training points per state.
    pub fn state_totals(&self) -> Vec<u64> {
        self.state_counts.iter().map(|c| c.iter().sum()).collect()
    }
}

/// Greedy agglomeration of past clusters.
///
/// Each round finds the pair of groups whose normalized future
/// distributions are closest in L1 (lowest group indices on ties) and
/// merges it unless the chi-square test rejects homogeneity at `alpha`.
/// The first rejection ends the agglomeration. States are numbered by
/// descending pooled count, ties by smallest member cluster id. Past
/// clusters with no counts join state 0.
pub fn agglomerate(table: &ContingencyTable, alpha: f64) -> Result<PsiMap> {
    let mut test = Chi2Test::new(alpha)?;
    let mut groups: Vec<Group> = (0..table.k_past())
        .filter(|&i| table.row_total(i) > 0)
        .map(|i| Group { members: vec![i], counts: table.row(i).to_vec(), total: table.row_total(i) })
        .collect();
    if groups.is_empty() {
        return Err(Error::config("contingency table has no nonempty row"));
    }

    let mut merges = Vec::new();
    while groups.len() > 1 {
        let pmfs: Vec<Vec<f64>> = groups.iter().map(Group::pmf).collect();
        let mut best = (0, 1, f64::INFINITY);
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                let d = l1(&pmfs[i], &pmfs[j]);
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        let (i, j, _) = best;
        let (outcome, reject) = test.run(&groups[i].counts, &groups[j].counts)?;
        if reject {
            break;
        }
        let right = groups.remove(j);
        let left = &mut groups[i];
        merges.push(Merge {
            left: left.members.clone(),
            right: right.members.clone(),
            left_counts: left.counts.clone(),
            right_counts: right.counts.clone(),
            statistic: outcome.statistic,
        });
        left.members.extend(right.members);
        left.members.sort_unstable();
        for (c, r) in left.counts.iter_mut().zip(right.counts) {
            *c += r;
        }
        left.total += right.total;
    }

    groups.sort_by(|a, b| b.total.cmp(&a.total).then(a.members[0].cmp(&b.members[0])));
    let mut mapping = vec![0u32; table.k_past()];
    for (state, group) in groups.iter().enumerate() {
        for &m in &group.members {
            mapping[m] = state as u32;
        }
    }
    let state_counts = groups.into_iter().map(|g| g.counts).collect();
    let mut psi = PsiMap::from_parts(mapping, state_counts)?;
    psi.merges = merges;
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::stats::chi2_reject;

    fn table(rows: &[Vec<u64>]) -> ContingencyTable {
        ContingencyTable::from_counts(rows.len(), rows[0].len(), rows.concat()).unwrap()
    }

    #[test]
    fn identical_rows_form_one_state() {
        let t = table(&[vec![10, 20, 30], vec![20, 40, 60], vec![1, 2, 3]]);
        let psi = agglomerate(&t, 0.05).unwrap();
        assert_eq!(psi.n_states(), 1);
        assert_eq!(psi.mapping, vec![0, 0, 0]);
        let pmf = &psi.state_pmfs[0];
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((pmf[0] - 31.0 / 186.0).abs() < 1e-15);
    }

    #[test]
    fn disjoint_supports_form_two_states() {
        let t = table(&[
            vec![500, 480, 0, 0],
            vec![0, 0, 700, 650],
            vec![510, 470, 0, 0],
            vec![0, 0, 690, 660],
        ]);
        // every cross-group pair is rejected by the test itself
        for a in [0, 2] {
            for b in [1, 3] {
                assert!(chi2_reject(t.row(a), t.row(b), 0.05).unwrap());
            }
        }
        let psi = agglomerate(&t, 0.05).unwrap();
        assert_eq!(psi.n_states(), 2);
        assert_eq!(psi.mapping, vec![1, 0, 1, 0]);
        assert_eq!(psi.state_totals(), vec![2700, 1960]);
    }

    #[test]
    fn empty_rows_join_state_zero() {
        let t = table(&[vec![0, 0], vec![100, 0], vec![0, 300]]);
        let psi = agglomerate(&t, 0.05).unwrap();
        assert_eq!(psi.mapping, vec![0, 1, 0]);
        assert!(agglomerate(&table(&[vec![0, 0]]), 0.05).is_err());
    }

    #[test]
    fn ties_in_state_order_go_to_smallest_member() {
        let t = table(&[vec![0, 100], vec![100, 0]]);
        let psi = agglomerate(&t, 0.05).unwrap();
        assert_eq!(psi.mapping, vec![0, 1]);
    }

    fn counts_strategy() -> impl Strategy<Value = Vec<Vec<u64>>> {
        (2usize..7, 2usize..6).prop_flat_map(|(k, f)| {
            prop::collection::vec(prop::collection::vec(0u64..60, f), k)
                .prop_filter("nonempty rows", |rows| rows.iter().all(|r| r.iter().sum::<u64>() > 0))
        })
    }

    proptest! {
        #[test]
        fn merges_are_sound(rows in counts_strategy()) {
            let psi = agglomerate(&table(&rows), 0.05).unwrap();
            for m in &psi.merges {
                prop_assert!(!chi2_reject(&m.left_counts, &m.right_counts, 0.05).unwrap());
            }
            for (s, pmf) in psi.state_pmfs.iter().enumerate() {
                prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let pooled: Vec<u64> = (0..rows[0].len())
                    .map(|j| rows.iter().enumerate().filter(|(i, _)| psi.mapping[*i] as usize == s).map(|(_, r)| r[j]).sum())
                    .collect();
                prop_assert_eq!(&pooled, &psi.state_counts[s]);
            }
        }

        #[test]
        fn column_permutation_keeps_grouping(rows in counts_strategy(), rot in 1usize..5) {
            let width = rows[0].len();
            let permuted: Vec<Vec<u64>> = rows
                .iter()
                .map(|r| (0..width).map(|j| r[(j + rot) % width]).collect())
                .collect();
            let a = agglomerate(&table(&rows), 0.05).unwrap();
            let b = agglomerate(&table(&permuted), 0.05).unwrap();
            prop_assert_eq!(&a.mapping, &b.mapping);
            for (pa, pb) in a.state_pmfs.iter().zip(&b.state_pmfs) {
                for j in 0..width {
                    prop_assert_eq!(pb[j], pa[(j + rot) % width]);
                }
            }
        }
    }
}
