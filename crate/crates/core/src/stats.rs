//! Chi-square distribution quantiles and the two-sample homogeneity test.

use statrs::function::gamma::gamma_lr;

use crate::{Error, Result};

/// Chi-square CDF with `dof` degrees of freedom.
pub fn chi2_cdf(x: f64, dof: usize) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma_lr(dof as f64 / 2.0, x / 2.0)
    }
}

/// Quantile of the chi-square distribution: the `x` with `cdf(x) = p`.
///
/// Bisection on the regularized lower incomplete gamma function, run until
/// the bracket is at machine resolution.
pub fn chi2_quantile(p: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return Err(Error::config("chi-square quantile needs dof >= 1"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::config(format!("quantile probability {p} outside (0, 1)")));
    }
    let mut lo = 0.0;
    let mut hi = dof as f64 + 10.0;
    while chi2_cdf(hi, dof) < p {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::numerical("chi-square quantile bracket diverged"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi2_cdf(mid, dof) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Outcome of a two-sample chi-square homogeneity test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chi2Outcome {
    pub statistic: f64,
    /// Included bins minus one; bins empty in both samples are skipped.
    pub dof: usize,
}

/// Two-sample chi-square homogeneity statistic against pooled proportions.
pub fn chi2_statistic(a: &[u64], b: &[u64]) -> Result<Chi2Outcome> {
    if a.len() != b.len() {
        return Err(Error::config(format!("histograms differ in length: {} vs {}", a.len(), b.len())));
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(Error::config("chi-square test on an all-zero histogram"));
    }
    let total = (na + nb) as f64;
    let (na, nb) = (na as f64, nb as f64);
    let mut statistic = 0.0;
    let mut bins = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let pooled = x + y;
        if pooled == 0 {
            continue;
        }
        bins += 1;
        let p = pooled as f64 / total;
        let ea = na * p;
        let eb = nb * p;
        statistic += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    Ok(Chi2Outcome { statistic, dof: bins - 1 })
}

/// True iff the samples differ at significance `alpha`. A single shared bin
/// (zero degrees of freedom) never rejects.
pub fn chi2_reject(a: &[u64], b: &[u64], alpha: f64) -> Result<bool> {
    let outcome = chi2_statistic(a, b)?;
    if outcome.dof == 0 {
        return Ok(false);
    }
    Ok(outcome.statistic > chi2_quantile(1.0 - alpha, outcome.dof)?)
}

/// Caches critical values per degree of freedom for repeated tests.
#[derive(Debug, Clone)]
pub struct Chi2Test {
    alpha: f64,
    critical: Vec<Option<f64>>,
}

impl Chi2Test {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::config(format!("significance alpha = {alpha} outside (0, 1)")));
        }
        Ok(Self { alpha, critical: Vec::new() })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn critical_value(&mut self, dof: usize) -> Result<f64> {
        if self.critical.len() <= dof {
            self.critical.resize(dof + 1, None);
        }
        match self.critical[dof] {
            Some(v) => Ok(v),
            None => {
                let v = chi2_quantile(1.0 - self.alpha, dof)?;
                self.critical[dof] = Some(v);
                Ok(v)
            }
        }
    }

    /// Returns the test outcome and whether it rejects.
    pub fn run(&mut self, a: &[u64], b: &[u64]) -> Result<(Chi2Outcome, bool)> {
        let outcome = chi2_statistic(a, b)?;
        if outcome.dof == 0 {
            return Ok((outcome, false));
        }
        let crit = self.critical_value(outcome.dof)?;
        Ok((outcome, outcome.statistic > crit))
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn quantiles_match_reference_table() {
        // scipy.stats.chi2.ppf reference values
        let table = [
            (0.95, 1, 3.841458820694124),
            (0.95, 2, 5.991464547107979),
            (0.95, 5, 11.070497693516351),
            (0.95, 20, 31.410432844230918),
            (0.95, 39, 54.572227758941736),
            (0.95, 64, 83.67526074272097),
            (0.99, 1, 6.6348966010212145),
            (0.99, 19, 36.19086912927004),
            (0.99, 64, 93.21685966023843),
        ];
        for (p, dof, expect) in table {
            let got = chi2_quantile(p, dof).unwrap();
            assert!((got - expect).abs() < 1e-8 * expect, "dof {dof}: {got} vs {expect}");
        }
    }

    #[test]
    fn quantile_domain() {
        assert!(chi2_quantile(0.95, 0).is_err());
        assert!(chi2_quantile(1.0, 3).is_err());
    }

    #[test]
    fn identical_rows_never_reject() {
        assert!(!chi2_reject(&[50, 50], &[50, 50], 0.05).unwrap());
        assert!(!chi2_reject(&[3, 0, 9, 1], &[3, 0, 9, 1], 0.05).unwrap());
        assert_eq!(chi2_statistic(&[7, 2], &[7, 2]).unwrap().statistic, 0.0);
    }

    #[test]
    fn disjoint_support_rejects() {
        let out = chi2_statistic(&[100, 0], &[0, 100]).unwrap();
        assert!((out.statistic - 200.0).abs() < 1e-12);
        assert_eq!(out.dof, 1);
        assert!(chi2_reject(&[100, 0], &[0, 100], 0.05).unwrap());
    }

    #[test]
    fn single_shared_bin_never_rejects() {
        assert!(!chi2_reject(&[0, 5, 0], &[0, 900, 0], 0.05).unwrap());
    }

    #[test]
    fn errors() {
        assert!(chi2_reject(&[0, 0], &[1, 2], 0.05).is_err());
        assert!(chi2_reject(&[1], &[1, 2], 0.05).is_err());
        assert!(Chi2Test::new(0.0).is_err());
    }

    proptest! {
        #[test]
        fn symmetric(a in prop::collection::vec(0u64..50, 6), b in prop::collection::vec(0u64..50, 6)) {
            prop_assume!(a.iter().sum::<u64>() > 0 && b.iter().sum::<u64>() > 0);
            prop_assert_eq!(chi2_reject(&a, &b, 0.05).unwrap(), chi2_reject(&b, &a, 0.05).unwrap());
            let mut test = Chi2Test::new(0.05).unwrap();
            prop_assert_eq!(test.run(&a, &b).unwrap().1, chi2_reject(&a, &b, 0.05).unwrap());
        }
    }
}
