//! Two-sample chi-square test on jump-count histograms.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

impl ChiSquareResult {
    pub fn rejects(&self, significance: f64) -> bool {
        self.p_value < significance
    }
}

/// Homogeneity test of two samples of counts. Adjacent bins are merged
/// until every expected count is at least five.
pub fn two_sample_chi_square(a: &[usize], b: &[usize]) -> Result<ChiSquareResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let top = a.iter().chain(b).copied().max().unwrap_or(0);
    let mut hist = vec![(0.0f64, 0.0f64); top + 1];
    for &k in a {
        hist[k].0 += 1.0;
    }
    for &k in b {
        hist[k].1 += 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let share_a = na / (na + nb);

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (x, y) in hist {
        acc.0 += x;
        acc.1 += y;
        let pooled = acc.0 + acc.1;
        if pooled * share_a.min(1.0 - share_a) >= MIN_EXPECTED {
            bins.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => bins.push(acc),
        }
    }
    if bins.len() < 2 {
        return Ok(ChiSquareResult { statistic: 0.0, degrees_of_freedom: 0, p_value: 1.0 });
    }
    let statistic: f64 = bins
        .iter()
        .map(|&(x, y)| {
            let pooled = x + y;
            let (ea, eb) = (pooled * share_a, pooled * (1.0 - share_a));
            (x - ea).powi(2) / ea + (y - eb).powi(2) / eb
        })
        .sum();
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(ChiSquareResult { statistic, degrees_of_freedom: dof, p_value: dist.sf(statistic) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_do_not_reject() {
        let a: Vec<usize> = (0..1000).map(|k| k % 7).collect();
        let r = two_sample_chi_square(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.degrees_of_freedom, 6);
    }

    #[test]
    fn shifted_samples_reject() {
        let a: Vec<usize> = (0..1000).map(|k| k % 5).collect();
        let b: Vec<usize> = (0..1000).map(|k| k % 5 + 2).collect();
        assert!(two_sample_chi_square(&a, &b).unwrap().rejects(1e-3));
    }

    #[test]
    fn sparse_tail_is_merged() {
        let mut a = vec![0usize; 100];
        a.push(40);
        let r = two_sample_chi_square(&a, &vec![0usize; 100]).unwrap();
        assert_eq!(r.degrees_of_freedom, 0);
    }
}
