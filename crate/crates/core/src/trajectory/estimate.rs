//! Sample statistics over trajectory ensembles.

use serde::Serialize;

use crate::counting::{CountingObservable, Method, MomentResult};
use crate::error::{Error, Result};
use crate::trajectory::sampler::{record_observable, TrajectoryRecord};

/// `E[|N|^r]` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbsMoment {
    pub order: f64,
    pub value: f64,
    pub stderr: f64,
}

/// Mean of per-record entropies, i.e. the estimate of `D(P‖Q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_used: usize,
    /// Records dropped because a label had zero probability.
    pub n_discarded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleEstimate {
    pub n_samples: usize,
    pub mean: f64,
    pub variance: f64,
    pub mean_stderr: f64,
    pub variance_stderr: f64,
    /// Estimated `Cov(sample mean, sample variance)`, `μ₃ / n`.
    pub mean_variance_covariance: f64,
    pub abs_moments: Vec<AbsMoment>,
    pub kl: Option<KlEstimate>,
}

impl EnsembleEstimate {
    pub fn moments(&self) -> MomentResult {
        MomentResult {
            mean: self.mean,
            second_moment: self.variance + self.mean * self.mean,
            variance: self.variance,
            method: Method::MonteCarlo,
            mean_stderr: Some(self.mean_stderr),
            variance_stderr: Some(self.variance_stderr),
        }
    }

    pub fn abs_moment(&self, order: f64) -> Option<&AbsMoment> {
        self.abs_moments.iter().find(|m| m.order == order)
    }
}

fn mean_and_stderr(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = values.clone().sum::<f64>() / nf;
    let var = if n > 1 { values.map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0) } else { 0.0 };
    (mean, (var / nf).sqrt())
}

/// Mean, unbiased variance and absolute moments of the given orders.
pub fn estimate(values: &[f64], orders: &[f64]) -> Result<EnsembleEstimate> {
    let n = values.len();
    if n < 2 {
        return Err(Error::EmptyEnsemble);
    }
    if let Some(&r) = orders.iter().find(|&&r| !(r > 0.0)) {
        return Err(Error::InvalidArgument(format!("moment order must be positive, got {r}")));
    }
    let nf = n as f64;
    let (mean, mean_stderr) = mean_and_stderr(values.iter().copied(), n);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in values {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let variance = m2 / (nf - 1.0);
    let (mu2, mu3, mu4) = (m2 / nf, m3 / nf, m4 / nf);
    // large-sample variance of the unbiased sample variance
    let var_of_var = ((mu4 - mu2 * mu2 * (nf - 3.0) / (nf - 1.0)) / nf).max(0.0);
    let abs_moments = orders
        .iter()
        .map(|&order| {
            let (value, stderr) = mean_and_stderr(values.iter().map(|x| x.abs().powf(order)), n);
            AbsMoment { order, value, stderr }
        })
        .collect();
    Ok(EnsembleEstimate {
        n_samples: n,
        mean,
        variance,
        mean_stderr,
        variance_stderr: var_of_var.sqrt(),
        mean_variance_covariance: mu3 / nf,
        abs_moments,
        kl: None,
    })
}

pub fn estimate_records(records: &[TrajectoryRecord], obs: &CountingObservable, orders: &[f64]) -> Result<EnsembleEstimate> {
    let values: Vec<f64> = records.iter().map(|r| record_observable(r, obs)).collect();
    estimate(&values, orders)
}

/// Averages per-record entropies; `None` entries are discarded and counted.
pub fn kl_estimate(entropies: &[Option<f64>]) -> Result<KlEstimate> {
    let used: Vec<f64> = entropies.iter().flatten().copied().collect();
    if used.len() < 2 {
        return Err(Error::EmptyEnsemble);
    }
    let (mean, stderr) = mean_and_stderr(used.iter().copied(), used.len());
    Ok(KlEstimate { mean, stderr, n_used: used.len(), n_discarded: entropies.len() - used.len() })
}

/// Sample covariance of two equally long series.
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0)
}
