//! Uncertainty relations for counting observables and currents.
//!
//! Every evaluator returns a [`BoundReport`] stating `lhs ≥ rhs`. Inputs
//! computed exactly are judged with an absolute tolerance of `1e-9`;
//! Monte Carlo inputs with three propagated standard errors.

use serde::Serialize;

use crate::counting::{activity_rate, mean_rate, CountingObservable, Method, MomentHierarchy, MomentResult, ThermoCurve};
use crate::engine::{propagate, survival_probability};
use crate::error::{Error, Result};
use crate::model::LindbladModel;
use crate::operator::DensityMatrix;
use crate::trajectory::estimate::covariance;

pub const EXACT_TOL: f64 = 1e-9;
pub const MC_SIGMAS: f64 = 3.0;

const MAX_NEWTON: usize = 100;

/// Inverse `h` of `x tanh x` on `[0, ∞)`.
pub fn inverse_x_tanh_x(y: f64) -> Result<f64> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::InvalidArgument(format!("x tanh x is only inverted on [0, inf), got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let f = |x: f64| x * x.tanh() - y;
    // y <= h <= y + 1; widen if rounding puts the root outside
    let (mut lo, mut hi) = (y.sqrt().min(y), y + 1.0);
    while f(lo) > 0.0 {
        lo *= 0.5;
    }
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut x = if y < 1.0 { y.sqrt() } else { y };
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..MAX_NEWTON {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let t = x.tanh();
        let dfx = t + x * (1.0 - t * t);
        let next = x - fx / dfx;
        let next = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 2.0 * f64::EPSILON * x || hi - lo <= 2.0 * f64::EPSILON * hi {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::RootNotConverged)
}

/// `csch²(h(Σ/2))`, the entropy-production bound on `R`.
pub fn ep_tur_rhs(sigma: f64) -> Result<f64> {
    let x = inverse_x_tanh_x(0.5 * sigma)?;
    Ok(1.0 / x.sinh().powi(2))
}

/// `2 / (e^Σ − 1)`, the weaker form.
pub fn ep_tur_rhs_weak(sigma: f64) -> f64 {
    2.0 / sigma.exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Satisfied,
    Violated,
    /// The bound's precondition fails, so it makes no claim.
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Weaker right-hand side of a chained bound, `rhs ≥ rhs_weak`.
    pub rhs_weak: Option<f64>,
    pub slack: f64,
    pub provenance: Method,
    pub lhs_stderr: Option<f64>,
    pub tolerance: f64,
    pub precondition_ok: bool,
    pub status: BoundStatus,
    pub inputs: Vec<(String, f64)>,
}

impl BoundReport {
    pub fn new(name: &str, lhs: f64, rhs: f64, lhs_stderr: Option<f64>, precondition_ok: bool) -> Self {
        let provenance = if lhs_stderr.is_some() { Method::MonteCarlo } else { Method::Exact };
        let tolerance = lhs_stderr.map_or(EXACT_TOL, |s| MC_SIGMAS * s);
        let slack = lhs - rhs;
        let status = if !precondition_ok {
            BoundStatus::NotApplicable
        } else if slack >= -tolerance {
            BoundStatus::Satisfied
        } else {
            BoundStatus::Violated
        };
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            rhs_weak: None,
            slack,
            provenance,
            lhs_stderr,
            tolerance,
            precondition_ok,
            status,
            inputs: Vec::new(),
        }
    }

    pub fn with_weak(mut self, rhs_weak: f64) -> Self {
        self.rhs_weak = Some(rhs_weak);
        self
    }

    pub fn with_inputs(mut self, inputs: &[(&str, f64)]) -> Self {
        self.inputs = inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        self
    }

    pub fn satisfied(&self) -> bool {
        self.status == BoundStatus::Satisfied
    }

    pub fn violated(&self) -> bool {
        self.status == BoundStatus::Violated
    }

    pub const CSV_HEADER: [&'static str; 10] =
        ["name", "lhs", "rhs", "rhs_weak", "slack", "provenance", "lhs_stderr", "tolerance", "precondition_ok", "status"];

    pub fn csv_row(&self) -> Vec<String> {
        use crate::trajectory::dump::fmt_float;
        let status = match self.status {
            BoundStatus::Satisfied => "satisfied",
            BoundStatus::Violated => "violated",
            BoundStatus::NotApplicable => "not_applicable",
        };
        vec![
            self.name.clone(),
            fmt_float(self.lhs),
            fmt_float(self.rhs),
            self.rhs_weak.map(fmt_float).unwrap_or_default(),
            fmt_float(self.slack),
            match self.provenance {
                Method::Exact => "exact".into(),
                Method::MonteCarlo => "monte_carlo".into(),
            },
            self.lhs_stderr.map(fmt_float).unwrap_or_default(),
            fmt_float(self.tolerance),
            self.precondition_ok.to_string(),
            status.into(),
        ]
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("reports serialize")
    }
}

/// First-order error propagation with central-difference gradients.
/// `cov` is the covariance matrix of the inputs `x`.
pub fn delta_method_stderr(f: impl Fn(&[f64]) -> f64, x: &[f64], cov: &[Vec<f64>]) -> f64 {
    let n = x.len();
    let grad: Vec<f64> = (0..n)
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1e-8);
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[i] += h;
            down[i] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect();
    let mut var = 0.0;
    for i in 0..n {
        for j in 0..n {
            var += grad[i] * cov[i][j] * grad[j];
        }
    }
    var.max(0.0).sqrt()
}

fn diagonal_cov(stderrs: &[f64]) -> Vec<Vec<f64>> {
    let n = stderrs.len();
    (0..n).map(|i| (0..n).map(|j| if i == j { stderrs[i].powi(2) } else { 0.0 }).collect()).collect()
}

/// Stderr of a function of moment results; `None` when all inputs are exact.
/// Inputs are treated as independent.
fn propagate_moments(f: impl Fn(&[f64]) -> f64, moments: &[&MomentResult]) -> Option<f64> {
    if moments.iter().all(|m| m.method == Method::Exact) {
        return None;
    }
    let x: Vec<f64> = moments.iter().flat_map(|m| [m.mean, m.variance]).collect();
    let se: Vec<f64> = moments
        .iter()
        .flat_map(|m| [m.mean_stderr.unwrap_or(0.0), m.variance_stderr.unwrap_or(0.0)])
        .collect();
    Some(delta_method_stderr(f, &x, &diagonal_cov(&se)))
}

/// `½ ∫_{t1}^{t2} √𝒜(t)/t dt`, integrated in `u = √t` where the integrand
/// `2√𝒜(u²)/u` stays finite at zero (limit `2√𝔞(0)`). `𝒜` is linearly
/// interpolated at endpoints that fall between grid points.
pub fn half_activity_integral(curve: &ThermoCurve, t1: f64, t2: f64) -> Result<f64> {
    let times = &curve.times;
    let end = *times.last().expect("curve is nonempty");
    if !(0.0 <= t1 && t1 < t2 && t2 <= end * (1.0 + 1e-12)) {
        return Err(Error::InvalidWindow { start: t1, end: t2, horizon: end });
    }
    let t2 = t2.min(end);
    let activity_at = |t: f64| -> f64 {
        let k = times.partition_point(|&s| s < t);
        if k < times.len() && times[k] == t {
            return curve.activity[k];
        }
        let (a, b) = (k - 1, k.min(times.len() - 1));
        let w = (t - times[a]) / (times[b] - times[a]);
        curve.activity[a] + w * (curve.activity[b] - curve.activity[a])
    };
    let integrand = |t: f64, activity: f64| -> f64 {
        if t == 0.0 {
            2.0 * curve.activity_rate[0].max(0.0).sqrt()
        } else {
            2.0 * activity.max(0.0).sqrt() / t.sqrt()
        }
    };
    let mut pts: Vec<(f64, f64)> = vec![(t1.sqrt(), integrand(t1, activity_at(t1)))];
    for (k, &t) in times.iter().enumerate() {
        if t > t1 && t < t2 {
            pts.push((t.sqrt(), integrand(t, curve.activity[k])));
        }
    }
    pts.push((t2.sqrt(), integrand(t2, activity_at(t2))));
    let total: f64 = pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
    Ok(0.5 * total)
}

/// Finite-interval activity TUR between `τ₁ < τ₂`:
/// `((√Var₂ + √Var₁)/(E₂ − E₁))² ≥ tan(½∫√𝒜/t)^{−2}`, applicable when the
/// half integral is at most `π/2`.
pub fn tur_activity_integral(
    early: &MomentResult,
    late: &MomentResult,
    tau1: f64,
    tau2: f64,
    curve: &ThermoCurve,
) -> Result<BoundReport> {
    if !(late.mean > early.mean) {
        return Err(Error::InvalidArgument("the mean must increase between the two times".into()));
    }
    let half = half_activity_integral(curve, tau1, tau2)?;
    let lhs_of = |x: &[f64]| ((x[3].max(0.0).sqrt() + x[1].max(0.0).sqrt()) / (x[2] - x[0])).powi(2);
    let lhs = lhs_of(&[early.mean, early.variance, late.mean, late.variance]);
    let stderr = propagate_moments(lhs_of, &[early, late]);
    let rhs = half.tan().powi(-2);
    Ok(BoundReport::new("tur_activity_integral", lhs, rhs, stderr, half <= std::f64::consts::FRAC_PI_2)
        .with_inputs(&[("tau1", tau1), ("tau2", tau2), ("half_integral", half)]))
}

/// `Var/(τ²(∂_τE)²) ≥ 1/𝒜(τ)` from precomputed statistics.
pub fn kur_from_stats(moments: &MomentResult, mean_rate: f64, tau: f64, activity: f64) -> Result<BoundReport> {
    if mean_rate == 0.0 {
        return Err(Error::InvalidArgument("mean rate vanishes".into()));
    }
    let lhs = moments.variance / (tau * tau * mean_rate * mean_rate);
    let stderr = moments.variance_stderr.map(|se| se / (tau * tau * mean_rate * mean_rate));
    Ok(BoundReport::new("kur", lhs, 1.0 / activity, stderr, activity > 0.0).with_inputs(&[
        ("variance", moments.variance),
        ("mean_rate", mean_rate),
        ("tau", tau),
        ("activity", activity),
    ]))
}

/// Differential KUR with `∂_τE` taken from the jump rates at `ρ(τ)`.
pub fn kur_differential(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    obs: &CountingObservable,
    tau: f64,
    activity: f64,
) -> Result<BoundReport> {
    let hierarchy = MomentHierarchy::new(model, true)?;
    let moments = hierarchy.moments(rho0, obs, tau)?;
    let rho_tau = propagate(hierarchy.generator(), rho0, tau)?;
    kur_from_stats(&moments, mean_rate(model, &rho_tau, obs.weights())?, tau, activity)
}

/// Absolute moments `E[|N|^r]`, `E[|N|^s]` and the covariance of their estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentRatioInput {
    pub r: f64,
    pub s: f64,
    pub m_r: f64,
    pub m_s: f64,
    /// Covariance matrix of `(m_r, m_s)`; zero for exact inputs.
    pub cov: [[f64; 2]; 2],
    pub exact: bool,
}

impl MomentRatioInput {
    pub fn exact(r: f64, s: f64, m_r: f64, m_s: f64) -> Self {
        Self { r, s, m_r, m_s, cov: [[0.0; 2]; 2], exact: true }
    }

    pub fn from_samples(values: &[f64], r: f64, s: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::EmptyEnsemble);
        }
        let n = values.len() as f64;
        let xr: Vec<f64> = values.iter().map(|x| x.abs().powf(r)).collect();
        let xs: Vec<f64> = values.iter().map(|x| x.abs().powf(s)).collect();
        let cross = covariance(&xr, &xs) / n;
        Ok(Self {
            r,
            s,
            m_r: xr.iter().sum::<f64>() / n,
            m_s: xs.iter().sum::<f64>() / n,
            cov: [[covariance(&xr, &xr) / n, cross], [cross, covariance(&xs, &xs) / n]],
            exact: false,
        })
    }
}

/// `E[|N|^s]^{r/(s−r)} / E[|N|^r]^{s/(s−r)}` against the sine form
/// `sin(½∫₀^τ √𝒜/t)^{−2}` and the exponential form `1/(1 − e^{−𝔞(0)τ})`.
pub fn moment_ratio_bounds(
    input: &MomentRatioInput,
    half_integral: f64,
    initial_rate: f64,
    tau: f64,
) -> Result<(BoundReport, BoundReport)> {
    let (r, s) = (input.r, input.s);
    if !(0.0 < r && r < s) {
        return Err(Error::InvalidArgument(format!("need 0 < r < s, got r = {r}, s = {s}")));
    }
    if !(input.m_r > 0.0) {
        return Err(Error::InvalidArgument("E[|N|^r] vanishes".into()));
    }
    let ratio = |x: &[f64]| x[1].powf(r / (s - r)) / x[0].powf(s / (s - r));
    let x = [input.m_r, input.m_s];
    let lhs = ratio(&x);
    let stderr = (!input.exact).then(|| delta_method_stderr(ratio, &x, &input.cov.map(Vec::from)));
    let inputs = [("r", r), ("s", s), ("tau", tau), ("half_integral", half_integral), ("initial_rate", initial_rate)];
    let sin_form = BoundReport::new(
        "moment_ratio_sin",
        lhs,
        half_integral.sin().powi(-2),
        stderr,
        half_integral <= std::f64::consts::FRAC_PI_2,
    )
    .with_inputs(&inputs);
    let exp_form = BoundReport::new("moment_ratio_exp", lhs, 1.0 / -(-initial_rate * tau).exp_m1(), stderr, true)
        .with_inputs(&inputs);
    Ok((sin_form, exp_form))
}

/// `γ(τ) = 4 max(Var[J(τ/2)], Var[J([τ/2, τ])]) / Var[J(τ)]`.
pub fn gamma_factor(var_first: f64, var_second: f64, var_total: f64) -> Result<f64> {
    if !(var_total > 0.0) {
        return Err(Error::InvalidArgument("total variance must be positive".into()));
    }
    Ok(4.0 * var_first.max(var_second) / var_total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowedVariances {
    pub first_half: f64,
    pub second_half: f64,
    pub total: f64,
    pub gamma: f64,
}

/// Windowed variances from the moment hierarchy and the resulting `γ(τ)`.
pub fn windowed_gamma(
    hierarchy: &MomentHierarchy,
    rho0: &DensityMatrix,
    obs: &CountingObservable,
    tau: f64,
) -> Result<WindowedVariances> {
    let base = CountingObservable::new(obs.weights().to_vec())?;
    let total = hierarchy.moments(rho0, &base, tau)?.variance;
    let first_half = hierarchy.moments(rho0, &base.clone().with_window(0.0, 0.5 * tau)?, tau)?.variance;
    let second_half = hierarchy.moments(rho0, &base.with_window(0.5 * tau, tau)?, tau)?.variance;
    Ok(WindowedVariances { first_half, second_half, total, gamma: gamma_factor(first_half, second_half, total)? })
}

/// `R = γ Var/E²`.
fn precision_ratio(mean: f64, variance: f64, gamma: f64) -> Result<f64> {
    if mean == 0.0 {
        return Err(Error::InvalidArgument("mean current vanishes".into()));
    }
    Ok(gamma * variance / (mean * mean))
}

/// `R ≥ csch²(h(Σ/2)) ≥ 2/(e^Σ − 1)`; pass `gamma = None` for the
/// steady-state form without the windowed factor.
pub fn ep_tur(moments: &MomentResult, gamma: Option<f64>, sigma: f64) -> Result<BoundReport> {
    let g = gamma.unwrap_or(1.0);
    let ratio = precision_ratio(moments.mean, moments.variance, g)?;
    let stderr = propagate_moments(|x| g * x[1] / (x[0] * x[0]), &[moments]);
    let name = if gamma.is_some() { "ep_tur" } else { "ep_tur_steady" };
    Ok(BoundReport::new(name, ratio, ep_tur_rhs(sigma)?, stderr, true)
        .with_weak(ep_tur_rhs_weak(sigma))
        .with_inputs(&[("mean", moments.mean), ("variance", moments.variance), ("gamma", g), ("sigma", sigma)]))
}

/// `Σ ≥ 2 arcsinh(1/√R)/√(R + 1)`, the inverse of [`ep_tur`].
pub fn ep_lower_bound(mean: f64, variance: f64, gamma: f64) -> Result<f64> {
    let ratio = precision_ratio(mean, variance, gamma)?;
    Ok(2.0 * (1.0 / ratio.sqrt()).asinh() / (ratio + 1.0).sqrt())
}

/// Entropy production against [`ep_lower_bound`].
pub fn ep_entropy_report(name: &str, sigma: f64, mean: f64, variance: f64, gamma: f64) -> Result<BoundReport> {
    let bound = ep_lower_bound(mean, variance, gamma)?;
    Ok(BoundReport::new(name, sigma, bound, None, true).with_inputs(&[
        ("mean", mean),
        ("variance", variance),
        ("gamma", gamma),
    ]))
}

/// `p_∅(τ) ≥ e^{−𝔞(0)τ}`.
pub fn survival_bound_check(model: &LindbladModel, rho0: &DensityMatrix, tau: f64) -> Result<BoundReport> {
    if !(tau > 0.0) {
        return Err(Error::NegativeTime(tau));
    }
    let survival = survival_probability(model, rho0, tau)?;
    let rate = activity_rate(model, rho0);
    Ok(BoundReport::new("survival", survival, (-rate * tau).exp(), None, true)
        .with_inputs(&[("tau", tau), ("initial_rate", rate)]))
}
