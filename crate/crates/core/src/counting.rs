//! Exact jump-counting statistics from the moment hierarchy, dynamical
//! activity and entropy production along a time grid.

use serde::{Deserialize, Serialize};

use crate::engine::{apply_propagator, build_generator, Liouvillian};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::model::LindbladModel;
use crate::operator::{spectral_decompose, split_diagonal_offdiagonal, DensityMatrix};

pub const DEFAULT_GRID_POINTS: usize = 2048;

/// Slack allowed when checking that a window lies inside `[0, τ]`.
const WINDOW_SLACK: f64 = 1e-12;

/// Weighted jump count `N = Σ_m c_m N_m`, optionally restricted to a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingObservable {
    weights: Vec<f64>,
    window: Option<(f64, f64)>,
    antisymmetric: bool,
}

impl CountingObservable {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { weights, window: None, antisymmetric: false })
    }

    /// Unit weights on every channel: the total number of jumps.
    pub fn activity(n_channels: usize) -> Self {
        Self { weights: vec![1.0; n_channels], window: None, antisymmetric: false }
    }

    /// A current: weights must satisfy `c_{m'} = -c_m` for every partner pair.
    pub fn current(model: &LindbladModel, weights: Vec<f64>) -> Result<Self> {
        let partners = model.partners()?;
        if weights.len() != partners.len() {
            return Err(Error::WeightCount { expected: partners.len(), found: weights.len() });
        }
        for (m, &p) in partners.iter().enumerate() {
            if weights[p] != -weights[m] {
                return Err(Error::NotAntisymmetric { channel: m });
            }
        }
        let mut obs = Self::new(weights)?;
        obs.antisymmetric = true;
        Ok(obs)
    }

    pub fn with_window(mut self, start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || start < 0.0 || start > end {
            return Err(Error::InvalidWindow { start, end, horizon: f64::NAN });
        }
        self.window = Some((start, end));
        Ok(self)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, m: usize) -> f64 {
        self.weights[m]
    }

    pub fn window(&self) -> Option<(f64, f64)> {
        self.window
    }

    pub fn is_antisymmetric(&self) -> bool {
        self.antisymmetric
    }

    pub fn squared_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w * w).collect()
    }

    /// Resolved window for horizon `tau`, clamped onto `[0, tau]`.
    pub fn window_on(&self, tau: f64) -> Result<(f64, f64)> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::NegativeTime(tau));
        }
        let (a, b) = self.window.unwrap_or((0.0, tau));
        if a < 0.0 || a > b || b > tau * (1.0 + WINDOW_SLACK) + WINDOW_SLACK {
            return Err(Error::InvalidWindow { start: a, end: b, horizon: tau });
        }
        Ok((a, b.min(tau)))
    }

    pub fn check_channels(&self, n_channels: usize) -> Result<()> {
        if self.weights.len() != n_channels {
            return Err(Error::WeightCount { expected: n_channels, found: self.weights.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentResult {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    pub method: Method,
    pub mean_stderr: Option<f64>,
    pub variance_stderr: Option<f64>,
}

impl MomentResult {
    pub fn exact(mean: f64, second_moment: f64) -> Self {
        Self {
            mean,
            second_moment,
            variance: second_moment - mean * mean,
            method: Method::Exact,
            mean_stderr: None,
            variance_stderr: None,
        }
    }
}

/// `Σ_m w_m conj(L_m) ⊗ L_m`, the weighted jump superoperator.
fn jump_superoperator(supers: &[CMatrix], weights: &[f64]) -> CMatrix {
    let n = supers.first().map_or(0, |s| s.nrows());
    let mut out = CMatrix::zeros(n, n);
    for (s, &w) in supers.iter().zip(weights) {
        if w != 0.0 {
            out += s * c(w);
        }
    }
    out
}

/// First and second moments of counting observables, obtained by
/// exponentiating the block lower-triangular generator of `(ρ, ρ₁, ρ₂)`.
#[derive(Debug, Clone)]
pub struct MomentHierarchy {
    generator: Liouvillian,
    jumps: Vec<CMatrix>,
}

impl MomentHierarchy {
    pub fn new(model: &LindbladModel, coherent: bool) -> Result<Self> {
        let generator = build_generator(model, coherent)?;
        let jumps = model
            .channels()
            .iter()
            .map(|ch| {
                let l = ch.op.matrix();
                linalg::kron(&l.map(|z| z.conj()), l)
            })
            .collect();
        Ok(Self { generator, jumps })
    }

    pub fn generator(&self) -> &Liouvillian {
        &self.generator
    }

    pub fn moments(&self, rho0: &DensityMatrix, obs: &CountingObservable, tau: f64) -> Result<MomentResult> {
        obs.check_channels(self.jumps.len())?;
        let d = self.generator.dim();
        if rho0.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: rho0.dim() });
        }
        let (a, b) = obs.window_on(tau)?;
        let rho_a = if a > 0.0 { apply_propagator(&self.generator.propagator(a)?, rho0)? } else { rho0.clone() };
        if b <= a {
            return Ok(MomentResult::exact(0.0, 0.0));
        }

        let n = d * d;
        let l = self.generator.matrix();
        let j1 = jump_superoperator(&self.jumps, obs.weights());
        let j2 = jump_superoperator(&self.jumps, &obs.squared_weights());
        let mut aug = CMatrix::zeros(3 * n, 3 * n);
        for k in 0..3 {
            aug.view_mut((k * n, k * n), (n, n)).copy_from(l);
        }
        aug.view_mut((n, 0), (n, n)).copy_from(&j1);
        aug.view_mut((2 * n, n), (n, n)).copy_from(&(j1 * c(2.0)));
        aug.view_mut((2 * n, 0), (n, n)).copy_from(&j2);

        let mut x = CVector::zeros(3 * n);
        x.rows_mut(0, n).copy_from(&linalg::vectorize(rho_a.matrix()));
        let x = linalg::expm(&(aug * c(b - a))) * x;

        // after the window ρ₁ and ρ₂ evolve under the trace-preserving ℒ alone
        let trace_of = |k: usize| linalg::trace(&linalg::unvectorize(&x.rows(k * n, n).into_owned(), d)).re;
        Ok(MomentResult::exact(trace_of(1), trace_of(2)))
    }
}

/// Exact moments of `obs` over horizon `tau`.
pub fn counting_moments(
    model: &LindbladModel,
    coherent: bool,
    rho0: &DensityMatrix,
    obs: &CountingObservable,
    tau: f64,
) -> Result<MomentResult> {
    MomentHierarchy::new(model, coherent)?.moments(rho0, obs, tau)
}

fn weighted_flux(model: &LindbladModel, rho: &CMatrix, weights: &[f64]) -> Result<f64> {
    if weights.len() != model.n_channels() {
        return Err(Error::WeightCount { expected: model.n_channels(), found: weights.len() });
    }
    Ok(model
        .channels()
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w != 0.0)
        .map(|(ch, &w)| w * linalg::jump_rate(ch.op.matrix(), rho))
        .sum())
}

/// `Σ_m c_m Tr[L_m ρ L_m^dag]`.
pub fn mean_rate(model: &LindbladModel, rho: &DensityMatrix, weights: &[f64]) -> Result<f64> {
    weighted_flux(model, rho.matrix(), weights)
}

/// Instantaneous activity `𝔞 = Σ_m Tr[L_m ρ L_m^dag]`.
pub fn activity_rate(model: &LindbladModel, rho: &DensityMatrix) -> f64 {
    weighted_flux(model, rho.matrix(), &vec![1.0; model.n_channels()]).expect("weight count matches")
}

/// Environment entropy flux `Σ_m Δs_m Tr[L_m ρ L_m^dag]`.
pub fn entropy_flux(model: &LindbladModel, rho: &DensityMatrix) -> Result<f64> {
    weighted_flux(model, rho.matrix(), &model.entropy_changes()?)
}

/// Contributions of the diagonal and off-diagonal parts of `rho` to the activity.
pub fn decompose_activity(model: &LindbladModel, rho: &DensityMatrix) -> (f64, f64) {
    let ones = vec![1.0; model.n_channels()];
    let (d, nd) = split_diagonal_offdiagonal(rho.matrix());
    (
        weighted_flux(model, &d, &ones).expect("weight count matches"),
        weighted_flux(model, &nd, &ones).expect("weight count matches"),
    )
}

/// Same split for the entropy flux `σ`.
pub fn decompose_sigma(model: &LindbladModel, rho: &DensityMatrix) -> Result<(f64, f64)> {
    let ds = model.entropy_changes()?;
    let (d, nd) = split_diagonal_offdiagonal(rho.matrix());
    Ok((weighted_flux(model, &d, &ds)?, weighted_flux(model, &nd, &ds)?))
}

/// Increasing sample times starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(tau: f64, n_points: usize) -> Result<Self> {
        Self::mapped(tau, n_points, |s| s)
    }

    /// Points `τ (k/n)²`, dense near zero where `√𝒜(t)/t` varies fastest.
    pub fn quadratic(tau: f64, n_points: usize) -> Result<Self> {
        Self::mapped(tau, n_points, |s| s * s)
    }

    fn mapped(tau: f64, n_points: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("grid horizon must be positive, got {tau}")));
        }
        if n_points < 2 {
            return Err(Error::InvalidArgument("a grid needs at least two points".into()));
        }
        let last = (n_points - 1) as f64;
        let mut times: Vec<f64> = (0..n_points).map(|k| tau * f(k as f64 / last)).collect();
        times[n_points - 1] = tau;
        Ok(Self { times })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("grid must start at 0 and increase strictly".into()));
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("grid is nonempty")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times.windows(2).zip(values.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}

/// Running trapezoid integral, starting at zero.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    out.push(acc);
    for (t, v) in times.windows(2).zip(values.windows(2)) {
        acc += 0.5 * (t[1] - t[0]) * (v[0] + v[1]);
        out.push(acc);
    }
    out
}

/// Activity and, when every channel has an entropy change, entropy
/// production sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermoCurve {
    pub times: Vec<f64>,
    /// `𝒜(t)`
    pub activity: Vec<f64>,
    /// `𝔞(t)`
    pub activity_rate: Vec<f64>,
    /// `Σ(t)`
    pub entropy: Option<Vec<f64>>,
    /// Environment part of the entropy production rate.
    pub entropy_flux: Option<Vec<f64>>,
}

impl ThermoCurve {
    pub fn final_activity(&self) -> f64 {
        *self.activity.last().expect("curve is nonempty")
    }

    pub fn final_entropy(&self) -> Option<f64> {
        self.entropy.as_ref().and_then(|s| s.last().copied())
    }
}

/// States `ρ(t_k)` on the grid; one propagator per distinct step length.
pub fn evolve_on_grid(gen: &Liouvillian, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<Vec<DensityMatrix>> {
    let mut states = Vec::with_capacity(grid.len());
    states.push(rho0.clone());
    let mut cached: Option<(f64, CMatrix)> = None;
    for w in grid.times().windows(2) {
        let dt = w[1] - w[0];
        let reuse = matches!(&cached, Some((h, _)) if (h - dt).abs() <= 1e-15 * dt.abs());
        if !reuse {
            cached = Some((dt, gen.propagator(dt)?));
        }
        let prop = &cached.as_ref().expect("propagator cached").1;
        let next = apply_propagator(prop, states.last().expect("nonempty"))?;
        states.push(next);
    }
    Ok(states)
}

pub fn activity_curve(model: &LindbladModel, coherent: bool, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<ThermoCurve> {
    let gen = build_generator(model, coherent)?;
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: rho0.dim() });
    }
    let states = evolve_on_grid(&gen, rho0, grid)?;
    let times = grid.times().to_vec();
    let activity_rate: Vec<f64> = states.iter().map(|r| activity_rate(model, r)).collect();
    let activity = cumulative_trapezoid(&times, &activity_rate);

    let (entropy, entropy_flux) = match model.entropy_changes() {
        Ok(ds) => {
            let flux: Vec<f64> = states.iter().map(|r| weighted_flux(model, r.matrix(), &ds)).collect::<Result<_>>()?;
            let env = cumulative_trapezoid(&times, &flux);
            let s0 = spectral_decompose(rho0)?.entropy();
            let mut total = Vec::with_capacity(states.len());
            for (r, e) in states.iter().zip(&env) {
                total.push(spectral_decompose(r)?.entropy() - s0 + e);
            }
            (Some(total), Some(flux))
        }
        Err(_) => (None, None),
    };
    Ok(ThermoCurve { times, activity, activity_rate, entropy, entropy_flux })
}

/// `Σ(τ)`: system entropy change plus integrated entropy flux.
pub fn entropy_production(
    model: &LindbladModel,
    coherent: bool,
    rho0: &DensityMatrix,
    tau: f64,
    n_points: usize,
) -> Result<f64> {
    model.entropy_changes()?;
    if tau == 0.0 {
        return Ok(0.0);
    }
    let curve = activity_curve(model, coherent, rho0, &TimeGrid::uniform(tau, n_points)?)?;
    Ok(curve.final_entropy().expect("entropy changes are set"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::steady_state;
    use crate::experiments::models::{build_da_model, build_ep_model, poisson_model};
    use crate::model::ChannelSpec;
    use crate::operator::Operator;

    fn da_steady(gamma: f64) -> (LindbladModel, DensityMatrix) {
        let model = build_da_model(1.0, [gamma; 4]).unwrap();
        let rho = steady_state(&build_generator(&model, true).unwrap()).unwrap();
        (model, rho)
    }

    #[test]
    fn poisson_moments() {
        let model = poisson_model(0.7).unwrap();
        let rho = DensityMatrix::maximally_mixed(1);
        for tau in [0.1, 1.0, 10.0] {
            let m = counting_moments(&model, true, &rho, &CountingObservable::activity(1), tau).unwrap();
            assert!((m.mean / (0.7 * tau) - 1.0).abs() < 1e-12);
            assert!((m.variance / (0.7 * tau) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_weights_give_zero_moments() {
        let (model, rho) = da_steady(0.5);
        let obs = CountingObservable::new(vec![0.0; 4]).unwrap();
        let m = counting_moments(&model, true, &rho, &obs, 2.0).unwrap();
        assert_eq!((m.mean, m.variance), (0.0, 0.0));
    }

    #[test]
    fn da_mean_is_activity_times_tau() {
        let gamma = 0.3;
        let (model, rho) = da_steady(gamma);
        let m = counting_moments(&model, true, &rho, &CountingObservable::activity(4), 1.7).unwrap();
        assert!((m.mean - 12.0 * gamma / 5.0 * 1.7).abs() < 1e-10);
        assert!(m.variance > 0.0);
    }

    #[test]
    fn mean_rate_examples() {
        let (model, rho) = da_steady(0.5);
        assert!((mean_rate(&model, &rho, &[1.0; 4]).unwrap() - 1.2).abs() < 1e-10);
        assert_eq!(mean_rate(&model, &rho, &[0.0; 4]).unwrap(), 0.0);
        let g2 = 0.37;
        let model = build_da_model(1.0, [0.5, g2, 0.5, 0.5]).unwrap();
        let ground = DensityMatrix::basis_state(3, 0);
        assert!((mean_rate(&model, &ground, &[0.0, 1.0, 0.0, 0.0]).unwrap() - 2.0 * g2).abs() < 1e-14);
        assert!(matches!(mean_rate(&model, &ground, &[1.0]), Err(Error::WeightCount { .. })));
    }

    #[test]
    fn activity_split_for_equal_rates() {
        let (model, rho) = da_steady(0.5);
        let (ad, and) = decompose_activity(&model, &rho);
        assert!((ad - 1.0).abs() < 1e-10);
        assert!((and - 0.2).abs() < 1e-10);
        assert!((ad + and - activity_rate(&model, &rho)).abs() < 1e-12);

        let diag = DensityMatrix::new(linalg::real_matrix(&[
            vec![0.5, 0.0, 0.0],
            vec![0.0, 0.3, 0.0],
            vec![0.0, 0.0, 0.2],
        ]))
        .unwrap();
        assert_eq!(decompose_activity(&model, &diag).1, 0.0);
    }

    #[test]
    fn steady_activity_curve_is_linear() {
        let (model, rho) = da_steady(0.5);
        let grid = TimeGrid::uniform(3.0, 64).unwrap();
        let curve = activity_curve(&model, true, &rho, &grid).unwrap();
        assert_eq!(curve.activity[0], 0.0);
        assert!((curve.final_activity() - 1.2 * 3.0).abs() < 1e-9);
        assert!(curve.entropy.is_none());
    }

    #[test]
    fn no_channels_means_no_activity() {
        let h = Operator::new(linalg::real_matrix(&[vec![1.0, 0.2], vec![0.2, -1.0]])).unwrap();
        let model = LindbladModel::new(h, Vec::<ChannelSpec>::new()).unwrap();
        let curve = activity_curve(&model, true, &DensityMatrix::basis_state(2, 0), &TimeGrid::uniform(1.0, 16).unwrap()).unwrap();
        assert!(curve.activity.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn activity_curves_agree_with_and_without_hamiltonian() {
        let model = build_da_model(1.0, [0.2, 0.7, 0.4, 0.9]).unwrap();
        let psi = CVector::from_vec(vec![c(0.6), c(0.0), c(0.8)]);
        let rho0 = DensityMatrix::pure(&psi).unwrap();
        let grid = TimeGrid::uniform(4.0, 200).unwrap();
        let a = activity_curve(&model, true, &rho0, &grid).unwrap();
        let b = activity_curve(&model, false, &rho0, &grid).unwrap();
        for (x, y) in a.activity.iter().zip(&b.activity) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn equilibrium_entropy_production_vanishes() {
        let model = build_ep_model(1.0, [0.3, 0.3, 0.6, 0.6, 0.2, 0.2]).unwrap();
        let rho = steady_state(&build_generator(&model, true).unwrap()).unwrap();
        let s = entropy_production(&model, true, &rho, 2.0, 64).unwrap();
        assert!(s.abs() < 1e-9);
    }

    #[test]
    fn steady_entropy_production_is_linear() {
        let model = build_ep_model(1.0, [0.3, 0.8, 0.6, 0.1, 0.2, 0.5]).unwrap();
        let rho = steady_state(&build_generator(&model, true).unwrap()).unwrap();
        let sigma = entropy_flux(&model, &rho).unwrap();
        assert!(sigma > 0.0);
        for tau in [0.5, 2.0] {
            let s = entropy_production(&model, true, &rho, tau, 32).unwrap();
            assert!((s - sigma * tau).abs() < 1e-9 * (1.0 + sigma * tau));
        }
        let (sd, snd) = decompose_sigma(&model, &rho).unwrap();
        assert!((sd + snd - sigma).abs() < 1e-12);
    }

    #[test]
    fn entropy_production_requires_entropy_changes() {
        let (model, rho) = da_steady(0.5);
        assert!(matches!(
            entropy_production(&model, true, &rho, 1.0, 16),
            Err(Error::MissingEntropyChange { .. })
        ));
    }

    #[test]
    fn window_validation() {
        let obs = CountingObservable::activity(1).with_window(0.5, 2.0).unwrap();
        assert!(matches!(obs.window_on(1.0), Err(Error::InvalidWindow { .. })));
        assert!(CountingObservable::activity(1).with_window(1.0, 0.5).is_err());
        assert_eq!(obs.window_on(2.0).unwrap(), (0.5, 2.0));
    }

    #[test]
    fn current_requires_antisymmetric_weights() {
        let model = build_ep_model(1.0, [0.3, 0.8, 0.6, 0.1, 0.2, 0.5]).unwrap();
        assert!(CountingObservable::current(&model, vec![0.4, -0.4, 1.0, -1.0, -0.2, 0.2]).is_ok());
        assert!(matches!(
            CountingObservable::current(&model, vec![0.4, 0.4, 1.0, -1.0, -0.2, 0.2]),
            Err(Error::NotAntisymmetric { channel: 0 })
        ));
        let da = build_da_model(1.0, [0.5; 4]).unwrap();
        assert!(CountingObservable::current(&da, vec![1.0; 4]).is_err());
    }

    #[test]
    fn windowed_means_add_up() {
        let model = build_da_model(1.0, [0.2, 0.7, 0.4, 0.9]).unwrap();
        let rho0 = DensityMatrix::basis_state(3, 0);
        let h = MomentHierarchy::new(&model, true).unwrap();
        let w = vec![0.3, 1.0, 0.5, 0.8];
        let tau = 2.4;
        let full = h.moments(&rho0, &CountingObservable::new(w.clone()).unwrap(), tau).unwrap();
        let first = CountingObservable::new(w.clone()).unwrap().with_window(0.0, tau / 2.0).unwrap();
        let second = CountingObservable::new(w).unwrap().with_window(tau / 2.0, tau).unwrap();
        let sum = h.moments(&rho0, &first, tau).unwrap().mean + h.moments(&rho0, &second, tau).unwrap().mean;
        assert!((sum - full.mean).abs() < 1e-9);
    }

    #[test]
    fn grids_end_at_horizon() {
        let g = TimeGrid::quadratic(3.0, 5).unwrap();
        assert_eq!(g.times(), &[0.0, 3.0 / 16.0, 0.75, 27.0 / 16.0, 3.0]);
        assert!(TimeGrid::from_times(vec![0.0, 1.0, 1.0]).is_err());
        assert!((trapezoid(&[0.0, 1.0, 3.0], &[0.0, 1.0, 3.0]) - 4.5).abs() < 1e-15);
    }
}
