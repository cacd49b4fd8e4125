//! Quantum-jump sampling with exact waiting times.
//!
//! By default trajectories are drawn in the incoherent twin, where the
//! no-jump evolution `𝔏(t) = e^{−Kt/2}` is diagonal in the eigenbasis of
//! `K = Σ L^dag L` and the survival norm is a sum of exponentials. The
//! coherent sampler uses `V(t) = e^{−iH_eff t}` directly and exists to
//! cross-check the former.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::CountingObservable;
use crate::engine::{build_generator, propagate, DampingSpectrum};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, I};
use crate::model::LindbladModel;
use crate::operator::{spectral_decompose, DensityMatrix, SpectralDecomposition};
use crate::trajectory::seed::SeedPolicy;

const MAX_ROOT_ITERATIONS: usize = 200;
/// Tolerated excess of the survival norm above one before it is reported.
const NORM_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub channel: usize,
}

/// Jump record on `[0, horizon]` with the initial and final measurement labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub jumps: Vec<Jump>,
    pub initial_label: usize,
    pub final_label: usize,
    pub horizon: f64,
}

impl TrajectoryRecord {
    pub fn n_jumps(&self) -> usize {
        self.jumps.len()
    }

    /// Times strictly increasing inside `(0, horizon]`.
    pub fn is_well_ordered(&self) -> bool {
        let mut last = 0.0;
        for j in &self.jumps {
            if !(j.time > last) || j.time > self.horizon {
                return false;
            }
            last = j.time;
        }
        true
    }
}

/// `Σ_j c_{m_j}` over jumps with `t_j` in the window `(a, b]`.
pub fn record_observable(record: &TrajectoryRecord, obs: &CountingObservable) -> f64 {
    let (a, b) = obs.window().unwrap_or((0.0, record.horizon));
    record
        .jumps
        .iter()
        .filter(|j| j.time > a && j.time <= b)
        .map(|j| obs.weight(j.channel))
        .sum()
}

/// Index drawn with probability proportional to `weights`.
pub(crate) fn draw_index<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = k;
            acc += w;
            if target < acc {
                return k;
            }
        }
    }
    last_positive
}

/// Uniform draw from the open interval `(0, 1)`.
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// Solves `S(x) = u` on `[0, upper]` for a decreasing survival function,
/// given `S(0) > u >= S(upper)`. `eval` returns `(S(x), S'(x))`.
fn solve_crossing(u: f64, upper: f64, guess: f64, mut eval: impl FnMut(f64) -> (f64, f64)) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, upper);
    let mut x = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
    for _ in 0..MAX_ROOT_ITERATIONS {
        let (s, ds) = eval(x);
        let f = s - u;
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if f.abs() <= 1e-15 * u || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(x);
        }
        let newton = if ds < 0.0 { x - f / ds } else { f64::NAN };
        x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Err(Error::RootNotConverged)
}

/// Shared state for drawing trajectories of one model, initial state and horizon.
#[derive(Debug, Clone)]
pub struct Sampler {
    tau: f64,
    coherent: bool,
    jumps: Vec<CMatrix>,
    decay: CMatrix,
    spectrum: DampingSpectrum,
    heff_generator: CMatrix,
    initial: SpectralDecomposition,
    final_spectrum: SpectralDecomposition,
    final_basis: CMatrix,
}

impl Sampler {
    pub fn new(model: &LindbladModel, rho0: &DensityMatrix, tau: f64, coherent: bool) -> Result<Self> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::NegativeTime(tau));
        }
        if rho0.dim() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), found: rho0.dim() });
        }
        let twin = model.incoherent();
        let rho_tau = propagate(&build_generator(&twin, false)?, rho0, tau)?;
        let final_spectrum = spectral_decompose(&rho_tau)?;
        let final_basis = if coherent {
            linalg::expm(&(model.hamiltonian().matrix() * (-I * c(tau)))) * &final_spectrum.vectors
        } else {
            final_spectrum.vectors.clone()
        };
        Ok(Self {
            tau,
            coherent,
            jumps: model.channels().iter().map(|ch| ch.op.matrix().clone()).collect(),
            decay: model.decay_operator(),
            spectrum: DampingSpectrum::new(model)?,
            heff_generator: model.effective_hamiltonian() * (-I),
            initial: spectral_decompose(rho0)?,
            final_spectrum,
            final_basis,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.tau
    }

    pub fn is_coherent(&self) -> bool {
        self.coherent
    }

    /// Spectral decomposition of `ρ_∅(0)`: probabilities `q_i(0)`.
    pub fn initial_spectrum(&self) -> &SpectralDecomposition {
        &self.initial
    }

    /// Spectral decomposition of `ρ_∅(τ)`: probabilities `q_{i'}(τ)`.
    pub fn final_spectrum(&self) -> &SpectralDecomposition {
        &self.final_spectrum
    }

    /// First jump after `elapsed`: waiting time and the unnormalized state
    /// just before the jump, or `None` if the survival norm stays above `u`.
    fn next_jump(&self, psi: &CVector, u: f64, remaining: f64) -> Result<Option<(f64, CVector)>> {
        if self.coherent {
            self.next_jump_coherent(psi, u, remaining)
        } else {
            self.next_jump_damped(psi, u, remaining)
        }
    }

    fn next_jump_damped(&self, psi: &CVector, u: f64, remaining: f64) -> Result<Option<(f64, CVector)>> {
        let coords = self.spectrum.coordinates(psi);
        let weights: Vec<f64> = coords.iter().map(|a| a.norm_sqr()).collect();
        let rates = &self.spectrum.rates;
        let survival = |x: f64| -> (f64, f64) {
            let mut s = 0.0;
            let mut ds = 0.0;
            for (w, k) in weights.iter().zip(rates) {
                let e = w * (-k * x).exp();
                s += e;
                ds -= k * e;
            }
            (s, ds)
        };
        let s_end = survival(remaining).0;
        if s_end > 1.0 + NORM_SLACK {
            return Err(Error::NormIncrease(s_end));
        }
        if s_end > u {
            return Ok(None);
        }
        let r0 = -survival(0.0).1;
        let guess = if r0 > 0.0 { (1.0 / u).ln() / r0 } else { f64::NAN };
        let dt = solve_crossing(u, remaining, guess, survival)?;
        let damped = CVector::from_iterator(
            coords.len(),
            coords.iter().zip(rates).map(|(a, k)| a * c((-0.5 * k * dt).exp())),
        );
        Ok(Some((dt, self.spectrum.from_coordinates(&damped))))
    }

    fn next_jump_coherent(&self, psi: &CVector, u: f64, remaining: f64) -> Result<Option<(f64, CVector)>> {
        let evolve = |x: f64| linalg::expm(&(&self.heff_generator * c(x))) * psi;
        let survival = |x: f64| -> (f64, f64) {
            let phi = evolve(x);
            let k_phi = &self.decay * &phi;
            (phi.norm_squared(), -phi.dotc(&k_phi).re)
        };
        let (s_end, _) = survival(remaining);
        if s_end > 1.0 + NORM_SLACK {
            return Err(Error::NormIncrease(s_end));
        }
        if s_end > u {
            return Ok(None);
        }
        let r0 = -survival(0.0).1;
        let guess = if r0 > 0.0 { (1.0 / u).ln() / r0 } else { f64::NAN };
        let dt = solve_crossing(u, remaining, guess, survival)?;
        Ok(Some((dt, evolve(dt))))
    }

    fn evolve_without_jump(&self, psi: &CVector, dt: f64) -> CVector {
        if self.coherent {
            linalg::expm(&(&self.heff_generator * c(dt))) * psi
        } else {
            self.spectrum.damping(dt) * psi
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TrajectoryRecord> {
        let initial_label = draw_index(rng, &self.initial.probabilities);
        let mut psi = self.initial.vector(initial_label);
        let mut t = 0.0;
        let mut jumps = Vec::new();
        loop {
            let u = open_unit(rng);
            let remaining = self.tau - t;
            match self.next_jump(&psi, u, remaining)? {
                None => {
                    psi = self.evolve_without_jump(&psi, remaining);
                    break;
                }
                Some((dt, before)) => {
                    let candidates: Vec<CVector> = self.jumps.iter().map(|l| l * &before).collect();
                    let weights: Vec<f64> = candidates.iter().map(|v| v.norm_squared()).collect();
                    if !(weights.iter().sum::<f64>() > 0.0) {
                        return Err(Error::RootNotConverged);
                    }
                    let m = draw_index(rng, &weights);
                    // keep times strictly increasing even when dt underflows
                    let next = (t + dt).min(self.tau);
                    t = if next > t { next } else { f64::from_bits(t.to_bits() + 1).min(self.tau) };
                    psi = &candidates[m] / c(weights[m].sqrt());
                    jumps.push(Jump { time: t, channel: m });
                }
            }
        }
        let overlaps: Vec<f64> = (0..self.final_basis.ncols())
            .map(|k| self.final_basis.column(k).dotc(&psi).norm_sqr())
            .collect();
        let final_label = draw_index(rng, &overlaps);
        Ok(TrajectoryRecord { jumps, initial_label, final_label, horizon: self.tau })
    }

    /// Trajectory `index` of the stream defined by `policy`.
    pub fn sample_indexed(&self, policy: &SeedPolicy, index: u64) -> Result<TrajectoryRecord> {
        self.sample(&mut policy.rng_for(index))
    }

    /// `n` trajectories in parallel, returned in index order.
    pub fn sample_ensemble(&self, policy: &SeedPolicy, n: usize) -> Result<Vec<TrajectoryRecord>> {
        (0..n as u64).into_par_iter().map(|k| self.sample_indexed(policy, k)).collect()
    }
}

/// One trajectory of the incoherent twin (or of the full model with `coherent`).
pub fn sample_trajectory(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    tau: f64,
    policy: &SeedPolicy,
    index: u64,
    coherent: bool,
) -> Result<TrajectoryRecord> {
    Sampler::new(model, rho0, tau, coherent)?.sample_indexed(policy, index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::models::{build_da_model, poisson_model};
    use crate::model::ChannelSpec;
    use crate::operator::Operator;

    fn record(jumps: &[(f64, usize)]) -> TrajectoryRecord {
        TrajectoryRecord {
            jumps: jumps.iter().map(|&(time, channel)| Jump { time, channel }).collect(),
            initial_label: 0,
            final_label: 0,
            horizon: 1.0,
        }
    }

    #[test]
    fn observable_on_records() {
        let r = record(&[(0.3, 0), (0.7, 2)]);
        let obs = CountingObservable::new(vec![1.0, 0.0, 2.0, 0.0]).unwrap();
        assert_eq!(record_observable(&record(&[]), &obs), 0.0);
        assert_eq!(record_observable(&r, &obs), 3.0);
        assert_eq!(record_observable(&r, &obs.clone().with_window(0.5, 1.0).unwrap()), 2.0);
    }

    #[test]
    fn zero_operators_never_jump() {
        let model = LindbladModel::new(
            Operator::new(linalg::real_matrix(&[vec![1.0, 0.0], vec![0.0, 0.0]])).unwrap(),
            vec![ChannelSpec::new(Operator::zeros(2))],
        )
        .unwrap();
        let sampler = Sampler::new(&model, &DensityMatrix::maximally_mixed(2), 5.0, false).unwrap();
        let policy = SeedPolicy::new(1);
        for k in 0..50 {
            assert_eq!(sampler.sample_indexed(&policy, k).unwrap().n_jumps(), 0);
        }
    }

    #[test]
    fn poisson_jump_times_are_ordered() {
        let model = poisson_model(3.0).unwrap();
        let sampler = Sampler::new(&model, &DensityMatrix::maximally_mixed(1), 2.0, false).unwrap();
        let records = sampler.sample_ensemble(&SeedPolicy::new(9), 200).unwrap();
        assert!(records.iter().all(TrajectoryRecord::is_well_ordered));
        let mean = records.iter().map(|r| r.n_jumps() as f64).sum::<f64>() / 200.0;
        assert!((mean - 6.0).abs() < 1.0);
    }

    #[test]
    fn same_seed_same_record() {
        let model = build_da_model(1.0, [0.4, 0.6, 0.3, 0.8]).unwrap();
        let rho0 = DensityMatrix::maximally_mixed(3);
        for coherent in [false, true] {
            let sampler = Sampler::new(&model, &rho0, 3.0, coherent).unwrap();
            let policy = SeedPolicy::new(77);
            assert_eq!(sampler.sample_indexed(&policy, 5).unwrap(), sampler.sample_indexed(&policy, 5).unwrap());
        }
    }

    #[test]
    fn crossing_solver_matches_exponential() {
        let rate: f64 = 1.3;
        let u: f64 = 0.25;
        let x = solve_crossing(u, 10.0, f64::NAN, |x| ((-rate * x).exp(), -rate * (-rate * x).exp())).unwrap();
        assert!((x - (1.0 / u).ln() / rate).abs() < 1e-13);
    }

    #[test]
    fn draw_index_skips_zero_weights() {
        let mut rng = SeedPolicy::new(3).rng_for(0);
        for _ in 0..100 {
            assert_eq!(draw_index(&mut rng, &[0.0, 2.0, 0.0]), 1);
        }
    }
}
