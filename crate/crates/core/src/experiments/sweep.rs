//! Random-parameter sweeps over the three-level models.
//!
//! Each draw samples rates, horizon and counting weights from its own
//! seeded stream, evaluates the bound once with the full cost and once
//! with only its diagonal part, and yields one CSV row. Draws run in
//! parallel; rows are collected in draw order.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{ep_lower_bound, ep_tur_rhs, windowed_gamma, EXACT_TOL};
use crate::counting::{
    activity_rate, decompose_activity, decompose_sigma, entropy_flux, evolve_on_grid, mean_rate, trapezoid,
    CountingObservable, MomentHierarchy, TimeGrid,
};
use crate::engine::steady_state;
use crate::error::{Error, Result};
use crate::experiments::config::{Experiment, SweepConfig};
use crate::experiments::models::{build_da_model, build_ep_model, uniform_open};
use crate::operator::{spectral_decompose, DensityMatrix};
use crate::trajectory::dump::fmt_float;
use crate::trajectory::seed::SeedPolicy;

/// A row type with a fixed CSV layout.
pub trait CsvRecord {
    fn header() -> Vec<String>;
    fn fields(&self) -> Vec<String>;
    /// `(full cost satisfied, diagonal cost satisfied)`
    fn flags(&self) -> (bool, bool);
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |k| format!("{prefix}_{k}"))
}

fn floats(xs: &[f64]) -> impl Iterator<Item = String> + '_ {
    xs.iter().map(|&x| fmt_float(x))
}

/// Activity bound `Var/(τ²(∂_τE)²) ≥ 1/𝒜`. In transient mode the rate
/// columns hold time averages `𝒜/τ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KurRow {
    pub draw_index: usize,
    pub gammas: [f64; 4],
    pub tau: f64,
    pub weights: [f64; 4],
    pub mean: f64,
    pub variance: f64,
    pub mean_rate: f64,
    pub activity_rate: f64,
    pub activity_rate_d: f64,
    pub activity_rate_nd: f64,
    pub lhs: f64,
    pub rhs_full: f64,
    pub rhs_diag: f64,
    pub satisfied_full: bool,
    pub satisfied_diag: bool,
}

impl CsvRecord for KurRow {
    fn header() -> Vec<String> {
        let mut h = vec!["draw_index".to_string()];
        h.extend(numbered("gamma", 4));
        h.push("tau".into());
        h.extend(numbered("c", 4));
        h.extend(
            [
                "mean", "variance", "mean_rate", "a", "a_d", "a_nd", "lhs", "rhs_full", "rhs_diag", "ratio_full",
                "ratio_diag", "satisfied_full", "satisfied_diag",
            ]
            .map(String::from),
        );
        h
    }

    fn fields(&self) -> Vec<String> {
        let mut f = vec![self.draw_index.to_string()];
        f.extend(floats(&self.gammas));
        f.push(fmt_float(self.tau));
        f.extend(floats(&self.weights));
        f.extend(floats(&[
            self.mean,
            self.variance,
            self.mean_rate,
            self.activity_rate,
            self.activity_rate_d,
            self.activity_rate_nd,
            self.lhs,
            self.rhs_full,
            self.rhs_diag,
            self.rhs_full / self.lhs,
            self.rhs_diag / self.lhs,
        ]));
        f.push(self.satisfied_full.to_string());
        f.push(self.satisfied_diag.to_string());
        f
    }

    fn flags(&self) -> (bool, bool) {
        (self.satisfied_full, self.satisfied_diag)
    }
}

/// Entropy-production bound `Σ ≥ 2 arcsinh(1/√R)/√(R+1)`. In transient
/// mode the `sigma` columns hold time averages `Σ/τ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpRow {
    pub draw_index: usize,
    pub gammas: [f64; 6],
    pub tau: f64,
    pub weights: [f64; 6],
    pub mean: f64,
    pub variance: f64,
    pub gamma_factor: f64,
    pub precision: f64,
    pub sigma: f64,
    pub sigma_d: f64,
    pub sigma_nd: f64,
    pub entropy_full: f64,
    pub entropy_diag: f64,
    pub bound: f64,
    pub tur_rhs: f64,
    pub satisfied_full: bool,
    pub satisfied_diag: bool,
}

impl CsvRecord for EpRow {
    fn header() -> Vec<String> {
        let mut h = vec!["draw_index".to_string()];
        h.extend(numbered("gamma", 6));
        h.push("tau".into());
        h.extend(numbered("c", 6));
        h.extend(
            [
                "mean", "variance", "gamma_factor", "R", "sigma", "sigma_d", "sigma_nd", "entropy_full",
                "entropy_diag", "bound", "tur_rhs", "satisfied_full", "satisfied_diag",
            ]
            .map(String::from),
        );
        h
    }

    fn fields(&self) -> Vec<String> {
        let mut f = vec![self.draw_index.to_string()];
        f.extend(floats(&self.gammas));
        f.push(fmt_float(self.tau));
        f.extend(floats(&self.weights));
        f.extend(floats(&[
            self.mean,
            self.variance,
            self.gamma_factor,
            self.precision,
            self.sigma,
            self.sigma_d,
            self.sigma_nd,
            self.entropy_full,
            self.entropy_diag,
            self.bound,
            self.tur_rhs,
        ]));
        f.push(self.satisfied_full.to_string());
        f.push(self.satisfied_diag.to_string());
        f
    }

    fn flags(&self) -> (bool, bool) {
        (self.satisfied_full, self.satisfied_diag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedDraw {
    pub draw_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSummary {
    pub experiment: Experiment,
    pub n_draws: usize,
    pub n_rows: usize,
    pub n_skipped: usize,
    pub full_satisfied: usize,
    pub full_violated: usize,
    pub diag_satisfied: usize,
    pub diag_violated: usize,
}

impl std::fmt::Display for SweepSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "draws: {} (rows {}, skipped {})", self.n_draws, self.n_rows, self.n_skipped)?;
        writeln!(f, "full cost:     {} satisfied, {} violated", self.full_satisfied, self.full_violated)?;
        write!(f, "diagonal cost: {} satisfied, {} violated", self.diag_satisfied, self.diag_violated)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutcome<R> {
    pub rows: Vec<R>,
    pub skipped: Vec<SkippedDraw>,
    pub summary: SweepSummary,
}

impl<R: CsvRecord> SweepOutcome<R> {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(R::header())?;
        for row in &self.rows {
            w.write_record(row.fields())?;
        }
        w.flush()?;
        Ok(())
    }
}

fn run_draws<R: CsvRecord + Send>(
    cfg: &SweepConfig,
    draw: impl Fn(&mut rand_chacha::ChaCha8Rng, usize) -> Result<R> + Sync,
) -> Result<SweepOutcome<R>> {
    cfg.validate()?;
    let policy = SeedPolicy::new(cfg.seed);
    let results: Vec<Result<R>> =
        (0..cfg.n_draws).into_par_iter().map(|k| draw(&mut policy.rng_for(k as u64), k)).collect();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => skipped.push(SkippedDraw { draw_index: k, reason: e.to_string() }),
        }
    }
    let count = |pick: fn(&R) -> bool| rows.iter().filter(|r| pick(r)).count();
    let full_satisfied = count(|r| r.flags().0);
    let diag_satisfied = count(|r| r.flags().1);
    let summary = SweepSummary {
        experiment: cfg.experiment,
        n_draws: cfg.n_draws,
        n_rows: rows.len(),
        n_skipped: skipped.len(),
        full_satisfied,
        full_violated: rows.len() - full_satisfied,
        diag_satisfied,
        diag_violated: rows.len() - diag_satisfied,
    };
    Ok(SweepOutcome { rows, skipped, summary })
}

fn draw_array<const N: usize, G: Rng + ?Sized>(rng: &mut G, low: f64, high: f64) -> [f64; N] {
    std::array::from_fn(|_| uniform_open(rng, low, high))
}

/// Trapezoid integral of `rate` over the states on the grid.
fn integrate_states(
    states: &[DensityMatrix],
    times: &[f64],
    rate: impl Fn(&DensityMatrix) -> Result<f64>,
) -> Result<f64> {
    let values: Vec<f64> = states.iter().map(rate).collect::<Result<_>>()?;
    Ok(trapezoid(times, &values))
}

pub fn run_kur_sweep(cfg: &SweepConfig) -> Result<SweepOutcome<KurRow>> {
    let (c_low, c_high) = cfg.weight_range();
    run_draws(cfg, |rng, draw_index| {
        let gammas: [f64; 4] = draw_array(rng, cfg.gamma_low, cfg.gamma_high);
        let tau = uniform_open(rng, cfg.tau_low, cfg.tau_high);
        let weights: [f64; 4] = draw_array(rng, c_low, c_high);
        let model = build_da_model(cfg.omega_e, gammas)?;
        let hierarchy = MomentHierarchy::new(&model, true)?;
        let obs = CountingObservable::new(weights.to_vec())?;

        let (rho0, rho_tau, a, a_d) = if cfg.transient {
            let rho0 = cfg.initial_state.build(&model)?;
            let grid = TimeGrid::uniform(tau, cfg.grid_points)?;
            let states = evolve_on_grid(hierarchy.generator(), &rho0, &grid)?;
            let total = integrate_states(&states, grid.times(), |r| Ok(activity_rate(&model, r)))?;
            let diag = integrate_states(&states, grid.times(), |r| Ok(decompose_activity(&model, r).0))?;
            let rho_tau = states.last().expect("grid is nonempty").clone();
            (rho0, rho_tau, total / tau, diag / tau)
        } else {
            let rho = steady_state(hierarchy.generator())?;
            let (a_d, a_nd) = decompose_activity(&model, &rho);
            (rho.clone(), rho, a_d + a_nd, a_d)
        };
        let moments = hierarchy.moments(&rho0, &obs, tau)?;
        let rate = mean_rate(&model, &rho_tau, &weights)?;
        if rate == 0.0 {
            return Err(Error::InvalidArgument("mean rate vanishes".into()));
        }
        let lhs = moments.variance / (tau * tau * rate * rate);
        let (rhs_full, rhs_diag) = (1.0 / (a * tau), 1.0 / (a_d * tau));
        Ok(KurRow {
            draw_index,
            gammas,
            tau,
            weights,
            mean: moments.mean,
            variance: moments.variance,
            mean_rate: rate,
            activity_rate: a,
            activity_rate_d: a_d,
            activity_rate_nd: a - a_d,
            lhs,
            rhs_full,
            rhs_diag,
            satisfied_full: lhs - rhs_full >= -EXACT_TOL,
            satisfied_diag: lhs - rhs_diag >= -EXACT_TOL,
        })
    })
}

pub fn run_ep_sweep(cfg: &SweepConfig) -> Result<SweepOutcome<EpRow>> {
    let (c_low, c_high) = cfg.weight_range();
    run_draws(cfg, |rng, draw_index| {
        let gammas: [f64; 6] = draw_array(rng, cfg.gamma_low, cfg.gamma_high);
        let tau = uniform_open(rng, cfg.tau_low, cfg.tau_high);
        let free: [f64; 3] = draw_array(rng, c_low, c_high);
        let weights = [free[0], -free[0], free[1], -free[1], free[2], -free[2]];
        let model = build_ep_model(cfg.omega_e, gammas)?;
        let hierarchy = MomentHierarchy::new(&model, true)?;
        let obs = CountingObservable::current(&model, weights.to_vec())?;

        let (moments, gamma_factor, entropy_full, entropy_diag) = if cfg.transient {
            let rho0 = cfg.initial_state.build(&model)?;
            let grid = TimeGrid::uniform(tau, cfg.grid_points)?;
            let states = evolve_on_grid(hierarchy.generator(), &rho0, &grid)?;
            let system = spectral_decompose(states.last().expect("grid is nonempty"))?.entropy()
                - spectral_decompose(&rho0)?.entropy();
            let flux = integrate_states(&states, grid.times(), |r| entropy_flux(&model, r))?;
            let flux_d = integrate_states(&states, grid.times(), |r| Ok(decompose_sigma(&model, r)?.0))?;
            let gamma = windowed_gamma(&hierarchy, &rho0, &obs, tau)?.gamma;
            (hierarchy.moments(&rho0, &obs, tau)?, gamma, system + flux, system + flux_d)
        } else {
            let rho = steady_state(hierarchy.generator())?;
            let (s_d, s_nd) = decompose_sigma(&model, &rho)?;
            (hierarchy.moments(&rho, &obs, tau)?, 1.0, (s_d + s_nd) * tau, s_d * tau)
        };
        let bound = ep_lower_bound(moments.mean, moments.variance, gamma_factor)?;
        let precision = gamma_factor * moments.variance / (moments.mean * moments.mean);
        Ok(EpRow {
            draw_index,
            gammas,
            tau,
            weights,
            mean: moments.mean,
            variance: moments.variance,
            gamma_factor,
            precision,
            sigma: entropy_full / tau,
            sigma_d: entropy_diag / tau,
            sigma_nd: (entropy_full - entropy_diag) / tau,
            entropy_full,
            entropy_diag,
            bound,
            tur_rhs: ep_tur_rhs(entropy_full.max(0.0))?,
            satisfied_full: entropy_full - bound >= -EXACT_TOL,
            satisfied_diag: entropy_diag - bound >= -EXACT_TOL,
        })
    })
}

/// Result of either sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepResult {
    Kur(SweepOutcome<KurRow>),
    Ep(SweepOutcome<EpRow>),
}

impl SweepResult {
    pub fn summary(&self) -> &SweepSummary {
        match self {
            Self::Kur(o) => &o.summary,
            Self::Ep(o) => &o.summary,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        match self {
            Self::Kur(o) => o.write_csv(out),
            Self::Ep(o) => o.write_csv(out),
        }
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    match cfg.experiment {
        Experiment::KurSweep => Ok(SweepResult::Kur(run_kur_sweep(cfg)?)),
        Experiment::EpSweep => Ok(SweepResult::Ep(run_ep_sweep(cfg)?)),
        other => Err(Error::InvalidArgument(format!("{other:?} is not a sweep"))),
    }
}
