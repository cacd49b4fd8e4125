//! Every applicable bound for one model, initial state and horizon.

use crate::bounds::{
    ep_entropy_report, ep_tur, half_activity_integral, kur_from_stats, moment_ratio_bounds, survival_bound_check,
    tur_activity_integral, windowed_gamma, BoundReport, MomentRatioInput,
};
use crate::counting::{activity_curve, activity_rate, mean_rate, CountingObservable, MomentHierarchy, TimeGrid};
use crate::engine::propagate;
use crate::error::Result;
use crate::model::LindbladModel;
use crate::operator::DensityMatrix;
use crate::trajectory::sampler::{record_observable, Sampler};
use crate::trajectory::seed::SeedPolicy;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    /// Trajectories for the absolute-moment bounds; zero skips them.
    pub trajectories: usize,
    pub seed: u64,
    pub grid_points: usize,
}

/// Activity bounds for `obs`; entropy-production bounds too when `obs` is
/// a current and the channels carry entropy changes.
pub fn bounds_report(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    obs: &CountingObservable,
    tau: f64,
    opts: &ReportOptions,
) -> Result<Vec<BoundReport>> {
    let hierarchy = MomentHierarchy::new(model, true)?;
    let curve = activity_curve(model, true, rho0, &TimeGrid::quadratic(tau, opts.grid_points)?)?;
    let mut reports = Vec::new();

    let full = CountingObservable::new(obs.weights().to_vec())?;
    let late = hierarchy.moments(rho0, &full, tau)?;
    let rho_tau = propagate(hierarchy.generator(), rho0, tau)?;
    let rate = mean_rate(model, &rho_tau, obs.weights())?;
    if rate != 0.0 {
        reports.push(kur_from_stats(&late, rate, tau, curve.final_activity())?);
    }
    let early = hierarchy.moments(rho0, &full, 0.5 * tau)?;
    if late.mean > early.mean {
        reports.push(tur_activity_integral(&early, &late, 0.5 * tau, tau, &curve)?);
    }
    reports.push(survival_bound_check(model, rho0, tau)?);

    if opts.trajectories >= 2 {
        let sampler = Sampler::new(model, rho0, tau, false)?;
        let values: Vec<f64> = sampler
            .sample_ensemble(&SeedPolicy::new(opts.seed), opts.trajectories)?
            .iter()
            .map(|r| record_observable(r, &full))
            .collect();
        let input = MomentRatioInput::from_samples(&values, 1.0, 2.0)?;
        if input.m_r > 0.0 {
            let half = half_activity_integral(&curve, 0.0, tau)?;
            let (sin_form, exp_form) = moment_ratio_bounds(&input, half, activity_rate(model, rho0), tau)?;
            reports.push(sin_form);
            reports.push(exp_form);
        }
    }

    if obs.is_antisymmetric() && late.mean != 0.0 {
        if let Some(sigma) = curve.final_entropy() {
            let gamma = windowed_gamma(&hierarchy, rho0, obs, tau)?.gamma;
            reports.push(ep_tur(&late, Some(gamma), sigma)?);
            reports.push(ep_entropy_report("ep_lower_bound", sigma, late.mean, late.variance, gamma)?);
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{build_generator, steady_state};
    use crate::experiments::models::build_ep_model;

    #[test]
    fn ep_model_report_is_complete_and_satisfied() {
        let model = build_ep_model(1.0, [0.9, 0.2, 0.3, 0.6, 0.5, 0.1]).unwrap();
        let rho = steady_state(&build_generator(&model, true).unwrap()).unwrap();
        let obs = CountingObservable::current(&model, vec![1.0, -1.0, 0.5, -0.5, 0.0, 0.0]).unwrap();
        let opts = ReportOptions { trajectories: 500, seed: 1, grid_points: 256 };
        let reports = bounds_report(&model, &rho, &obs, 2.0, &opts).unwrap();
        let names: Vec<&str> = reports.iter().map(|r| r.name.as_str()).collect();
        for expected in ["kur", "survival", "moment_ratio_exp", "ep_tur", "ep_lower_bound"] {
            assert!(names.contains(&expected), "{names:?}");
        }
        assert!(reports.iter().all(|r| !r.violated()), "{reports:#?}");
    }
}
