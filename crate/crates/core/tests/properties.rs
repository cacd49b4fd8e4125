use proptest::prelude::*;

use qtur_core::bounds::{ep_tur_rhs, ep_tur_rhs_weak, inverse_x_tanh_x};
use qtur_core::counting::{counting_moments, entropy_production, mean_rate, CountingObservable, MomentHierarchy};
use qtur_core::engine::{build_generator, propagate, steady_state};
use qtur_core::experiments::models::{random_density, random_model, RandomModelOptions};
use qtur_core::trajectory::{PathEvaluator, Sampler, SeedPolicy};
use qtur_core::{DensityMatrix, LindbladModel};

fn model_and_state(seed: u64, dim: usize, n_ops: usize, paired: bool) -> (LindbladModel, DensityMatrix) {
    let mut rng = SeedPolicy::new(seed).rng_for(0);
    let model = random_model(&mut rng, RandomModelOptions { dim, n_operators: n_ops, paired, rotate: true }).unwrap();
    let rho = random_density(&mut rng, dim);
    (model, rho)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coherent_and_incoherent_moments_agree(
        seed in any::<u64>(), dim in 2usize..5, n_ops in 1usize..4, tau in 0.1f64..6.0,
        w in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let (model, rho) = model_and_state(seed, dim, n_ops, false);
        let obs = CountingObservable::new(w[..n_ops].to_vec()).unwrap();
        let a = counting_moments(&model, true, &rho, &obs, tau).unwrap();
        let b = counting_moments(&model, false, &rho, &obs, tau).unwrap();
        prop_assert!(close(a.mean, b.mean, 1e-8), "{} vs {}", a.mean, b.mean);
        prop_assert!(close(a.variance, b.variance, 1e-8), "{} vs {}", a.variance, b.variance);
        prop_assert!(a.variance >= -1e-10);
    }

    #[test]
    fn mean_grows_at_the_instantaneous_rate(
        seed in any::<u64>(), dim in 2usize..4, tau in 0.2f64..4.0,
        w in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let (model, rho) = model_and_state(seed, dim, 2, false);
        let obs = CountingObservable::new(w.clone()).unwrap();
        let h = 1e-4;
        let hierarchy = MomentHierarchy::new(&model, true).unwrap();
        let up = hierarchy.moments(&rho, &obs, tau + h).unwrap().mean;
        let down = hierarchy.moments(&rho, &obs, tau - h).unwrap().mean;
        let rho_tau = propagate(hierarchy.generator(), &rho, tau).unwrap();
        let rate = mean_rate(&model, &rho_tau, &w).unwrap();
        prop_assert!(((up - down) / (2.0 * h) - rate).abs() <= 1e-6 * rate.abs().max(1.0));
    }

    #[test]
    fn window_means_add_up(seed in any::<u64>(), tau in 0.2f64..5.0, split in 0.05f64..0.95) {
        let (model, rho) = model_and_state(seed, 3, 3, false);
        let hierarchy = MomentHierarchy::new(&model, true).unwrap();
        let obs = CountingObservable::activity(3);
        let t = split * tau;
        let whole = hierarchy.moments(&rho, &obs, tau).unwrap();
        let early = hierarchy.moments(&rho, &obs.clone().with_window(0.0, t).unwrap(), tau).unwrap();
        let late = hierarchy.moments(&rho, &obs.clone().with_window(t, tau).unwrap(), tau).unwrap();
        prop_assert!(close(whole.mean, early.mean + late.mean, 1e-9));
    }

    #[test]
    fn entropy_production_is_nonnegative(seed in any::<u64>(), dim in 2usize..4, tau in 0.1f64..5.0) {
        let (model, rho) = model_and_state(seed, dim, 2, true);
        let full = entropy_production(&model, true, &rho, tau, 256).unwrap();
        let bare = entropy_production(&model, false, &rho, tau, 256).unwrap();
        prop_assert!(full >= -1e-9, "{full}");
        prop_assert!((full - bare).abs() <= 1e-9 * full.abs().max(1.0));
    }

    #[test]
    fn steady_state_is_stationary(seed in any::<u64>(), dim in 2usize..5, n_ops in 1usize..4) {
        let (model, _) = model_and_state(seed, dim, n_ops, true);
        let gen = build_generator(&model, true).unwrap();
        prop_assume!(steady_state(&gen).is_ok());
        let rho = steady_state(&gen).unwrap();
        prop_assert!((rho.matrix().trace().re - 1.0).abs() < 1e-10);
        prop_assert!(gen.apply(rho.matrix()).norm() < 1e-9);
    }

    #[test]
    fn inverse_of_x_tanh_x(y in 1e-8f64..1e4) {
        let h = inverse_x_tanh_x(y).unwrap();
        prop_assert!(h >= 0.0);
        prop_assert!((h * h.tanh() - y).abs() <= 1e-12 * y.max(1.0));
    }

    #[test]
    fn tur_chain_holds(sigma in 1e-6f64..50.0) {
        prop_assert!(ep_tur_rhs(sigma).unwrap() >= ep_tur_rhs_weak(sigma));
    }

    #[test]
    fn path_densities_satisfy_the_ratio_identity(seed in any::<u64>(), tau in 0.2f64..3.0) {
        let (model, rho) = model_and_state(seed, 3, 2, true);
        let sampler = Sampler::new(&model, &rho, tau, false).unwrap();
        let evaluator = PathEvaluator::new(&model, &sampler).unwrap();
        for record in sampler.sample_ensemble(&SeedPolicy::new(seed), 20).unwrap() {
            prop_assert!(record.is_well_ordered());
            prop_assert!(record.jumps.iter().all(|j| j.time > 0.0 && j.time <= tau));
            let d = evaluator.densities(&record).unwrap();
            prop_assert!(d.relative_residual <= 1e-9, "{}", d.relative_residual);
            prop_assert!(evaluator.phase_identity(&record).relative_gap() <= 1e-9);
        }
    }

    #[test]
    fn sampling_is_reproducible(seed in any::<u64>(), index in 0u64..64) {
        let (model, rho) = model_and_state(seed, 3, 3, false);
        let sampler = Sampler::new(&model, &rho, 2.0, true).unwrap();
        let policy = SeedPolicy::new(seed);
        let all = sampler.sample_ensemble(&policy, 64).unwrap();
        prop_assert_eq!(&all[index as usize], &sampler.sample_indexed(&policy, index).unwrap());
        prop_assert_eq!(all, sampler.sample_ensemble(&policy, 64).unwrap());
    }
}
