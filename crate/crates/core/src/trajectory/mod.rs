//! Quantum-jump trajectories: sampling, path densities and ensemble estimates.

pub mod dump;
pub mod estimate;
pub mod ktest;
pub mod paths;
pub mod sampler;
pub mod seed;

pub use estimate::{estimate, estimate_records, kl_estimate, EnsembleEstimate, KlEstimate};
pub use paths::{record_entropy, PathDensities, PathEvaluator, PhaseIdentity};
pub use sampler::{record_observable, sample_trajectory, Jump, Sampler, TrajectoryRecord};
pub use seed::SeedPolicy;
