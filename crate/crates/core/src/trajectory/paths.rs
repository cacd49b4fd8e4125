//! Path densities of forward and time-reversed records, the per-record
//! entropy production and the amplitude-level check between `V` and `𝔏`.

use serde::Serialize;

use crate::engine::DampingSpectrum;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64, I};
use crate::model::LindbladModel;
use crate::operator::SpectralDecomposition;
use crate::trajectory::sampler::{Sampler, TrajectoryRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathDensities {
    /// `P(ζ)`
    pub forward: f64,
    /// `Q(ζ)` from the explicitly reversed record.
    pub backward: f64,
    /// `e^{−Σ Δs} (q_{i'}(τ) / q_i(0)) P(ζ)`
    pub predicted_backward: f64,
    /// `|Q − predicted| / max(Q, predicted)`
    pub relative_residual: f64,
}

/// Squared amplitudes of one record with `𝔏` and with `V` in the no-jump segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseIdentity {
    pub damped: f64,
    pub coherent: f64,
}

impl PhaseIdentity {
    pub fn relative_gap(&self) -> f64 {
        let scale = self.damped.abs().max(self.coherent.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.damped - self.coherent).abs() / scale
        }
    }
}

/// `ln q_i(0) − ln q_{i'}(τ) + Σ_j Δs_{m_j}`.
pub fn record_entropy(
    record: &TrajectoryRecord,
    q0: &SpectralDecomposition,
    qtau: &SpectralDecomposition,
    ds: &[f64],
) -> Result<f64> {
    let ln_q0 = q0
        .ln_probability(record.initial_label)
        .ok_or(Error::ZeroProbabilityLabel { label: record.initial_label })?;
    let ln_qtau = qtau
        .ln_probability(record.final_label)
        .ok_or(Error::ZeroProbabilityLabel { label: record.final_label })?;
    let flow: f64 = record.jumps.iter().map(|j| ds[j.channel]).sum();
    Ok(ln_q0 - ln_qtau + flow)
}

/// Evaluates records drawn by a [`Sampler`] against the model that produced them.
#[derive(Debug, Clone)]
pub struct PathEvaluator {
    tau: f64,
    jumps: Vec<CMatrix>,
    partners: Option<Vec<usize>>,
    ds: Option<Vec<f64>>,
    spectrum: DampingSpectrum,
    heff_generator: CMatrix,
    unitary_tau: CMatrix,
    q0: SpectralDecomposition,
    qtau: SpectralDecomposition,
}

impl PathEvaluator {
    pub fn new(model: &LindbladModel, sampler: &Sampler) -> Result<Self> {
        let tau = sampler.horizon();
        Ok(Self {
            tau,
            jumps: model.channels().iter().map(|ch| ch.op.matrix().clone()).collect(),
            partners: model.partners().ok(),
            ds: model.entropy_changes().ok(),
            spectrum: DampingSpectrum::new(model)?,
            heff_generator: model.effective_hamiltonian() * (-I),
            unitary_tau: linalg::expm(&(model.hamiltonian().matrix() * (-I * c(tau)))),
            q0: sampler.initial_spectrum().clone(),
            qtau: sampler.final_spectrum().clone(),
        })
    }

    fn amplitude(
        &self,
        start: CVector,
        end: &CVector,
        steps: impl Iterator<Item = (f64, usize)>,
        no_jump: impl Fn(f64) -> CMatrix,
    ) -> C64 {
        let mut x = start;
        let mut last = 0.0;
        for (t, m) in steps {
            x = &self.jumps[m] * (no_jump(t - last) * x);
            last = t;
        }
        x = no_jump(self.tau - last) * x;
        end.dotc(&x)
    }

    fn forward_amplitude(&self, record: &TrajectoryRecord) -> C64 {
        self.amplitude(
            self.q0.vector(record.initial_label),
            &self.qtau.vector(record.final_label),
            record.jumps.iter().map(|j| (j.time, j.channel)),
            |dt| self.spectrum.damping(dt),
        )
    }

    pub fn densities(&self, record: &TrajectoryRecord) -> Result<PathDensities> {
        let partners = self.partners.as_ref().ok_or(Error::DetailedBalance {
            channel: 0,
            reason: "channels are not paired".into(),
        })?;
        let ds = self.ds.as_ref().ok_or(Error::MissingEntropyChange { channel: 0 })?;
        let (i, f) = (record.initial_label, record.final_label);
        let forward = self.q0.probabilities[i] * self.forward_amplitude(record).norm_sqr();

        let reversed = record.jumps.iter().rev().map(|j| (self.tau - j.time, partners[j.channel]));
        let back_amp = self.amplitude(self.qtau.vector(f), &self.q0.vector(i), reversed, |dt| self.spectrum.damping(dt));
        let backward = self.qtau.probabilities[f] * back_amp.norm_sqr();

        let flow: f64 = record.jumps.iter().map(|j| ds[j.channel]).sum();
        let predicted_backward = if self.q0.probabilities[i] > 0.0 {
            (-flow).exp() * self.qtau.probabilities[f] / self.q0.probabilities[i] * forward
        } else {
            0.0
        };
        let scale = backward.max(predicted_backward);
        let relative_residual = if scale > 0.0 { (backward - predicted_backward).abs() / scale } else { 0.0 };
        Ok(PathDensities { forward, backward, predicted_backward, relative_residual })
    }

    pub fn record_entropy(&self, record: &TrajectoryRecord) -> Result<f64> {
        let ds = self.ds.as_ref().ok_or(Error::MissingEntropyChange { channel: 0 })?;
        record_entropy(record, &self.q0, &self.qtau, ds)
    }

    /// Final state measured in `U(τ)|i'⟩` for the coherent amplitude, as
    /// the coherent sampler does.
    pub fn phase_identity(&self, record: &TrajectoryRecord) -> PhaseIdentity {
        let damped = self.forward_amplitude(record).norm_sqr();
        let end = &self.unitary_tau * self.qtau.vector(record.final_label);
        let coherent = self
            .amplitude(
                self.q0.vector(record.initial_label),
                &end,
                record.jumps.iter().map(|j| (j.time, j.channel)),
                |dt| linalg::expm(&(&self.heff_generator * c(dt))),
            )
            .norm_sqr();
        PhaseIdentity { damped, coherent }
    }
}
