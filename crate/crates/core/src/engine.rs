//! Deterministic master-equation propagation, steady states and the no-jump
//! operator family.

use nalgebra::linalg::Schur;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, I};
use crate::model::LindbladModel;
use crate::operator::DensityMatrix;

/// Tolerance a propagated state must meet.
pub const PROPAGATION_TOL: f64 = 1e-8;
/// Eigenvalues of the generator closer than this to zero count toward the nullity.
pub const NULLITY_THRESHOLD: f64 = 1e-8;
/// Allowed `‖V − U𝔏‖_F`.
pub const FACTORIZATION_TOL: f64 = 1e-9;

/// Lindblad generator acting on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    matrix: CMatrix,
    dim: usize,
    coherent: bool,
}

/// Builds `ℒρ = −i[H, ρ] + Σ_m (L ρ L^dag − ½{L^dag L, ρ})`, dropping the
/// commutator when `coherent` is false.
pub fn build_generator(model: &LindbladModel, coherent: bool) -> Result<Liouvillian> {
    let d = model.dim();
    let id = linalg::identity(d);
    let mut gen = CMatrix::zeros(d * d, d * d);
    if coherent {
        let h = model.hamiltonian().matrix();
        gen += (linalg::kron(&id, h) - linalg::kron(&h.transpose(), &id)) * (-I);
    }
    for ch in model.channels() {
        let l = ch.op.matrix();
        if l.nrows() != d {
            return Err(Error::DimensionMismatch { expected: d, found: l.nrows() });
        }
        let ldl = l.adjoint() * l;
        gen += linalg::kron(&l.conjugate(), l);
        gen -= (linalg::kron(&id, &ldl) + linalg::kron(&ldl.transpose(), &id)) * c(0.5);
    }
    Ok(Liouvillian { matrix: gen, dim: d, coherent })
}

impl Liouvillian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn is_coherent(&self) -> bool {
        self.coherent
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        linalg::unvectorize(&(&self.matrix * linalg::vectorize(rho)), self.dim)
    }

    /// `‖vec(𝟙)^dag ℒ‖`, zero for a trace-preserving generator.
    pub fn trace_preservation_residual(&self) -> f64 {
        let id = linalg::vectorize(&linalg::identity(self.dim));
        (id.adjoint() * &self.matrix).norm()
    }

    /// `exp(ℒ t)` on vectorized states.
    pub fn propagator(&self, t: f64) -> Result<CMatrix> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        Ok(linalg::expm(&(&self.matrix * c(t))))
    }
}

/// `exp(ℒ t) ρ0`, validated at [`PROPAGATION_TOL`].
pub fn propagate(gen: &Liouvillian, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    let prop = gen.propagator(t)?;
    apply_propagator(&prop, rho0)
}

pub(crate) fn apply_propagator(prop: &CMatrix, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let out = linalg::unvectorize(&(prop * linalg::vectorize(rho.matrix())), rho.dim());
    DensityMatrix::with_tolerance(linalg::hermitize(&out), PROPAGATION_TOL)
}

/// Unique stationary state of the generator.
///
/// Uniqueness comes from the Schur spectrum (exactly one eigenvalue within
/// [`NULLITY_THRESHOLD`] of zero); the null vector itself is the right
/// singular vector of the smallest singular value.
pub fn steady_state(gen: &Liouvillian) -> Result<DensityMatrix> {
    let d = gen.dim;
    let schur = Schur::try_new(gen.matrix.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::NoSteadyState("Schur iteration did not converge".into()))?;
    let eigenvalues = schur
        .eigenvalues()
        .ok_or_else(|| Error::NoSteadyState("Schur form is not triangular".into()))?;
    let count = eigenvalues.iter().filter(|z| z.norm() < NULLITY_THRESHOLD).count();
    if count > 1 {
        return Err(Error::DegenerateSteadyState { count, threshold: NULLITY_THRESHOLD });
    }
    if count == 0 {
        return Err(Error::NoSteadyState("no eigenvalue near zero".into()));
    }

    let svd = gen.matrix.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::NoSteadyState("SVD failed".into()))?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::NoSteadyState("empty generator".into()))?;
    let null: CVector = v_t.row(idx).adjoint();
    let rho = linalg::hermitize(&linalg::unvectorize(&null, d));
    let tr = linalg::trace(&rho);
    if tr.norm() < 1e-300 {
        return Err(Error::NoSteadyState("null vector is traceless".into()));
    }
    let rho = rho / tr;
    let rho = linalg::hermitize(&rho);
    let residual = linalg::frobenius(&gen.apply(&rho));
    let scale = linalg::frobenius(&gen.matrix).max(1.0);
    if residual > 1e-10 * scale {
        return Err(Error::NoSteadyState(format!("residual {residual:.3e}")));
    }
    DensityMatrix::new(rho)
}

/// Spectral form of `Σ_m L_m^dag L_m`, giving `𝔏(t) = exp(−K t / 2)` at any `t`.
#[derive(Debug, Clone)]
pub struct DampingSpectrum {
    /// Eigenvalues of `K` (nonnegative up to rounding).
    pub rates: Vec<f64>,
    pub vectors: CMatrix,
}

impl DampingSpectrum {
    pub fn new(model: &LindbladModel) -> Result<Self> {
        let (rates, vectors) =
            linalg::hermitian_eigen(&model.decay_operator()).ok_or(Error::DecompositionFailed)?;
        Ok(Self { rates: rates.into_iter().map(|r| r.max(0.0)).collect(), vectors })
    }

    /// `𝔏(t) = exp(−K t / 2)`.
    pub fn damping(&self, t: f64) -> CMatrix {
        let n = self.rates.len();
        let diag = CMatrix::from_diagonal(&CVector::from_iterator(
            n,
            self.rates.iter().map(|&k| c((-0.5 * k * t).exp())),
        ));
        &self.vectors * diag * self.vectors.adjoint()
    }

    /// Coordinates of `psi` in the eigenbasis of `K`.
    pub fn coordinates(&self, psi: &CVector) -> CVector {
        self.vectors.adjoint() * psi
    }

    pub fn from_coordinates(&self, coords: &CVector) -> CVector {
        &self.vectors * coords
    }
}

/// `U(t) = e^{−iHt}`, `𝔏(t) = e^{−Kt/2}` and `V(t) = e^{−iH_eff t}`.
#[derive(Debug, Clone)]
pub struct NoJumpFamily {
    pub time: f64,
    pub unitary: CMatrix,
    pub damping: CMatrix,
    pub no_jump: CMatrix,
    /// `max(‖V − U𝔏‖_F, ‖U𝔏 − 𝔏U‖_F)`.
    pub residual: f64,
}

pub fn no_jump_family(model: &LindbladModel, t: f64) -> Result<NoJumpFamily> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let unitary = linalg::expm(&(model.hamiltonian().matrix() * (-I * c(t))));
    let damping = DampingSpectrum::new(model)?.damping(t);
    let no_jump = linalg::expm(&(model.effective_hamiltonian() * (-I * c(t))));
    let ul = &unitary * &damping;
    let residual = linalg::frobenius(&(&no_jump - &ul)).max(linalg::frobenius(&(&ul - &damping * &unitary)));
    if residual > FACTORIZATION_TOL {
        return Err(Error::NoJumpFactorization { residual, tol: FACTORIZATION_TOL });
    }
    Ok(NoJumpFamily { time: t, unitary, damping, no_jump, residual })
}

/// Probability of no jump in `[0, τ]`: `Tr[V(τ) ρ0 V(τ)^dag]`.
pub fn survival_probability(model: &LindbladModel, rho0: &DensityMatrix, tau: f64) -> Result<f64> {
    if tau < 0.0 {
        return Err(Error::NegativeTime(tau));
    }
    let v = linalg::expm(&(model.effective_hamiltonian() * (-I * c(tau))));
    Ok(linalg::trace(&(&v * rho0.matrix() * v.adjoint())).re.clamp(0.0, 1.0))
}

/// Same quantity evaluated with `𝔏(τ)` in place of `V(τ)`.
pub fn survival_probability_incoherent(model: &LindbladModel, rho0: &DensityMatrix, tau: f64) -> Result<f64> {
    if tau < 0.0 {
        return Err(Error::NegativeTime(tau));
    }
    let l = DampingSpectrum::new(model)?.damping(tau);
    Ok(linalg::trace(&(&l * rho0.matrix() * &l)).re.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ket_bra, real_matrix, C64};
    use crate::model::ChannelSpec;
    use crate::operator::Operator;

    fn poisson(gamma: f64) -> LindbladModel {
        let l = Operator::new(CMatrix::from_element(1, 1, c(gamma.sqrt()))).unwrap();
        LindbladModel::new(Operator::zeros(1), vec![ChannelSpec::new(l)]).unwrap()
    }

    #[test]
    fn identity_jump_in_one_dimension_gives_zero_generator() {
        let gen = build_generator(&poisson(0.8), true).unwrap();
        assert!(gen.matrix()[(0, 0)].norm() < 1e-15);
        let rho = propagate(&gen, &DensityMatrix::maximally_mixed(1), 3.0).unwrap();
        assert!((rho.matrix()[(0, 0)] - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn unitary_generator_has_imaginary_spectrum() {
        let h = Operator::new(real_matrix(&[vec![0.0, 0.0], vec![0.0, 1.5]])).unwrap();
        let model = LindbladModel::new(h, vec![]).unwrap();
        let gen = build_generator(&model, true).unwrap();
        let eig = Schur::new(gen.matrix().clone()).eigenvalues().unwrap();
        assert!(eig.iter().all(|z| z.re.abs() < 1e-12));
        // a state diagonal in the energy basis does not move
        let rho0 = DensityMatrix::new(real_matrix(&[vec![0.3, 0.0], vec![0.0, 0.7]])).unwrap();
        let rho = propagate(&gen, &rho0, 2.0).unwrap();
        assert!(linalg::max_abs_diff(rho.matrix(), rho0.matrix()) < 1e-12);
    }

    #[test]
    fn negative_time_is_rejected() {
        let gen = build_generator(&poisson(1.0), true).unwrap();
        assert!(matches!(
            propagate(&gen, &DensityMatrix::maximally_mixed(1), -1.0),
            Err(Error::NegativeTime(_))
        ));
    }

    #[test]
    fn degenerate_steady_state_is_an_error() {
        // pure dephasing of a qubit leaves every diagonal state stationary
        let l = Operator::new(ket_bra(2, 0, 0)).unwrap();
        let model = LindbladModel::new(Operator::zeros(2), vec![ChannelSpec::new(l)]).unwrap();
        let gen = build_generator(&model, true).unwrap();
        assert!(matches!(steady_state(&gen), Err(Error::DegenerateSteadyState { .. })));
    }

    #[test]
    fn decay_steady_state_and_survival() {
        let g: f64 = 0.9;
        let l = Operator::new(ket_bra(2, 0, 1) * c(g.sqrt())).unwrap();
        let h = Operator::new(ket_bra(2, 1, 1) * c(2.0)).unwrap();
        let model = LindbladModel::new(h, vec![ChannelSpec::new(l)]).unwrap();
        let gen = build_generator(&model, true).unwrap();
        let ss = steady_state(&gen).unwrap();
        assert!((ss.matrix()[(0, 0)] - c(1.0)).norm() < 1e-12);
        let excited = DensityMatrix::basis_state(2, 1);
        let p = survival_probability(&model, &excited, 1.7).unwrap();
        assert!((p - (-g * 1.7f64).exp()).abs() < 1e-13);
        assert_eq!(survival_probability(&model, &excited, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn no_jump_family_at_zero_time_is_identity() {
        let h = Operator::new(ket_bra(2, 1, 1) * c(2.0)).unwrap();
        let l = Operator::new(ket_bra(2, 0, 1) * C64::new(0.3, 0.4)).unwrap();
        let model = LindbladModel::new(h, vec![ChannelSpec::new(l)]).unwrap();
        let fam = no_jump_family(&model, 0.0).unwrap();
        let id = linalg::identity(2);
        for m in [&fam.unitary, &fam.damping, &fam.no_jump] {
            assert!(linalg::max_abs_diff(m, &id) < 1e-15);
        }
        let twin = no_jump_family(&model.incoherent(), 1.3).unwrap();
        assert!(linalg::max_abs_diff(&twin.no_jump, &twin.damping) < 1e-12);
    }
}
