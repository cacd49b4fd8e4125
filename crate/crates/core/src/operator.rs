//! Dense operators, density matrices and the structural checks every model
//! has to pass before it is simulated.

use serde::Serialize;

use crate::error::{DensityViolation, Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64};

/// Default tolerance for density-matrix invariants.
pub const DENSITY_TOL: f64 = 1e-10;
/// Default relative Frobenius tolerance for `[L, H] = ω L`.
pub const BOHR_TOL: f64 = 1e-8;
/// Eigenvalues below this are treated as exact zeros before taking logarithms.
pub const EIGEN_CLIP: f64 = 1e-14;

/// Square complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(CMatrix);

impl Operator {
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() == 0 || mat.nrows() != mat.ncols() {
            return Err(Error::NotSquare { rows: mat.nrows(), cols: mat.ncols() });
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(mat))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn frobenius(&self) -> f64 {
        linalg::frobenius(&self.0)
    }

    pub fn scaled(&self, z: C64) -> Self {
        Self(&self.0 * z)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::hermiticity_deviation(&self.0) <= tol
    }
}

/// Worst-case numbers behind a density-matrix validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityDiagnostics {
    pub hermiticity: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

impl DensityDiagnostics {
    /// First invariant that fails at `tol`, in the order Hermiticity, trace, positivity.
    pub fn violation(&self, tol: f64) -> Option<DensityViolation> {
        if self.hermiticity > tol {
            Some(DensityViolation::NotHermitian(self.hermiticity))
        } else if self.trace_error > tol {
            Some(DensityViolation::Trace(1.0 + self.trace_error))
        } else if self.min_eigenvalue < -tol {
            Some(DensityViolation::Negative(self.min_eigenvalue))
        } else {
            None
        }
    }
}

pub fn density_diagnostics(mat: &CMatrix) -> Result<DensityDiagnostics> {
    if mat.nrows() == 0 || mat.nrows() != mat.ncols() {
        return Err(Error::NotSquare { rows: mat.nrows(), cols: mat.ncols() });
    }
    if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(DensityViolation::NonFinite.into());
    }
    let hermiticity = linalg::hermiticity_deviation(mat);
    let tr = linalg::trace(mat);
    let trace_error = (tr - c(1.0)).norm();
    let (values, _) = linalg::hermitian_eigen(mat).ok_or(Error::DecompositionFailed)?;
    let min_eigenvalue = values.last().copied().unwrap_or(0.0);
    Ok(DensityDiagnostics { hermiticity, trace_error, min_eigenvalue })
}

/// Checks Hermiticity, unit trace and positivity of `mat` within `tol`.
pub fn validate_density(mat: &CMatrix, tol: f64) -> Result<DensityDiagnostics> {
    let diag = density_diagnostics(mat)?;
    match diag.violation(tol) {
        Some(v) => Err(v.into()),
        None => Ok(diag),
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        Self::with_tolerance(mat, DENSITY_TOL)
    }

    pub fn with_tolerance(mat: CMatrix, tol: f64) -> Result<Self> {
        validate_density(&mat, tol)?;
        Ok(Self(mat))
    }

    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let psi = psi / c(norm);
        Self::new(&psi * psi.adjoint())
    }

    /// `|k><k|` in the computational basis.
    pub fn basis_state(dim: usize, k: usize) -> Self {
        Self(linalg::ket_bra(dim, k, k))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(linalg::identity(dim) * c(1.0 / dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// `-Tr[rho ln rho]` with `0 ln 0 = 0`.
    pub fn von_neumann_entropy(&self) -> Result<f64> {
        let spec = spectral_decompose(self)?;
        Ok(spec.entropy())
    }
}

/// Eigenvalues (probabilities) and orthonormal eigenvectors of a state.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Clipped to `[0, 1]` and renormalized; sorted descending.
    pub probabilities: Vec<f64>,
    /// Column `k` is the eigenvector of `probabilities[k]`.
    pub vectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.probabilities.len()
    }

    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }

    /// `ln q_k`, or `None` when the eigenvalue sits at the clipping floor.
    pub fn ln_probability(&self, k: usize) -> Option<f64> {
        let q = self.probabilities[k];
        (q > EIGEN_CLIP).then(|| q.ln())
    }

    pub fn entropy(&self) -> f64 {
        self.probabilities
            .iter()
            .filter(|&&q| q > EIGEN_CLIP)
            .map(|&q| -q * q.ln())
            .sum()
    }
}

pub fn spectral_decompose(rho: &DensityMatrix) -> Result<SpectralDecomposition> {
    let (values, vectors) = linalg::hermitian_eigen(rho.matrix()).ok_or(Error::DecompositionFailed)?;
    if let Some(&min) = values.last() {
        if min < -DENSITY_TOL {
            return Err(DensityViolation::Negative(min).into());
        }
    }
    let mut probabilities: Vec<f64> = values
        .iter()
        .map(|&q| if q < EIGEN_CLIP { 0.0 } else { q.min(1.0) })
        .collect();
    let total: f64 = probabilities.iter().sum();
    if total <= 0.0 {
        return Err(Error::DecompositionFailed);
    }
    probabilities.iter_mut().for_each(|q| *q /= total);
    Ok(SpectralDecomposition { probabilities, vectors })
}

/// Splits `rho` into its diagonal and off-diagonal parts in the computational basis.
pub fn split_diagonal_offdiagonal(rho: &CMatrix) -> (CMatrix, CMatrix) {
    let n = rho.nrows();
    let diag = CMatrix::from_fn(n, n, |i, j| if i == j { rho[(i, j)] } else { linalg::ZERO });
    let off = CMatrix::from_fn(n, n, |i, j| if i == j { linalg::ZERO } else { rho[(i, j)] });
    (diag, off)
}

/// Bohr frequency `ω` with `[L, H] = ω L`, obtained from the least-squares
/// projection `ω = Re Tr[L^dag [L, H]] / Tr[L^dag L]`.
///
/// Fails when the residual `‖[L, H] − ω L‖_F` exceeds `tol · ‖L‖_F`.
pub fn extract_bohr_frequency(h: &Operator, l: &Operator, tol: f64) -> Result<f64> {
    if h.dim() != l.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: l.dim() });
    }
    let lm = l.matrix();
    let norm_sq = linalg::trace(&(lm.adjoint() * lm)).re;
    if norm_sq == 0.0 {
        return Err(Error::ZeroJumpOperator { channel: 0 });
    }
    let comm = linalg::commutator(lm, h.matrix());
    let omega = linalg::trace(&(lm.adjoint() * &comm)).re / norm_sq;
    let residual = linalg::frobenius(&(comm - lm * c(omega))) / norm_sq.sqrt();
    if residual > tol {
        return Err(Error::BohrConditionViolated { residual, tol });
    }
    Ok(omega)
}
