//! Small dense complex helpers shared by every module.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diagonal().iter().sum()
}

/// Largest entrywise modulus of `a - a^dag`.
pub fn hermiticity_deviation(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * c(0.5)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vectorize(a: &CMatrix) -> CVector {
    CVector::from_column_slice(a.as_slice())
}

pub fn unvectorize(v: &CVector, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// Dense matrix exponential (Padé scaling and squaring).
pub fn expm(a: &CMatrix) -> CMatrix {
    a.clone().exp()
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. `None` if the iteration does not converge.
pub fn hermitian_eigen(a: &CMatrix) -> Option<(Vec<f64>, CMatrix)> {
    let eig = SymmetricEigen::try_new(hermitize(a), f64::EPSILON, 10_000)?;
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Some((values, vectors))
}

/// `Tr[L rho L^dag]` without forming the product twice.
pub fn jump_rate(l: &CMatrix, rho: &CMatrix) -> f64 {
    trace(&(l * rho * l.adjoint())).re
}

pub fn real_matrix(rows: &[Vec<f64>]) -> CMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    CMatrix::from_fn(n, m, |i, j| c(rows[i][j]))
}

/// `|a><b|` in the computational basis.
pub fn ket_bra(dim: usize, a: usize, b: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    m[(a, b)] = ONE;
    m
}

pub fn basis_vector(dim: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[k] = ONE;
    v
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectorization_matches_kron_identity() {
        // vec(A X B) = (B^T ⊗ A) vec(X)
        let a = CMatrix::from_fn(3, 3, |i, j| C64::new(i as f64 + 0.5, j as f64 - 1.0));
        let b = CMatrix::from_fn(3, 3, |i, j| C64::new((i * j) as f64, 0.3 * i as f64));
        let x = CMatrix::from_fn(3, 3, |i, j| C64::new(1.0 / (1 + i + j) as f64, 0.1));
        let lhs = vectorize(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vectorize(&x);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn expm_of_hermitian_matches_spectral_formula() {
        let h = CMatrix::from_fn(3, 3, |i, j| C64::new((i + j) as f64 * 0.3, i as f64 - j as f64));
        let h = hermitize(&h);
        let (vals, vecs) = hermitian_eigen(&h).unwrap();
        let t = 0.7;
        let diag = CMatrix::from_diagonal(&CVector::from_iterator(
            3,
            vals.iter().map(|&v| (-I * c(v * t)).exp()),
        ));
        let expected = &vecs * diag * vecs.adjoint();
        let got = expm(&(h * (-I * c(t))));
        assert!(max_abs_diff(&got, &expected) < 1e-12);
    }

    #[test]
    fn eigenvalues_are_sorted_descending() {
        let m = real_matrix(&[vec![0.1, 0.0], vec![0.0, 0.9]]);
        let (vals, _) = hermitian_eigen(&m).unwrap();
        assert!(vals[0] > vals[1]);
    }
}
