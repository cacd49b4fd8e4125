//! Built-in models: the degenerate three-level system in its activity and
//! entropy-production variants, the scalar Poisson counter, and random
//! models that satisfy the Bohr-frequency condition by construction.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, C64};
use crate::model::{ChannelSpec, LindbladModel};
use crate::operator::{DensityMatrix, Operator};

/// Basis order used by the three-level models.
pub const GROUND: usize = 0;
pub const EXCITED_1: usize = 1;
pub const EXCITED_2: usize = 2;

fn check_rates(rates: &[f64]) -> Result<()> {
    match rates.iter().position(|&g| !(g > 0.0) || !g.is_finite()) {
        Some(k) => Err(Error::InvalidArgument(format!("rate {} must be positive, got {}", k + 1, rates[k]))),
        None => Ok(()),
    }
}

fn op(m: CMatrix) -> Operator {
    Operator::new(m).expect("built-in operators are finite and square")
}

fn degenerate_hamiltonian(omega_e: f64) -> Operator {
    op((linalg::ket_bra(3, EXCITED_1, EXCITED_1) + linalg::ket_bra(3, EXCITED_2, EXCITED_2)) * c(omega_e))
}

/// `|g><e1| + |g><e2|`, the collective decay.
fn collective_decay() -> CMatrix {
    linalg::ket_bra(3, GROUND, EXCITED_1) + linalg::ket_bra(3, GROUND, EXCITED_2)
}

/// Three-level model with degenerate excited states, collective decay and
/// excitation (`L1`, `L2`) and individual decays (`L3`, `L4`).
pub fn build_da_model(omega_e: f64, rates: [f64; 4]) -> Result<LindbladModel> {
    check_rates(&rates)?;
    let [g1, g2, g3, g4] = rates;
    let specs = vec![
        ChannelSpec::new(op(collective_decay() * c(g1.sqrt()))),
        ChannelSpec::new(op(collective_decay().adjoint() * c(g2.sqrt()))),
        ChannelSpec::new(op(linalg::ket_bra(3, GROUND, EXCITED_1) * c(g3.sqrt()))),
        ChannelSpec::new(op(linalg::ket_bra(3, GROUND, EXCITED_2) * c(g4.sqrt()))),
    ];
    LindbladModel::new(degenerate_hamiltonian(omega_e), specs)
}

/// Entropy-production variant: every transition has its reverse, pairs
/// (1,2), (3,4), (5,6) with `Δs = ln(γ_forward / γ_reverse)`.
pub fn build_ep_model(omega_e: f64, rates: [f64; 6]) -> Result<LindbladModel> {
    check_rates(&rates)?;
    let [g1, g2, g3, g4, g5, g6] = rates;
    let down1 = linalg::ket_bra(3, GROUND, EXCITED_1);
    let down2 = linalg::ket_bra(3, GROUND, EXCITED_2);
    let (s12, s34, s56) = ((g1 / g2).ln(), (g3 / g4).ln(), (g5 / g6).ln());
    let specs = vec![
        ChannelSpec::paired(op(collective_decay() * c(g1.sqrt())), 1, s12),
        ChannelSpec::paired(op(collective_decay().adjoint() * c(g2.sqrt())), 0, -s12),
        ChannelSpec::paired(op(&down1 * c(g3.sqrt())), 3, s34),
        ChannelSpec::paired(op(down1.adjoint() * c(g4.sqrt())), 2, -s34),
        ChannelSpec::paired(op(&down2 * c(g5.sqrt())), 5, s56),
        ChannelSpec::paired(op(down2.adjoint() * c(g6.sqrt())), 4, -s56),
    ];
    LindbladModel::new(degenerate_hamiltonian(omega_e), specs)
}

/// One-dimensional counter: `L = √γ`, so jumps form a Poisson process of rate γ.
pub fn poisson_model(gamma: f64) -> Result<LindbladModel> {
    check_rates(&[gamma])?;
    let l = op(CMatrix::from_element(1, 1, c(gamma.sqrt())));
    LindbladModel::new(Operator::zeros(1), vec![ChannelSpec::new(l)])
}

/// Same as [`poisson_model`] but with the channel paired to itself (`Δs = 0`).
pub fn poisson_model_paired(gamma: f64) -> Result<LindbladModel> {
    check_rates(&[gamma])?;
    let l = op(CMatrix::from_element(1, 1, c(gamma.sqrt())));
    LindbladModel::new(Operator::zeros(1), vec![ChannelSpec::paired(l, 0, 0.0)])
}

fn random_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Unitary from the QR factorization of a random complex matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| random_complex(rng));
    g.qr().q()
}

/// Full-rank random state `G G^dag / Tr`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| random_complex(rng));
    let rho = &g * g.adjoint();
    let tr = linalg::trace(&rho);
    DensityMatrix::new(linalg::hermitize(&(rho / tr))).expect("Gram matrices are valid states")
}

/// Options for [`random_model`].
#[derive(Debug, Clone, Copy)]
pub struct RandomModelOptions {
    pub dim: usize,
    /// Number of independent jump operators (doubled when paired).
    pub n_operators: usize,
    /// Add a reverse partner satisfying local detailed balance to every operator.
    pub paired: bool,
    /// Rotate everything by a random unitary so `H` is not diagonal.
    pub rotate: bool,
}

impl Default for RandomModelOptions {
    fn default() -> Self {
        Self { dim: 3, n_operators: 3, paired: false, rotate: true }
    }
}

/// Random model with integer-spaced (hence degenerate) energy levels and
/// jump operators built from transitions that share one Bohr frequency.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, opts: RandomModelOptions) -> Result<LindbladModel> {
    let d = opts.dim;
    if d < 2 {
        return Err(Error::InvalidArgument("random models need dim >= 2".into()));
    }
    let quantum = rng.gen_range(0.5..2.0);
    let levels: Vec<i32> = (0..d).map(|_| rng.gen_range(0..3)).collect();
    let energies: Vec<f64> = levels.iter().map(|&n| quantum * n as f64).collect();
    let w = if opts.rotate { random_unitary(rng, d) } else { linalg::identity(d) };
    let rotate = |m: &CMatrix| &w * m * w.adjoint();

    let h = CMatrix::from_diagonal(&linalg::CVector::from_iterator(d, energies.iter().map(|&e| c(e))));
    let mut raw = Vec::new();
    for _ in 0..opts.n_operators {
        let a = rng.gen_range(0..d);
        let mut b = rng.gen_range(0..d);
        if b == a {
            b = (a + 1) % d;
        }
        let gap = levels[b] - levels[a];
        let mut l = CMatrix::zeros(d, d);
        for x in 0..d {
            for y in 0..d {
                if levels[y] - levels[x] == gap && ((x, y) == (a, b) || rng.gen_bool(0.6)) {
                    l[(x, y)] = random_complex(rng) * c(rng.gen_range(0.2..1.0));
                }
            }
        }
        raw.push(rotate(&l));
    }

    let specs = if opts.paired {
        let mut specs = Vec::with_capacity(2 * raw.len());
        for (k, l) in raw.into_iter().enumerate() {
            let ds = rng.gen_range(-2.0..2.0);
            let reverse = l.adjoint() * c((-ds / 2.0f64).exp());
            specs.push(ChannelSpec::paired(op(l), 2 * k + 1, ds));
            specs.push(ChannelSpec::paired(op(reverse), 2 * k, -ds));
        }
        specs
    } else {
        raw.into_iter().map(|l| ChannelSpec::new(op(l))).collect()
    };
    LindbladModel::new(op(linalg::hermitize(&rotate(&h))), specs)
}

/// Uniform draw from the open interval `(low, high)`.
pub fn uniform_open<R: Rng + ?Sized>(rng: &mut R, low: f64, high: f64) -> f64 {
    loop {
        let x = rng.gen_range(low..high);
        if x > low {
            return x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn da_model_bohr_frequencies() {
        let model = build_da_model(1.0, [0.3, 0.4, 0.5, 0.6]).unwrap();
        let omegas: Vec<f64> = model.channels().iter().map(|ch| ch.omega).collect();
        for (w, e) in omegas.iter().zip([1.0, -1.0, 1.0, 1.0]) {
            assert!((w - e).abs() < 1e-14, "{omegas:?}");
        }
    }

    #[test]
    fn ep_model_pairs_pass_detailed_balance() {
        let model = build_ep_model(1.0, [0.3, 0.4, 0.5, 0.6, 0.7, 0.8]).unwrap();
        for m in 0..6 {
            assert!(model.check_local_detailed_balance(m).unwrap() < 1e-12);
        }
        let ds = model.entropy_changes().unwrap();
        assert!((ds[0] - (0.3f64 / 0.4).ln()).abs() < 1e-15);
        assert_eq!(ds[1], -ds[0]);
    }

    #[test]
    fn nonpositive_rates_rejected() {
        assert!(build_da_model(1.0, [0.3, 0.0, 0.5, 0.6]).is_err());
        assert!(build_ep_model(1.0, [0.3, 0.4, -0.5, 0.6, 0.7, 0.8]).is_err());
        assert!(poisson_model(0.0).is_err());
    }

    #[test]
    fn random_models_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 0..50 {
            let opts = RandomModelOptions { dim: 2 + k % 3, paired: k % 2 == 0, ..Default::default() };
            let model = random_model(&mut rng, opts).unwrap();
            // [H, L^dag L] = 0 follows from the Bohr condition
            for ch in model.channels() {
                let ldl = ch.op.matrix().adjoint() * ch.op.matrix();
                let comm = linalg::commutator(model.hamiltonian().matrix(), &ldl);
                assert!(linalg::frobenius(&comm) < 1e-10);
            }
        }
    }
}
