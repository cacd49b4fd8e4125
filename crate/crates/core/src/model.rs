//! Lindblad models: a Hamiltonian plus monitored jump channels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::operator::{extract_bohr_frequency, Operator, BOHR_TOL};

/// Hermiticity tolerance for the Hamiltonian, relative to `max(1, ‖H‖_F)`.
pub const HAMILTONIAN_TOL: f64 = 1e-10;

/// One monitored decay channel.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpChannel {
    pub op: Operator,
    /// Bohr frequency, derived from the Hamiltonian; zero for a null operator.
    pub omega: f64,
    /// Environment entropy change per jump.
    pub ds: Option<f64>,
    /// Index of the reverse channel.
    pub partner: Option<usize>,
}

/// What a caller supplies for each channel; the Bohr frequency is derived.
#[derive(Debug, Clone)]
pub struct ChannelSpec {
    pub op: Operator,
    pub partner: Option<usize>,
    pub ds: Option<f64>,
}

impl ChannelSpec {
    pub fn new(op: Operator) -> Self {
        Self { op, partner: None, ds: None }
    }

    pub fn paired(op: Operator, partner: usize, ds: f64) -> Self {
        Self { op, partner: Some(partner), ds: Some(ds) }
    }
}

/// Hamiltonian and jump channels satisfying `[L_m, H] = ω_m L_m`.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    hamiltonian: Operator,
    channels: Vec<JumpChannel>,
    bohr_tol: f64,
}

impl LindbladModel {
    pub fn new(hamiltonian: Operator, specs: Vec<ChannelSpec>) -> Result<Self> {
        Self::with_tolerance(hamiltonian, specs, BOHR_TOL)
    }

    pub fn with_tolerance(hamiltonian: Operator, specs: Vec<ChannelSpec>, bohr_tol: f64) -> Result<Self> {
        let dim = hamiltonian.dim();
        let deviation = linalg::hermiticity_deviation(hamiltonian.matrix());
        if deviation > HAMILTONIAN_TOL * hamiltonian.frobenius().max(1.0) {
            return Err(Error::NonHermitianHamiltonian { deviation });
        }
        let n = specs.len();
        let mut channels = Vec::with_capacity(n);
        for (m, spec) in specs.into_iter().enumerate() {
            if spec.op.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: spec.op.dim() });
            }
            let omega = if spec.op.frobenius() == 0.0 {
                0.0
            } else {
                extract_bohr_frequency(&hamiltonian, &spec.op, bohr_tol)?
            };
            if let Some(p) = spec.partner {
                if p >= n {
                    return Err(Error::InvalidArgument(format!("channel {m}: partner {p} out of range")));
                }
            }
            channels.push(JumpChannel { op: spec.op, omega, ds: spec.ds, partner: spec.partner });
        }
        for m in 0..n {
            if let Some(p) = channels[m].partner {
                if channels[p].partner != Some(m) {
                    return Err(Error::DetailedBalance {
                        channel: m,
                        reason: format!("partner {p} does not point back"),
                    });
                }
            }
        }
        if channels.iter().any(|ch| ch.ds.is_some()) {
            for m in 0..n {
                if channels[m].partner.is_some() {
                    check_local_detailed_balance(&channels, m, bohr_tol)?;
                }
            }
        }
        Ok(Self { hamiltonian, channels, bohr_tol })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[JumpChannel] {
        &self.channels
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn bohr_tolerance(&self) -> f64 {
        self.bohr_tol
    }

    /// The twin model with the Hamiltonian removed.
    pub fn incoherent(&self) -> Self {
        Self {
            hamiltonian: Operator::zeros(self.dim()),
            channels: self.channels.iter().map(|ch| JumpChannel { omega: 0.0, ..ch.clone() }).collect(),
            bohr_tol: self.bohr_tol,
        }
    }

    /// `Σ_m L_m^dag L_m`.
    pub fn decay_operator(&self) -> CMatrix {
        let d = self.dim();
        self.channels
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, ch| acc + ch.op.matrix().adjoint() * ch.op.matrix())
    }

    /// `H − (i/2) Σ_m L_m^dag L_m`.
    pub fn effective_hamiltonian(&self) -> CMatrix {
        self.hamiltonian.matrix() - self.decay_operator() * (linalg::I * c(0.5))
    }

    /// Entropy changes of every channel, or the first channel missing one.
    pub fn entropy_changes(&self) -> Result<Vec<f64>> {
        self.channels
            .iter()
            .enumerate()
            .map(|(m, ch)| ch.ds.ok_or(Error::MissingEntropyChange { channel: m }))
            .collect()
    }

    /// Partner indices of every channel, or the first unpaired channel.
    pub fn partners(&self) -> Result<Vec<usize>> {
        self.channels
            .iter()
            .enumerate()
            .map(|(m, ch)| {
                ch.partner.ok_or(Error::DetailedBalance { channel: m, reason: "missing partner".into() })
            })
            .collect()
    }

    pub fn check_local_detailed_balance(&self, m: usize) -> Result<f64> {
        check_local_detailed_balance(&self.channels, m, self.bohr_tol)
    }

    pub fn to_json(&self) -> ModelJson {
        ModelJson {
            dim: self.dim(),
            hamiltonian: MatrixJson::from(self.hamiltonian.matrix()),
            channels: self
                .channels
                .iter()
                .map(|ch| ChannelJson { op: MatrixJson::from(ch.op.matrix()), partner: ch.partner, ds: ch.ds })
                .collect(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str::<ModelJson>(s)?.build()
    }
}

/// Checks `L_m = e^{Δs_m/2} L_{m'}^dag` and `Δs_{m'} = −Δs_m`; returns the
/// relative Frobenius residual.
pub fn check_local_detailed_balance(channels: &[JumpChannel], m: usize, tol: f64) -> Result<f64> {
    let fail = |reason: String| Error::DetailedBalance { channel: m, reason };
    let ch = channels.get(m).ok_or_else(|| Error::InvalidArgument(format!("no channel {m}")))?;
    let p = ch.partner.ok_or_else(|| fail("missing partner".into()))?;
    let partner = channels.get(p).ok_or_else(|| fail(format!("partner {p} out of range")))?;
    let ds = ch.ds.ok_or(Error::MissingEntropyChange { channel: m })?;
    let ds_p = partner.ds.ok_or(Error::MissingEntropyChange { channel: p })?;
    if (ds + ds_p).abs() > 1e-12 * ds.abs().max(1.0) {
        return Err(fail(format!("entropy changes {ds} and {ds_p} are not opposite")));
    }
    let expected = partner.op.matrix().adjoint() * c((ds / 2.0).exp());
    let scale = ch.op.frobenius().max(f64::MIN_POSITIVE);
    let residual = linalg::frobenius(&(ch.op.matrix() - expected)) / scale;
    if residual > tol || (ch.op.frobenius() == 0.0 && partner.op.frobenius() != 0.0) {
        return Err(fail(format!("operator mismatch, relative residual {residual:.3e}")));
    }
    Ok(residual)
}

/// Real and imaginary parts as nested row arrays.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl From<&CMatrix> for MatrixJson {
    fn from(m: &CMatrix) -> Self {
        let rows = |f: fn(&linalg::C64) -> f64| {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect::<Vec<Vec<f64>>>()
        };
        Self { re: rows(|z| z.re), im: Some(rows(|z| z.im)) }
    }
}

impl MatrixJson {
    pub fn to_matrix(&self, dim: usize) -> Result<CMatrix> {
        let check = |rows: &Vec<Vec<f64>>| -> Result<()> {
            if rows.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: rows.len() });
            }
            for r in rows {
                if r.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: r.len() });
                }
            }
            Ok(())
        };
        check(&self.re)?;
        if let Some(im) = &self.im {
            check(im)?;
        }
        Ok(CMatrix::from_fn(dim, dim, |i, j| {
            let im = self.im.as_ref().map_or(0.0, |im| im[i][j]);
            linalg::C64::new(self.re[i][j], im)
        }))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChannelJson {
    #[serde(rename = "L")]
    pub op: MatrixJson,
    #[serde(default)]
    pub partner: Option<usize>,
    #[serde(default)]
    pub ds: Option<f64>,
}

/// On-disk model description. Bohr frequencies are never part of it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelJson {
    pub dim: usize,
    #[serde(rename = "H")]
    pub hamiltonian: MatrixJson,
    pub channels: Vec<ChannelJson>,
}

impl ModelJson {
    pub fn build(&self) -> Result<LindbladModel> {
        if self.dim == 0 {
            return Err(Error::NotSquare { rows: 0, cols: 0 });
        }
        let h = Operator::new(self.hamiltonian.to_matrix(self.dim)?)?;
        let specs = self
            .channels
            .iter()
            .map(|ch| {
                Ok(ChannelSpec { op: Operator::new(ch.op.to_matrix(self.dim)?)?, partner: ch.partner, ds: ch.ds })
            })
            .collect::<Result<Vec<_>>>()?;
        LindbladModel::new(h, specs)
    }
}
