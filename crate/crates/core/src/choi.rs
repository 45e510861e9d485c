//! Choi–Jamiolkowski representation of channels.
//!
//! A channel `R` on `n` qubits is stored as `chi = (I ⊗ R)(|Phi><Phi|)` where
//! `|Phi> = d^{-1/2} sum_m |m>|m>` and `d = 2^n`. The first (most significant)
//! register is the untouched reference, the second one carries the channel.
//! With this convention a trace-preserving channel has `Tr chi = 1`, and a
//! postselected (trace-decreasing) one has `Tr chi` equal to its success
//! probability on the maximally mixed input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{
    hermitian_eigenvalues, qubits_for_dim, CMatrix, CVector, Operator, QuantumState, Tolerances,
    C64, ZERO,
};

/// Text stored alongside every exported matrix.
pub const CHOI_CONVENTION: &str =
    "chi = (I ⊗ R)(|Phi><Phi|), |Phi> = d^-1/2 sum_m |m>|m>; reference register first (row/col index = m_ref * d + m_out), qubit 0 most significant";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Rescaled so that `Tr chi = 1`.
    TraceOne,
    /// Rescaled so that `Tr chi = d` (unnormalized `|Phi>`).
    TraceDim,
    /// Whatever the construction produced, e.g. a postselected channel.
    Raw,
}

/// Choi matrix of an `n`-qubit channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessMatrix {
    chi: CMatrix,
    qubits: usize,
    normalization: Normalization,
}

impl ProcessMatrix {
    pub fn new(chi: CMatrix, normalization: Normalization) -> Result<Self> {
        if chi.nrows() != chi.ncols() {
            return Err(Error::NotSquare {
                rows: chi.nrows(),
                cols: chi.ncols(),
            });
        }
        let total = qubits_for_dim(chi.nrows())?;
        if total % 2 != 0 {
            return Err(Error::DimensionMismatch {
                expected: 1 << (total + 1),
                found: chi.nrows(),
            });
        }
        let herm = (&chi - chi.adjoint()).camax();
        let scale = chi.camax().max(1.0);
        if herm > 1e-10 * scale {
            return Err(Error::InvalidDensityMatrix(format!(
                "process matrix not Hermitian (deviation {herm:e})"
            )));
        }
        Ok(Self {
            chi,
            qubits: total / 2,
            normalization,
        })
    }

    pub(crate) fn from_parts_unchecked(chi: CMatrix, normalization: Normalization) -> Self {
        let qubits = chi.nrows().trailing_zeros() as usize / 2;
        Self {
            chi,
            qubits,
            normalization,
        }
    }

    /// Channel qubit count `n` (the matrix is `4^n x 4^n`).
    pub fn qubits(&self) -> usize {
        self.qubits
    }

    /// Hilbert-space dimension `d = 2^n` of the channel input.
    pub fn channel_dim(&self) -> usize {
        1usize << self.qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.chi
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn trace(&self) -> f64 {
        self.chi.trace().re
    }

    /// Copy rescaled to `Tr chi = 1`.
    pub fn normalized(&self) -> Result<ProcessMatrix> {
        let tr = self.trace();
        if tr <= 0.0 {
            return Err(Error::NonPositiveTrace(tr));
        }
        Ok(ProcessMatrix {
            chi: &self.chi / C64::new(tr, 0.0),
            qubits: self.qubits,
            normalization: Normalization::TraceOne,
        })
    }

    pub fn scaled(&self, factor: f64) -> ProcessMatrix {
        ProcessMatrix {
            chi: &self.chi * C64::new(factor, 0.0),
            qubits: self.qubits,
            normalization: Normalization::Raw,
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.chi)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.chi - self.chi.adjoint()).camax()
    }

    /// Applies a phase-damping factor to coherences of one output qubit.
    ///
    /// Entries whose output-register bit for `qubit` differs between row and
    /// column are multiplied by `factor`. This is the Choi-level image of
    /// composing the channel with a dephasing channel on that qubit.
    pub fn dephase_output(&self, qubit: usize, factor: f64) -> Result<ProcessMatrix> {
        if qubit >= self.qubits {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                qubits: self.qubits,
            });
        }
        let n = 2 * self.qubits;
        let pos = n - 1 - (self.qubits + qubit);
        let mut chi = self.chi.clone();
        let dim = chi.nrows();
        for r in 0..dim {
            for c in 0..dim {
                if ((r >> pos) & 1) != ((c >> pos) & 1) {
                    chi[(r, c)] *= factor;
                }
            }
        }
        Ok(ProcessMatrix {
            chi,
            qubits: self.qubits,
            normalization: self.normalization,
        })
    }

    pub fn to_record(&self) -> ProcessMatrixRecord {
        let dim = self.chi.nrows();
        let real = (0..dim)
            .map(|r| (0..dim).map(|c| self.chi[(r, c)].re).collect())
            .collect();
        let imag = (0..dim)
            .map(|r| (0..dim).map(|c| self.chi[(r, c)].im).collect())
            .collect();
        ProcessMatrixRecord {
            convention: CHOI_CONVENTION.to_string(),
            qubits: self.qubits,
            normalization: self.normalization,
            trace: self.trace(),
            real,
            imag,
        }
    }

    pub fn from_record(rec: &ProcessMatrixRecord) -> Result<ProcessMatrix> {
        let dim = rec.real.len();
        if rec.imag.len() != dim
            || rec.real.iter().chain(rec.imag.iter()).any(|row| row.len() != dim)
        {
            return Err(Error::InvalidParameter(
                "ragged process matrix record".into(),
            ));
        }
        let chi = CMatrix::from_fn(dim, dim, |r, c| C64::new(rec.real[r][c], rec.imag[r][c]));
        let pm = ProcessMatrix::new(chi, rec.normalization)?;
        if pm.qubits != rec.qubits {
            return Err(Error::DimensionMismatch {
                expected: 1 << (2 * rec.qubits),
                found: dim,
            });
        }
        Ok(pm)
    }
}

/// JSON form of a process matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessMatrixRecord {
    pub convention: String,
    pub qubits: usize,
    pub normalization: Normalization,
    pub trace: f64,
    pub real: Vec<Vec<f64>>,
    pub imag: Vec<Vec<f64>>,
}

fn choi_vector(op: &Operator) -> CVector {
    let d = op.dim();
    let s = 1.0 / (d as f64).sqrt();
    let m = op.matrix();
    let mut v = CVector::zeros(d * d);
    for reference in 0..d {
        for out in 0..d {
            v[reference * d + out] = m[(out, reference)] * s;
        }
    }
    v
}

/// `|Phi_U> = (I ⊗ U)|Phi>`.
pub fn choi_state(u: &Operator) -> Result<QuantumState> {
    u.require_unitary(&Tolerances::default())?;
    QuantumState::pure(choi_vector(u))
}

/// `|Tr[U2^dagger U1]|^2 / d^2`.
pub fn gate_fidelity(u1: &Operator, u2: &Operator) -> Result<f64> {
    if u1.dim() != u2.dim() {
        return Err(Error::DimensionMismatch {
            expected: u1.dim(),
            found: u2.dim(),
        });
    }
    let d = u1.dim() as f64;
    let tr = u2.matrix().dotc(u1.matrix());
    Ok((tr.norm_sqr() / (d * d)).min(1.0))
}

/// `|<Phi_U1|Phi_U2>|^2`, the same quantity as [`gate_fidelity`] evaluated
/// through the Choi states.
pub fn choi_overlap_fidelity(u1: &Operator, u2: &Operator) -> Result<f64> {
    if u1.dim() != u2.dim() {
        return Err(Error::DimensionMismatch {
            expected: u1.dim(),
            found: u2.dim(),
        });
    }
    Ok(choi_vector(u1).dotc(&choi_vector(u2)).norm_sqr())
}

/// `<Phi_U| chi |Phi_U> / Tr chi`.
pub fn process_fidelity(chi: &ProcessMatrix, u: &Operator) -> Result<f64> {
    if chi.channel_dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: chi.channel_dim(),
            found: u.dim(),
        });
    }
    let tr = chi.trace();
    if tr <= 0.0 {
        return Err(Error::NonPositiveTrace(tr));
    }
    let v = choi_vector(u);
    Ok(v.dotc(&(chi.matrix() * &v)).re / tr)
}

/// Same as [`process_fidelity`] but straight from Kraus operators, skipping
/// the Choi matrix: `sum_k |Tr[U^dagger K_k]|^2 / d^2` divided by the Choi trace.
pub fn kraus_process_fidelity(kraus: &[Operator], u: &Operator) -> Result<f64> {
    let d = u.dim() as f64;
    let mut overlap = 0.0;
    let mut trace = 0.0;
    for k in kraus {
        if k.dim() != u.dim() {
            return Err(Error::DimensionMismatch {
                expected: u.dim(),
                found: k.dim(),
            });
        }
        overlap += u.matrix().dotc(k.matrix()).norm_sqr() / (d * d);
        trace += k.matrix().norm_squared() / d;
    }
    if trace <= 0.0 {
        return Err(Error::NonPositiveTrace(trace));
    }
    Ok(overlap / trace)
}

/// `R(rho) = d Tr_ref[chi (rho^T ⊗ I)]` without any renormalization.
pub fn apply_channel_matrix(chi: &ProcessMatrix, rho: &CMatrix) -> Result<CMatrix> {
    let d = chi.channel_dim();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho.nrows(),
        });
    }
    let m = chi.matrix();
    let mut out = CMatrix::zeros(d, d);
    // out[o1,o2] = d * sum_{a,b} rho[a,b] chi[(a,o1),(b,o2)]
    for a in 0..d {
        for b in 0..d {
            let w = rho[(a, b)];
            if w == ZERO {
                continue;
            }
            for o1 in 0..d {
                for o2 in 0..d {
                    out[(o1, o2)] += w * m[(a * d + o1, b * d + o2)];
                }
            }
        }
    }
    Ok(out * C64::new(d as f64, 0.0))
}

/// Applies the channel and returns the renormalized output state together
/// with the output trace (the success probability for postselected maps).
pub fn apply_channel(chi: &ProcessMatrix, state: &QuantumState) -> Result<(QuantumState, f64)> {
    let out = apply_channel_matrix(chi, &state.density_matrix())?;
    let tr = out.trace().re;
    if tr <= 1e-15 {
        return Err(Error::ImpossibleOutcome);
    }
    Ok((
        QuantumState::from_density_unchecked(out / C64::new(tr, 0.0)),
        tr,
    ))
}

/// `chi = sum_k (I ⊗ K_k)|Phi><Phi|(I ⊗ K_k)^dagger`, left unnormalized.
pub fn choi_from_kraus(operators: &[Operator]) -> Result<ProcessMatrix> {
    let first = operators
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty Kraus list".into()))?;
    let d = first.dim();
    let mut chi = CMatrix::zeros(d * d, d * d);
    for k in operators {
        if k.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: k.dim(),
            });
        }
        let v = choi_vector(k);
        chi += &v * v.adjoint();
    }
    Ok(ProcessMatrix::from_parts_unchecked(chi, Normalization::Raw))
}

/// Trace-one Choi matrix of a unitary.
pub fn choi_of_unitary(u: &Operator) -> ProcessMatrix {
    let v = choi_vector(u);
    ProcessMatrix::from_parts_unchecked(&v * v.adjoint(), Normalization::TraceOne)
}
