//! Dense complex linear algebra on qubit registers.
//!
//! Qubit 0 is the most significant bit of a basis index, so `|m_1 m_2 ... m_M>`
//! reads left to right as qubits `0..M`. Every other module relies on this
//! ordering.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Numerical thresholds shared by the whole crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max-norm bound on `U^dagger U - I` for the unitarity predicate.
    pub unitarity: f64,
    /// Allowed deviation of a state norm or trace from one.
    pub normalization: f64,
    /// Smallest eigenvalue accepted for a density matrix.
    pub min_eigenvalue: f64,
    /// Largest register any dense routine will allocate.
    pub max_qubits: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            unitarity: 1e-10,
            normalization: 1e-12,
            min_eigenvalue: -1e-10,
            max_qubits: 24,
        }
    }
}

pub(crate) fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Bit of `index` belonging to `qubit` in an `n`-qubit register.
#[inline]
pub fn qubit_bit(index: usize, qubit: usize, n: usize) -> usize {
    (index >> (n - 1 - qubit)) & 1
}

/// Computational basis label `|m_1 ... m_M>` of fixed width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    value: u64,
    width: u32,
}

impl BasisIndex {
    pub fn new(value: u64, width: u32) -> Result<Self> {
        if width > 64 || (width < 64 && value >> width != 0) {
            return Err(Error::BasisIndexOverflow { value, width });
        }
        Ok(Self { value, width })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    /// Bit `m_i` for 0-based position `i` (0 is the leftmost digit).
    pub fn bit(&self, i: u32) -> bool {
        assert!(i < self.width, "bit {i} outside width {}", self.width);
        (self.value >> (self.width - 1 - i)) & 1 == 1
    }
}

/// Number of set bits of a basis label.
pub fn hamming_weight(m: BasisIndex) -> u32 {
    m.value.count_ones()
}

/// Dense operator on an `n`-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    qubits: usize,
}

impl Operator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        let qubits = qubits_for_dim(matrix.nrows())?;
        Ok(Self { matrix, qubits })
    }

    pub fn from_row_slice(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Self::new(CMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(qubits: usize) -> Self {
        let dim = 1usize << qubits;
        Self {
            matrix: CMatrix::identity(dim, dim),
            qubits,
        }
    }

    pub fn from_diagonal(diag: &[C64]) -> Result<Self> {
        Self::new(CMatrix::from_diagonal(&CVector::from_column_slice(diag)))
    }

    /// Permutation operator sending basis state `j` to `perm[j]`.
    pub fn from_permutation(perm: &[usize]) -> Result<Self> {
        let dim = perm.len();
        let mut m = CMatrix::zeros(dim, dim);
        for (col, &row) in perm.iter().enumerate() {
            if row >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row,
                });
            }
            m[(row, col)] = ONE;
        }
        Self::new(m)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            qubits: self.qubits,
        }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            matrix: &self.matrix * factor,
            qubits: self.qubits,
        }
    }

    /// Tensor product `self ⊗ other`; `self` occupies the leading qubits.
    pub fn kron(&self, other: &Operator) -> Operator {
        Operator {
            matrix: self.matrix.kronecker(&other.matrix),
            qubits: self.qubits + other.qubits,
        }
    }

    pub fn try_mul(&self, rhs: &Operator) -> Result<Operator> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rhs.dim(),
            });
        }
        Ok(Operator {
            matrix: &self.matrix * &rhs.matrix,
            qubits: self.qubits,
        })
    }

    pub fn apply(&self, v: &CVector) -> Result<CVector> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(&self.matrix * v)
    }

    /// `max |(U^dagger U - I)_ij|`.
    pub fn unitarity_error(&self) -> f64 {
        let prod = self.matrix.adjoint() * &self.matrix;
        let dim = self.dim();
        let mut worst = 0.0f64;
        for r in 0..dim {
            for c in 0..dim {
                let target = if r == c { ONE } else { ZERO };
                worst = worst.max((prod[(r, c)] - target).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: &Tolerances) -> bool {
        self.unitarity_error() < tol.unitarity
    }

    pub fn require_unitary(&self, tol: &Tolerances) -> Result<()> {
        let err = self.unitarity_error();
        if err < tol.unitarity {
            Ok(())
        } else {
            Err(Error::NotUnitary(err))
        }
    }

    /// `|Tr[A^dagger B]| / (||A||_F ||B||_F)`; equals one exactly when the two
    /// operators are proportional. For unitaries this is `|Tr[A^dagger B]| / dim`.
    pub fn phase_overlap(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim(), other.dim(), "phase_overlap dimension mismatch");
        let inner = self.matrix.dotc(&other.matrix);
        let norms = self.matrix.norm() * other.matrix.norm();
        if norms == 0.0 {
            return 0.0;
        }
        inner.norm() / norms
    }

    /// Equality up to a global phase and positive scale.
    pub fn proportional_to(&self, other: &Operator, tol: f64) -> bool {
        1.0 - self.phase_overlap(other) <= tol
    }

    /// Largest entrywise difference.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Single-qubit `gate` placed on `target` of an `n`-qubit register.
    pub fn on_qubit(gate: &Operator, target: usize, n: usize) -> Result<Operator> {
        if gate.qubits != 1 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: gate.dim(),
            });
        }
        if target >= n {
            return Err(Error::QubitOutOfRange {
                index: target,
                qubits: n,
            });
        }
        let mut out = Operator::identity(0);
        for q in 0..n {
            out = if q == target {
                out.kron(gate)
            } else {
                out.kron(&Operator::identity(1))
            };
        }
        Ok(out)
    }

    /// Single-qubit `gate` on `target`, applied when `control` reads `control_value`.
    pub fn controlled(
        gate: &Operator,
        control: usize,
        target: usize,
        n: usize,
        control_value: bool,
    ) -> Result<Operator> {
        if control >= n || target >= n || control == target {
            return Err(Error::QubitOutOfRange {
                index: control.max(target),
                qubits: n,
            });
        }
        let on = Operator::on_qubit(gate, target, n)?;
        let dim = 1usize << n;
        let want = usize::from(control_value);
        let mut m = CMatrix::zeros(dim, dim);
        for col in 0..dim {
            if qubit_bit(col, control, n) == want {
                for row in 0..dim {
                    m[(row, col)] = on.matrix[(row, col)];
                }
            } else {
                m[(col, col)] = ONE;
            }
        }
        Operator::new(m)
    }
}

impl std::ops::Mul<&Operator> for &Operator {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        self.try_mul(rhs).expect("operator dimension mismatch")
    }
}

/// Single-qubit measurement projectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Projector {
    Zero,
    One,
    Plus,
    Minus,
    PlusI,
    MinusI,
}

impl Projector {
    pub const ALL: [Projector; 6] = [
        Projector::Zero,
        Projector::One,
        Projector::Plus,
        Projector::Minus,
        Projector::PlusI,
        Projector::MinusI,
    ];

    pub fn ket(self) -> [C64; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Projector::Zero => [ONE, ZERO],
            Projector::One => [ZERO, ONE],
            Projector::Plus => [C64::new(h, 0.0), C64::new(h, 0.0)],
            Projector::Minus => [C64::new(h, 0.0), C64::new(-h, 0.0)],
            Projector::PlusI => [C64::new(h, 0.0), C64::new(0.0, h)],
            Projector::MinusI => [C64::new(h, 0.0), C64::new(0.0, -h)],
        }
    }

    /// The orthogonal partner of this projector.
    pub fn complement(self) -> Projector {
        match self {
            Projector::Zero => Projector::One,
            Projector::One => Projector::Zero,
            Projector::Plus => Projector::Minus,
            Projector::Minus => Projector::Plus,
            Projector::PlusI => Projector::MinusI,
            Projector::MinusI => Projector::PlusI,
        }
    }

    pub fn operator(self) -> Operator {
        let k = self.ket();
        let mut m = CMatrix::zeros(2, 2);
        for r in 0..2 {
            for c in 0..2 {
                m[(r, c)] = k[r] * k[c].conj();
            }
        }
        Operator { matrix: m, qubits: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Pure,
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Pure(CVector),
    Mixed(CMatrix),
}

/// Pure or mixed state of a qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    repr: Repr,
    qubits: usize,
}

impl QuantumState {
    pub fn pure(vector: CVector) -> Result<Self> {
        Self::pure_with(vector, &Tolerances::default())
    }

    pub fn pure_with(vector: CVector, tol: &Tolerances) -> Result<Self> {
        let qubits = qubits_for_dim(vector.len())?;
        let dev = (vector.norm() - 1.0).abs();
        if dev > tol.normalization {
            return Err(Error::NotNormalized(dev));
        }
        Ok(Self {
            repr: Repr::Pure(vector),
            qubits,
        })
    }

    /// Normalizes `vector` before wrapping it.
    pub fn pure_normalized(vector: CVector) -> Result<Self> {
        let n = vector.norm();
        if n == 0.0 {
            return Err(Error::NotNormalized(1.0));
        }
        Self::pure(vector / C64::new(n, 0.0))
    }

    pub fn from_amplitudes(amps: &[C64]) -> Result<Self> {
        Self::pure(CVector::from_column_slice(amps))
    }

    pub fn mixed(rho: CMatrix) -> Result<Self> {
        Self::mixed_with(rho, &Tolerances::default())
    }

    pub fn mixed_with(rho: CMatrix, tol: &Tolerances) -> Result<Self> {
        if rho.nrows() != rho.ncols() {
            return Err(Error::NotSquare {
                rows: rho.nrows(),
                cols: rho.ncols(),
            });
        }
        let qubits = qubits_for_dim(rho.nrows())?;
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > tol.normalization || tr.im.abs() > tol.normalization {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let herm = (&rho - rho.adjoint()).camax();
        if herm > tol.normalization.max(1e-12) * 10.0 {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (deviation {herm:e})"
            )));
        }
        let min_eig = min_hermitian_eigenvalue(&rho);
        if min_eig < tol.min_eigenvalue {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self {
            repr: Repr::Mixed(rho),
            qubits,
        })
    }

    pub fn basis(index: usize, qubits: usize) -> Result<Self> {
        let dim = 1usize << qubits;
        if index >= dim {
            return Err(Error::BasisIndexOverflow {
                value: index as u64,
                width: qubits as u32,
            });
        }
        let mut v = CVector::zeros(dim);
        v[index] = ONE;
        Ok(Self {
            repr: Repr::Pure(v),
            qubits,
        })
    }

    /// Product of single-qubit projector kets, qubit 0 first.
    pub fn product(kets: &[Projector]) -> Self {
        let mut v = CVector::from_element(1, ONE);
        for p in kets {
            let k = p.ket();
            v = v.kronecker(&CVector::from_column_slice(&k));
        }
        Self {
            repr: Repr::Pure(v),
            qubits: kets.len(),
        }
    }

    pub fn kind(&self) -> StateKind {
        match self.repr {
            Repr::Pure(_) => StateKind::Pure,
            Repr::Mixed(_) => StateKind::Mixed,
        }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.qubits
    }

    pub fn vector(&self) -> Option<&CVector> {
        match &self.repr {
            Repr::Pure(v) => Some(v),
            Repr::Mixed(_) => None,
        }
    }

    pub fn density_matrix(&self) -> CMatrix {
        match &self.repr {
            Repr::Pure(v) => v * v.adjoint(),
            Repr::Mixed(rho) => rho.clone(),
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::Pure(v) => v.norm_squared(),
            Repr::Mixed(rho) => rho.trace().re,
        }
    }

    pub fn tensor(&self, other: &QuantumState) -> QuantumState {
        let repr = match (&self.repr, &other.repr) {
            (Repr::Pure(a), Repr::Pure(b)) => Repr::Pure(a.kronecker(b)),
            _ => Repr::Mixed(self.density_matrix().kronecker(&other.density_matrix())),
        };
        QuantumState {
            repr,
            qubits: self.qubits + other.qubits,
        }
    }

    /// `U |psi>` or `U rho U^dagger`.
    pub fn evolve(&self, op: &Operator) -> Result<QuantumState> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: op.dim(),
            });
        }
        let repr = match &self.repr {
            Repr::Pure(v) => Repr::Pure(op.matrix() * v),
            Repr::Mixed(rho) => Repr::Mixed(op.matrix() * rho * op.matrix().adjoint()),
        };
        Ok(QuantumState {
            repr,
            qubits: self.qubits,
        })
    }

    /// `<psi| rho |psi>` against a pure reference state.
    pub fn fidelity_with_pure(&self, psi: &CVector) -> f64 {
        match &self.repr {
            Repr::Pure(v) => psi.dotc(v).norm_sqr(),
            Repr::Mixed(rho) => psi.dotc(&(rho * psi)).re,
        }
    }

    /// Wraps a density matrix produced internally without re-validating it.
    pub(crate) fn from_density_unchecked(rho: CMatrix) -> QuantumState {
        let qubits = rho.nrows().trailing_zeros() as usize;
        QuantumState {
            repr: Repr::Mixed(rho),
            qubits,
        }
    }
}

pub(crate) fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Eigenvalues of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(herm).eigenvalues.iter().copied().collect()
}

/// Reduced density matrix on the qubits listed in `keep` (in register order).
pub fn partial_trace(state: &QuantumState, keep: &[usize]) -> Result<QuantumState> {
    if keep.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    let n = state.qubits();
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if let Some(&bad) = kept.iter().find(|&&q| q >= n) {
        return Err(Error::QubitOutOfRange {
            index: bad,
            qubits: n,
        });
    }
    let traced: Vec<usize> = (0..n).filter(|q| !kept.contains(q)).collect();
    let compose = |k: usize, t: usize| -> usize {
        let mut idx = 0usize;
        for (pos, &q) in kept.iter().enumerate() {
            let bit = (k >> (kept.len() - 1 - pos)) & 1;
            idx |= bit << (n - 1 - q);
        }
        for (pos, &q) in traced.iter().enumerate() {
            let bit = (t >> (traced.len() - 1 - pos)) & 1;
            idx |= bit << (n - 1 - q);
        }
        idx
    };
    let kd = 1usize << kept.len();
    let td = 1usize << traced.len();
    let mut out = CMatrix::zeros(kd, kd);
    match &state.repr {
        Repr::Pure(v) => {
            for t in 0..td {
                for a in 0..kd {
                    let va = v[compose(a, t)];
                    if va == ZERO {
                        continue;
                    }
                    for b in 0..kd {
                        out[(a, b)] += va * v[compose(b, t)].conj();
                    }
                }
            }
        }
        Repr::Mixed(rho) => {
            for t in 0..td {
                for a in 0..kd {
                    let ia = compose(a, t);
                    for b in 0..kd {
                        out[(a, b)] += rho[(ia, compose(b, t))];
                    }
                }
            }
        }
    }
    Ok(QuantumState::from_density_unchecked(out))
}

/// Projects `qubit` onto a single-qubit state and renormalizes the result.
///
/// The returned state still spans the full register with the measured qubit
/// collapsed onto the projector.
pub fn project_and_renormalize(
    state: &QuantumState,
    qubit: usize,
    projector: Projector,
) -> Result<(QuantumState, f64)> {
    let n = state.qubits();
    if qubit >= n {
        return Err(Error::QubitOutOfRange { index: qubit, qubits: n });
    }
    let p = Operator::on_qubit(&projector.operator(), qubit, n)?;
    match &state.repr {
        Repr::Pure(v) => {
            let w = p.matrix() * v;
            let prob = w.norm_squared();
            if prob <= 1e-14 {
                return Err(Error::ImpossibleOutcome);
            }
            let s = C64::new(prob.sqrt(), 0.0);
            Ok((
                QuantumState {
                    repr: Repr::Pure(w / s),
                    qubits: n,
                },
                prob.min(1.0),
            ))
        }
        Repr::Mixed(rho) => {
            let w = p.matrix() * rho * p.matrix();
            let prob = w.trace().re;
            if prob <= 1e-14 {
                return Err(Error::ImpossibleOutcome);
            }
            Ok((
                QuantumState::from_density_unchecked(w / C64::new(prob, 0.0)),
                prob.min(1.0),
            ))
        }
    }
}

/// Haar-random unitary on `qubits` qubits (QR of a complex Ginibre matrix).
pub fn haar_unitary<R: Rng + ?Sized>(qubits: usize, rng: &mut R) -> Operator {
    let dim = 1usize << qubits;
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..dim {
        let d = r[(c, c)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for row in 0..dim {
            q[(row, c)] *= phase;
        }
    }
    Operator { matrix: q, qubits }
}

/// Haar-random pure state.
pub fn random_pure_state<R: Rng + ?Sized>(qubits: usize, rng: &mut R) -> QuantumState {
    let dim = 1usize << qubits;
    let v = CVector::from_fn(dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    QuantumState::pure_normalized(v).expect("non-zero gaussian vector")
}
