//! N→M superreplication of phase gates.
//!
//! An `M`-qubit signal register `A` and an `N`-qubit auxiliary register `B`
//! share one `(M+N)`-qubit index `m << N | n`, so `A` occupies the leading
//! qubits. The imprinting permutation `V` writes a Hamming-weight dependent
//! string into `B`, the `N` phase gates act on `B`, and a second `V` clears
//! `B` again.

use crate::choi::gate_fidelity;
use crate::error::{Error, Result};
use crate::gates::{phase_gate, PhaseAngle};
use crate::qmat::{CMatrix, Operator, Tolerances, C64, ONE};

/// Largest register for which dense operators are materialized.
pub const DENSE_OPERATOR_MAX_QUBITS: usize = 14;

/// Largest `M` accepted by [`dense_trace_fidelity`].
pub const DENSE_TRACE_MAX_REPLICAS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicationSpec {
    copies: usize,
    replicas: usize,
}

impl ReplicationSpec {
    /// `copies` uses of the gate (`N`) replicated onto `replicas` qubits (`M`).
    pub fn new(copies: usize, replicas: usize) -> Result<Self> {
        if copies == 0 || replicas == 0 {
            return Err(Error::InvalidParameter(format!(
                "N and M must be positive (got N={copies}, M={replicas})"
            )));
        }
        Ok(Self { copies, replicas })
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn total_qubits(&self) -> usize {
        self.copies + self.replicas
    }

    /// `⌈(M−N)/2⌉`; negative when `N > M`.
    pub fn m_min(&self) -> i64 {
        ceil_half(self.replicas as i64 - self.copies as i64)
    }

    /// `⌈(M+N)/2⌉`.
    pub fn m_max(&self) -> i64 {
        ceil_half((self.replicas + self.copies) as i64)
    }

    /// Multiple of `φ` applied to a basis state of Hamming weight `w`.
    pub fn phase_multiple(&self, w: usize) -> i64 {
        let w = w as i64;
        if w < self.m_min() {
            0
        } else if w < self.m_max() {
            w - self.m_min()
        } else {
            self.copies as i64
        }
    }

    /// `f(w)` for every weight `w = 0..=M`.
    pub fn phase_profile(&self) -> Vec<i64> {
        (0..=self.replicas).map(|w| self.phase_multiple(w)).collect()
    }

    /// `k(m)`: the auxiliary string written for a signal state of weight `w`.
    /// The first `f(w)` auxiliary qubits are set.
    pub fn imprint(&self, w: usize) -> u64 {
        let ones = self.phase_multiple(w) as u32;
        let n = self.copies as u32;
        if ones == 0 {
            0
        } else {
            ((1u64 << ones) - 1) << (n - ones)
        }
    }
}

fn ceil_half(x: i64) -> i64 {
    x.div_euclid(2) + x.rem_euclid(2)
}

/// The imprinting unitary `V|m>|n> = |m>|n ⊕ k(m)>` as a permutation of
/// basis indices; `perm[j]` is the image of basis state `j`.
pub fn build_v_permutation(spec: &ReplicationSpec, tol: &Tolerances) -> Result<Vec<usize>> {
    let total = spec.total_qubits();
    if total > tol.max_qubits {
        return Err(Error::RegisterCap {
            requested: total,
            cap: tol.max_qubits,
        });
    }
    let n = spec.copies;
    let aux_mask = (1usize << n) - 1;
    let kmap: Vec<u64> = (0..=spec.replicas).map(|w| spec.imprint(w)).collect();
    Ok((0..1usize << total)
        .map(|idx| {
            let m = idx >> n;
            let k = kmap[m.count_ones() as usize] as usize;
            (m << n) | ((idx & aux_mask) ^ k)
        })
        .collect())
}

/// Dense form of [`build_v_permutation`].
pub fn build_v(spec: &ReplicationSpec, tol: &Tolerances) -> Result<Operator> {
    let cap = tol.max_qubits.min(DENSE_OPERATOR_MAX_QUBITS);
    if spec.total_qubits() > cap {
        return Err(Error::RegisterCap {
            requested: spec.total_qubits(),
            cap,
        });
    }
    Operator::from_permutation(&build_v_permutation(spec, tol)?)
}

/// Diagonal of the induced map on `A`: `e^{i f(|m|) φ}` at index `m`.
pub fn replicated_diagonal(spec: &ReplicationSpec, phi: PhaseAngle) -> Vec<C64> {
    let phases: Vec<C64> = spec
        .phase_profile()
        .into_iter()
        .map(|f| C64::from_polar(1.0, f as f64 * phi.radians()))
        .collect();
    (0..1usize << spec.replicas)
        .map(|m| phases[m.count_ones() as usize])
        .collect()
}

/// The induced `M`-qubit diagonal unitary.
pub fn replicated_map(spec: &ReplicationSpec, phi: PhaseAngle) -> Result<Operator> {
    if spec.replicas > DENSE_OPERATOR_MAX_QUBITS {
        return Err(Error::RegisterCap {
            requested: spec.replicas,
            cap: DENSE_OPERATOR_MAX_QUBITS,
        });
    }
    Operator::from_diagonal(&replicated_diagonal(spec, phi))
}

/// `V (I_A ⊗ U(φ)^{⊗N}) V` restricted to the auxiliary `|0>` sector,
/// evaluated exactly by composing the permutation with the diagonal phase
/// layer column by column. Entry `m` holds the row index and value of the
/// single non-zero entry in column `m`. Any amplitude that leaves the sector
/// is an error.
pub fn sandwich_sector_columns(
    spec: &ReplicationSpec,
    phi: PhaseAngle,
    tol: &Tolerances,
) -> Result<Vec<(usize, C64)>> {
    let perm = build_v_permutation(spec, tol)?;
    let n = spec.copies;
    let aux_mask = (1usize << n) - 1;
    (0..1usize << spec.replicas)
        .map(|m| {
            let mid = perm[m << n];
            let phase = C64::from_polar(1.0, (mid & aux_mask).count_ones() as f64 * phi.radians());
            let end = perm[mid];
            if end & aux_mask != 0 {
                return Err(Error::AncillaEntangled(0.0));
            }
            Ok((end >> n, phase))
        })
        .collect()
}

/// Matrix form of [`sandwich_sector_columns`].
pub fn sandwich_sector(
    spec: &ReplicationSpec,
    phi: PhaseAngle,
    tol: &Tolerances,
) -> Result<CMatrix> {
    if spec.replicas > DENSE_OPERATOR_MAX_QUBITS {
        return Err(Error::RegisterCap {
            requested: spec.replicas,
            cap: DENSE_OPERATOR_MAX_QUBITS,
        });
    }
    let cols = sandwich_sector_columns(spec, phi, tol)?;
    let dim = cols.len();
    let mut out = CMatrix::zeros(dim, dim);
    for (m, (row, value)) in cols.into_iter().enumerate() {
        out[(row, m)] = value;
    }
    Ok(out)
}

/// Dense `(M+N)`-qubit product `V (I ⊗ U^{⊗N}) V` for small registers.
pub fn dense_sandwich(spec: &ReplicationSpec, phi: PhaseAngle, tol: &Tolerances) -> Result<Operator> {
    let v = build_v(spec, tol)?;
    let u = phase_gate(phi);
    let mut layer = Operator::identity(spec.replicas);
    for _ in 0..spec.copies {
        layer = layer.kron(&u);
    }
    Ok(&(&v * &layer) * &v)
}

/// Neumaier-compensated complex accumulator.
#[derive(Default)]
struct CompensatedSum {
    re: f64,
    re_c: f64,
    im: f64,
    im_c: f64,
}

impl CompensatedSum {
    fn add(&mut self, z: C64) {
        neumaier(&mut self.re, &mut self.re_c, z.re);
        neumaier(&mut self.im, &mut self.im_c, z.im);
    }

    fn value(&self) -> C64 {
        C64::new(self.re + self.re_c, self.im + self.im_c)
    }
}

fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

/// Fidelity of the induced map with `U(φ)^{⊗M}`:
/// `|2^{-M} sum_w C(M,w) e^{i(f(w)-w)φ}|^2`, with the binomial weights built
/// in the log domain so that large `M` neither overflows nor underflows.
pub fn replication_fidelity(spec: &ReplicationSpec, phi: PhaseAngle) -> f64 {
    let m = spec.replicas;
    let ln2m = m as f64 * std::f64::consts::LN_2;
    let mut ln_binom = 0.0f64;
    let mut acc = CompensatedSum::default();
    for w in 0..=m {
        if w > 0 {
            ln_binom += ((m - w + 1) as f64).ln() - (w as f64).ln();
        }
        let weight = (ln_binom - ln2m).exp();
        let exponent = (spec.phase_multiple(w) - w as i64) as f64 * phi.radians();
        acc.add(C64::from_polar(weight, exponent));
    }
    acc.value().norm_sqr().min(1.0)
}

/// `|Tr[U^{⊗M dagger} W]|^2 / 4^M` with both operators materialized densely.
pub fn dense_trace_fidelity(spec: &ReplicationSpec, phi: PhaseAngle) -> Result<f64> {
    if spec.replicas > DENSE_TRACE_MAX_REPLICAS {
        return Err(Error::RegisterCap {
            requested: spec.replicas,
            cap: DENSE_TRACE_MAX_REPLICAS,
        });
    }
    let u = phase_gate(phi);
    let mut ideal = Operator::identity(0);
    for _ in 0..spec.replicas {
        ideal = ideal.kron(&u);
    }
    gate_fidelity(&replicated_map(spec, phi)?, &ideal)
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub copies: usize,
    pub replicas: usize,
    pub alpha: f64,
    pub worst_phi: f64,
    pub worst_fidelity: f64,
    /// `(φ, F(φ))` for every grid point.
    pub samples: Vec<(f64, f64)>,
}

impl SweepRow {
    pub fn worst_infidelity(&self) -> f64 {
        1.0 - self.worst_fidelity
    }
}

/// `⌊N^{2−α}⌋`, at least one.
pub fn replicas_for(copies: usize, alpha: f64) -> usize {
    let m = (copies as f64).powf(2.0 - alpha);
    ((m + 1e-9).floor() as usize).max(1)
}

/// For each `N`, sets `M = ⌊N^{2−α}⌋` and records the worst fidelity over
/// `phases`.
pub fn asymptotic_sweep(alpha: f64, copies: &[usize], phases: &[PhaseAngle]) -> Result<Vec<SweepRow>> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
    }
    let specs = copies
        .iter()
        .map(|&n| ReplicationSpec::new(n, replicas_for(n, alpha)))
        .collect::<Result<Vec<_>>>()?;
    fidelity_sweep(&specs, alpha, phases)
}

/// Worst-case fidelity over `phases` for explicit `(N, M)` pairs; `alpha` is
/// only carried into the rows as a label.
pub fn fidelity_sweep(
    specs: &[ReplicationSpec],
    alpha: f64,
    phases: &[PhaseAngle],
) -> Result<Vec<SweepRow>> {
    if phases.is_empty() {
        return Err(Error::InvalidParameter("empty phase grid".into()));
    }
    Ok(specs
        .iter()
        .map(|spec| {
            let samples: Vec<(f64, f64)> = phases
                .iter()
                .map(|&p| (p.radians(), replication_fidelity(spec, p)))
                .collect();
            let (worst_phi, worst_fidelity) = samples
                .iter()
                .copied()
                .fold((f64::NAN, f64::INFINITY), |best, s| if s.1 < best.1 { s } else { best });
            SweepRow {
                copies: spec.copies,
                replicas: spec.replicas,
                alpha,
                worst_phi,
                worst_fidelity,
                samples,
            }
        })
        .collect())
}

/// Checks that `perm` is an involution.
pub fn is_involution(perm: &[usize]) -> bool {
    perm.iter().enumerate().all(|(i, &j)| perm.get(j) == Some(&i))
}

/// True when every row and column holds exactly one unit entry.
pub fn is_permutation_matrix(op: &Operator) -> bool {
    let m = op.matrix();
    let dim = op.dim();
    let mut col_hits = vec![0usize; dim];
    for r in 0..dim {
        let mut row_hits = 0;
        for (c, hits) in col_hits.iter_mut().enumerate() {
            let e = m[(r, c)];
            if e == ONE {
                row_hits += 1;
                *hits += 1;
            } else if e.norm() != 0.0 {
                return false;
            }
        }
        if row_hits != 1 {
            return false;
        }
    }
    col_hits.iter().all(|&h| h == 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{cu_phase, toffoli};
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn thresholds() {
        let s = ReplicationSpec::new(1, 2).unwrap();
        assert_eq!((s.m_min(), s.m_max()), (1, 2));
        let s = ReplicationSpec::new(2, 3).unwrap();
        assert_eq!((s.m_min(), s.m_max()), (1, 3));
        let s = ReplicationSpec::new(4, 2).unwrap();
        assert_eq!((s.m_min(), s.m_max()), (-1, 3));
        for n in 1..12 {
            for m in 1..30 {
                let s = ReplicationSpec::new(n, m).unwrap();
                assert_eq!(s.m_max() - s.m_min(), n as i64);
                let prof = s.phase_profile();
                assert!(prof.windows(2).all(|w| w[0] <= w[1]));
                assert!(prof.iter().all(|&f| (0..=n as i64).contains(&f)));
            }
        }
        assert!(ReplicationSpec::new(0, 3).is_err());
    }

    #[test]
    fn v_for_one_to_two_is_toffoli() {
        let v = build_v(&ReplicationSpec::new(1, 2).unwrap(), &tol()).unwrap();
        assert_eq!(v, toffoli());
    }

    #[test]
    fn v_examples() {
        let perm = build_v_permutation(&ReplicationSpec::new(2, 2).unwrap(), &tol()).unwrap();
        assert_eq!(perm[0b11_00], 0b11_11);

        // brute-force case table for N=2, M=3 on every |m>|00>
        let spec = ReplicationSpec::new(2, 3).unwrap();
        let perm = build_v_permutation(&spec, &tol()).unwrap();
        for m in 0..8usize {
            let out = perm[m << 2];
            assert_eq!(out >> 2, m);
            let k = out & 0b11;
            let w = m.count_ones();
            let want_weight = match w {
                0 => 0,
                1 => 0,
                2 => 1,
                _ => 2,
            };
            assert_eq!(k.count_ones(), want_weight, "m={m:03b}");
        }
        assert_eq!(perm[0b010_00] & 0b11, 0);
        assert_eq!((perm[0b011_00] & 0b11).count_ones(), 1);
    }

    #[test]
    fn v_is_a_permutation_involution() {
        for total in 2..=8 {
            for n in 1..total {
                let spec = ReplicationSpec::new(n, total - n).unwrap();
                let perm = build_v_permutation(&spec, &tol()).unwrap();
                assert!(is_involution(&perm));
                let v = build_v(&spec, &tol()).unwrap();
                assert!(is_permutation_matrix(&v));
                assert_eq!(&v * &v, Operator::identity(total));
            }
        }
    }

    #[test]
    fn register_cap_is_enforced() {
        let small = Tolerances {
            max_qubits: 4,
            ..Tolerances::default()
        };
        let spec = ReplicationSpec::new(2, 3).unwrap();
        assert!(matches!(
            build_v(&spec, &small),
            Err(Error::RegisterCap { requested: 5, cap: 4 })
        ));
        assert!(build_v_permutation(&spec, &small).is_err());
    }

    #[test]
    fn replicated_map_examples() {
        let spec = ReplicationSpec::new(1, 2).unwrap();
        for phi in PhaseAngle::uniform_grid(9) {
            assert!(replicated_map(&spec, phi).unwrap().max_abs_diff(&cu_phase(phi)) < 1e-15);
        }
        let spec = ReplicationSpec::new(3, 4).unwrap();
        assert_eq!(
            replicated_map(&spec, PhaseAngle::new(0.0)).unwrap(),
            Operator::identity(4)
        );

        // N=2, M=3, φ=π/2 against the dense 5-qubit sandwich
        let spec = ReplicationSpec::new(2, 3).unwrap();
        let phi = PhaseAngle::new(FRAC_PI_2);
        let dense = dense_sandwich(&spec, phi, &tol()).unwrap();
        let sector = CMatrix::from_fn(8, 8, |r, c| dense.matrix()[(r << 2, c << 2)]);
        let want = replicated_map(&spec, phi).unwrap();
        assert!((sector - want.matrix()).camax() < 1e-12);
        let expected_phase = |w: u32| match w {
            0 | 1 => 0.0,
            2 => FRAC_PI_2,
            _ => PI,
        };
        for m in 0..8usize {
            let e = want.entry(m, m);
            let p = C64::from_polar(1.0, expected_phase(m.count_ones()));
            assert!((e - p).norm() < 1e-15);
        }
    }

    #[test]
    fn permutation_sandwich_matches_dense_sandwich() {
        for (n, m) in [(1, 2), (2, 2), (2, 3), (1, 4), (3, 3), (2, 4)] {
            let spec = ReplicationSpec::new(n, m).unwrap();
            for phi in PhaseAngle::uniform_grid(5) {
                let dense = dense_sandwich(&spec, phi, &tol()).unwrap();
                let sector = CMatrix::from_fn(1 << m, 1 << m, |r, c| dense.matrix()[(r << n, c << n)]);
                let fast = sandwich_sector(&spec, phi, &tol()).unwrap();
                assert!((sector - fast).camax() < 1e-14);
            }
        }
    }

    #[test]
    fn closed_form_examples() {
        let spec = ReplicationSpec::new(1, 2).unwrap();
        for phi in PhaseAngle::uniform_grid(32) {
            let want = (5.0 + 3.0 * phi.radians().cos()) / 8.0;
            assert!((replication_fidelity(&spec, phi) - want).abs() < 1e-14);
        }
        for (n, m) in [(1, 1), (2, 7), (5, 40), (30, 900)] {
            let spec = ReplicationSpec::new(n, m).unwrap();
            assert!((replication_fidelity(&spec, PhaseAngle::new(0.0)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_matches_exact_integer_sum() {
        // φ=π makes every phase ±1: F = (sum_w (-1)^{f(w)-w} C(16,w))^2 / 4^16.
        let spec = ReplicationSpec::new(4, 16).unwrap();
        let mut binom = [0i128; 17];
        binom[0] = 1;
        for w in 1..=16 {
            binom[w] = binom[w - 1] * (16 - w as i128 + 1) / w as i128;
        }
        let mut s: i128 = 0;
        for (w, b) in binom.iter().enumerate() {
            let parity = (spec.phase_multiple(w) - w as i64).rem_euclid(2);
            s += if parity == 0 { *b } else { -*b };
        }
        let exact = (s * s) as f64 / 4f64.powi(16);
        let got = replication_fidelity(&spec, PhaseAngle::new(PI));
        assert!((got - exact).abs() < 1e-14, "{got} vs {exact}");
    }

    #[test]
    fn closed_form_matches_dense_trace() {
        for m in 1..=8 {
            for n in 1..=m + 1 {
                let spec = ReplicationSpec::new(n, m).unwrap();
                for phi in PhaseAngle::uniform_grid(6) {
                    let a = replication_fidelity(&spec, phi.shifted(0.1));
                    let b = dense_trace_fidelity(&spec, phi.shifted(0.1)).unwrap();
                    assert!((a - b).abs() < 1e-10, "N={n} M={m}");
                }
            }
        }
    }

    #[test]
    fn fidelity_is_conjugate_symmetric() {
        let spec = ReplicationSpec::new(3, 7).unwrap();
        for k in 0..20 {
            let x = 0.13 + k as f64 * 0.31;
            let f = replication_fidelity(&spec, PhaseAngle::new(x));
            assert!((f - replication_fidelity(&spec, PhaseAngle::new(-x))).abs() < 1e-14);
            assert!((f - replication_fidelity(&spec, PhaseAngle::new(TAU - x))).abs() < 1e-14);
        }
    }

    #[test]
    fn enough_copies_give_unit_fidelity() {
        for m in 1..10 {
            for n in m..m + 4 {
                let spec = ReplicationSpec::new(n, m).unwrap();
                let shift: Vec<i64> = (0..=m).map(|w| spec.phase_multiple(w) - w as i64).collect();
                assert!(shift.iter().all(|&s| s == -spec.m_min()));
                for phi in PhaseAngle::uniform_grid(7) {
                    assert!((replication_fidelity(&spec, phi) - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn large_m_stays_finite() {
        let spec = ReplicationSpec::new(60, 3000).unwrap();
        let f = replication_fidelity(&spec, PhaseAngle::new(PI));
        assert!(f.is_finite() && (0.0..=1.0).contains(&f));
    }

    #[test]
    fn sweep_examples() {
        let grid = PhaseAngle::uniform_grid(64);
        let rows = asymptotic_sweep(1.0, &[2, 4, 8], &grid).unwrap();
        for r in &rows {
            assert_eq!(r.copies, r.replicas);
            assert!(r.worst_infidelity() < 1e-12);
        }
        let one_two = [ReplicationSpec::new(1, 2).unwrap()];
        let rows = fidelity_sweep(&one_two, 1.0, &grid).unwrap();
        assert!((rows[0].worst_fidelity - 0.25).abs() < 1e-14);
        assert!((rows[0].worst_phi - PI).abs() < 1e-12);
        assert!(asymptotic_sweep(0.0, &[4], &grid).is_err());
        assert_eq!(replicas_for(9, 0.5), 27);
        assert_eq!(replicas_for(25, 0.5), 125);
    }
}
