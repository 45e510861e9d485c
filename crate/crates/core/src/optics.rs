//! Linear-optics model of the coincidence-basis Toffoli gate.
//!
//! The signal photon carries two qubits: its path (qubit 0, `0` = lower beam,
//! `1` = upper beam) and its polarization (qubit 1). The idler photon's
//! polarization is the target (qubit 2). `H` encodes `|0>` and `V` encodes `|1>`.
//!
//! Both signal beams and the idler cross a partially polarizing beam splitter
//! (PPBS). Only the upper signal beam overlaps the idler, so only that branch
//! can undergo two-photon interference. A second, ideal pair of attenuators
//! balances the `H` transmission so that every computational input succeeds
//! with amplitude 1/3 at the design point, which turns the interaction into a
//! controlled-controlled-Z. Half-wave plates on the idler complete the Toffoli.
//!
//! Partial indistinguishability is a two-point mixture: weight `V` for photons
//! that interfere perfectly and `1 − V` for fully distinguishable ones.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::choi::{choi_from_kraus, process_fidelity, ProcessMatrix};
use crate::error::{Error, Result};
use crate::gates::{cu_phase, hadamard, phase_gate, toffoli, PhaseAngle};
use crate::qmat::{CMatrix, Operator, Projector, C64, ZERO};

/// Reflectances of the central beam splitter, interference visibility and
/// interferometer phase noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticsParams {
    /// Intensity reflectance for vertical polarization.
    pub r_v: f64,
    /// Intensity reflectance for horizontal polarization.
    pub r_h: f64,
    /// Two-photon interference visibility.
    pub visibility: f64,
    /// Standard deviation (rad) of the spatial-interferometer phase.
    #[serde(default)]
    pub phase_jitter_sigma: f64,
}

impl OpticsParams {
    pub fn new(r_v: f64, r_h: f64, visibility: f64, phase_jitter_sigma: f64) -> Result<Self> {
        let p = Self {
            r_v,
            r_h,
            visibility,
            phase_jitter_sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn ideal() -> Self {
        Self {
            r_v: 2.0 / 3.0,
            r_h: 0.0,
            visibility: 1.0,
            phase_jitter_sigma: 0.0,
        }
    }

    /// Characterized component values with a chosen phase-noise level.
    pub fn measured(phase_jitter_sigma: f64) -> Self {
        Self {
            r_v: 0.660,
            r_h: 0.017,
            visibility: 0.958,
            phase_jitter_sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {x} outside [0, 1]")))
            }
        };
        unit("r_v", self.r_v)?;
        unit("r_h", self.r_h)?;
        unit("visibility", self.visibility)?;
        if !(self.phase_jitter_sigma >= 0.0) || !self.phase_jitter_sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "phase_jitter_sigma = {} must be a finite non-negative number",
                self.phase_jitter_sigma
            )));
        }
        Ok(())
    }

    fn amplitudes(&self, pol: Polarization) -> (f64, f64) {
        let r = match pol {
            Polarization::H => self.r_h,
            Polarization::V => self.r_v,
        };
        ((1.0 - r).sqrt(), r.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn from_bit(bit: usize) -> Self {
        if bit == 0 {
            Polarization::H
        } else {
            Polarization::V
        }
    }

    pub fn bit(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }
}

/// Spatial modes of the network. The PPBS couples `SignalUpper` with `Idler`
/// and `SignalLower` with the unmonitored `Dump` port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Spatial {
    SignalLower,
    SignalUpper,
    Idler,
    Dump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mode {
    pub spatial: Spatial,
    pub pol: Polarization,
}

impl Mode {
    pub fn new(spatial: Spatial, pol: Polarization) -> Self {
        Self { spatial, pol }
    }

    fn in_signal_block(self) -> bool {
        matches!(self.spatial, Spatial::SignalLower | Spatial::SignalUpper)
    }

    fn in_idler_block(self) -> bool {
        self.spatial == Spatial::Idler
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    /// Indistinguishable photons: amplitudes follow bosonic exchange symmetry.
    Interfering,
    /// Labeled photons that never interfere; keys are `(signal, idler)`.
    Distinguishable,
}

/// Two-photon amplitude table.
///
/// In the interfering sector a key `(a, b)` with `a <= b` stands for
/// `a†_a a†_b |vac>`; in the distinguishable sector it is the ordered pair
/// (signal photon mode, idler photon mode).
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalState {
    sector: Sector,
    amplitudes: BTreeMap<(Mode, Mode), C64>,
}

impl OpticalState {
    /// One signal and one idler photon in the given modes.
    pub fn pair(sector: Sector, signal: Mode, idler: Mode) -> Self {
        let mut s = Self {
            sector,
            amplitudes: BTreeMap::new(),
        };
        s.add(signal, idler, C64::new(1.0, 0.0));
        s
    }

    pub fn empty(sector: Sector) -> Self {
        Self {
            sector,
            amplitudes: BTreeMap::new(),
        }
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    fn key(&self, a: Mode, b: Mode) -> (Mode, Mode) {
        match self.sector {
            Sector::Interfering if b < a => (b, a),
            _ => (a, b),
        }
    }

    /// Adds `amp` to the term with photons in `a` and `b` (signal first in
    /// the distinguishable sector).
    pub fn add(&mut self, a: Mode, b: Mode, amp: C64) {
        let k = self.key(a, b);
        *self.amplitudes.entry(k).or_insert(ZERO) += amp;
    }

    /// Coefficient of the term with photons in `a` and `b`.
    pub fn amplitude(&self, a: Mode, b: Mode) -> C64 {
        self.amplitudes.get(&self.key(a, b)).copied().unwrap_or(ZERO)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(Mode, Mode), &C64)> {
        self.amplitudes.iter()
    }

    /// Squared norm including the bosonic factor 2 for doubly occupied modes.
    pub fn norm_squared(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|((a, b), c)| {
                let w = if self.sector == Sector::Interfering && a == b {
                    2.0
                } else {
                    1.0
                };
                w * c.norm_sqr()
            })
            .sum()
    }

    /// Applies a single-photon linear map to both photons.
    pub fn propagate<F>(&self, map: F) -> OpticalState
    where
        F: Fn(Mode) -> Vec<(Mode, C64)>,
    {
        let mut out = OpticalState::empty(self.sector);
        for (&(a, b), &amp) in &self.amplitudes {
            for (ma, ca) in map(a) {
                for (mb, cb) in map(b) {
                    out.add(ma, mb, amp * ca * cb);
                }
            }
        }
        out.amplitudes.retain(|_, c| c.norm() > 0.0);
        out
    }
}

/// Single-photon action of the PPBS on every mode.
///
/// `SignalUpper` and `Idler` enter opposite ports: transmission keeps each
/// photon in its own beam, reflection swaps beams, with amplitude `+r` for
/// signal-to-idler and `−r` for idler-to-signal. The lower signal beam is
/// coupled the same way to the unused `Dump` port.
pub fn ppbs_mode_map(params: &OpticsParams, mode: Mode) -> Vec<(Mode, C64)> {
    let (t, r) = params.amplitudes(mode.pol);
    let re = |x: f64| C64::new(x, 0.0);
    let m = |s: Spatial| Mode::new(s, mode.pol);
    match mode.spatial {
        Spatial::SignalUpper => vec![(m(Spatial::SignalUpper), re(t)), (m(Spatial::Idler), re(r))],
        Spatial::Idler => vec![(m(Spatial::SignalUpper), re(-r)), (m(Spatial::Idler), re(t))],
        Spatial::SignalLower => vec![(m(Spatial::SignalLower), re(t)), (m(Spatial::Dump), re(r))],
        Spatial::Dump => vec![(m(Spatial::SignalLower), re(-r)), (m(Spatial::Dump), re(t))],
    }
}

/// Unitary two-mode beam-splitter transformation of a two-photon state.
pub fn ppbs_transform(state: &OpticalState, params: &OpticsParams) -> OpticalState {
    state.propagate(|m| ppbs_mode_map(params, m))
}

/// Amplitude transmission of the balancing attenuators behind the PPBS:
/// `1/√3` for `H`, unity for `V`. Fixed at the design point.
fn balancing_mode_map(mode: Mode) -> Vec<(Mode, C64)> {
    match (mode.spatial, mode.pol) {
        (Spatial::Dump, _) => vec![],
        (_, Polarization::H) => vec![(mode, C64::new(1.0 / 3f64.sqrt(), 0.0))],
        (_, Polarization::V) => vec![(mode, C64::new(1.0, 0.0))],
    }
}

fn input_pair(index: usize, sector: Sector) -> OpticalState {
    let path = (index >> 2) & 1;
    let spol = Polarization::from_bit((index >> 1) & 1);
    let ipol = Polarization::from_bit(index & 1);
    let spatial = if path == 1 {
        Spatial::SignalUpper
    } else {
        Spatial::SignalLower
    };
    OpticalState::pair(sector, Mode::new(spatial, spol), Mode::new(Spatial::Idler, ipol))
}

fn output_index(signal_block: Mode, idler_block: Mode) -> usize {
    let path = usize::from(signal_block.spatial == Spatial::SignalUpper);
    (path << 2) | (signal_block.pol.bit() << 1) | idler_block.pol.bit()
}

/// Conditional amplitude maps of the PPBS core on the three qubits, before
/// the idler wave plates.
#[derive(Debug, Clone)]
pub struct CoreAmplitudes {
    /// Indistinguishable photons.
    pub interfering: CMatrix,
    /// Labeled photons, each detected in its own block.
    pub direct: CMatrix,
    /// Labeled photons that swapped blocks at the PPBS.
    pub swapped: CMatrix,
}

/// Propagates each computational input through the PPBS and the balancing
/// attenuators and keeps only coincidences (one photon in the signal block,
/// one in the idler block).
pub fn core_amplitudes(params: &OpticsParams) -> CoreAmplitudes {
    let mut interfering = CMatrix::zeros(8, 8);
    let mut direct = CMatrix::zeros(8, 8);
    let mut swapped = CMatrix::zeros(8, 8);
    let network = |m: Mode| -> Vec<(Mode, C64)> {
        ppbs_mode_map(params, m)
            .into_iter()
            .flat_map(|(m1, c1)| {
                balancing_mode_map(m1)
                    .into_iter()
                    .map(move |(m2, c2)| (m2, c1 * c2))
            })
            .collect()
    };
    for col in 0..8 {
        let out = input_pair(col, Sector::Interfering).propagate(network);
        for (&(a, b), &amp) in out.terms() {
            let (sig, idl) = if a.in_signal_block() && b.in_idler_block() {
                (a, b)
            } else if b.in_signal_block() && a.in_idler_block() {
                (b, a)
            } else {
                continue;
            };
            interfering[(output_index(sig, idl), col)] += amp;
        }

        let out = input_pair(col, Sector::Distinguishable).propagate(network);
        for (&(s, i), &amp) in out.terms() {
            if s.in_signal_block() && i.in_idler_block() {
                direct[(output_index(s, i), col)] += amp;
            } else if i.in_signal_block() && s.in_idler_block() {
                swapped[(output_index(i, s), col)] += amp;
            }
        }
    }
    CoreAmplitudes {
        interfering,
        direct,
        swapped,
    }
}

/// Postselected Toffoli as a weighted Kraus decomposition.
#[derive(Debug, Clone)]
pub struct EffectiveToffoli {
    pub kraus: Vec<Operator>,
    /// Coincidence probability for a maximally mixed three-qubit input.
    pub success_probability: f64,
}

impl EffectiveToffoli {
    /// Raw (sub-normalized) Choi matrix, spatial-qubit dephasing included.
    pub fn process_matrix(&self, params: &OpticsParams) -> Result<ProcessMatrix> {
        dephase_spatial(&choi_from_kraus(&self.kraus)?, params.phase_jitter_sigma)
    }
}

/// Kraus operators of the optical Toffoli for the given parameters. The
/// interferometer phase noise is not included here; it acts at channel level
/// through [`dephase_spatial`].
pub fn effective_toffoli(params: &OpticsParams) -> Result<EffectiveToffoli> {
    params.validate()?;
    let core = core_amplitudes(params);
    let plates = Operator::identity(2).kron(&hadamard());
    let wrap = |m: CMatrix, weight: f64| -> Option<Operator> {
        if weight <= 0.0 || m.iter().all(|c| c.norm() == 0.0) {
            return None;
        }
        let op = Operator::new(m * C64::new(weight.sqrt(), 0.0)).expect("8x8");
        Some(&(&plates * &op) * &plates)
    };
    let v = params.visibility;
    let kraus: Vec<Operator> = [
        wrap(core.interfering, v),
        wrap(core.direct, 1.0 - v),
        wrap(core.swapped, 1.0 - v),
    ]
    .into_iter()
    .flatten()
    .collect();
    let success_probability = kraus.iter().map(|k| k.matrix().norm_squared()).sum::<f64>() / 8.0;
    Ok(EffectiveToffoli {
        kraus,
        success_probability,
    })
}

/// Gaussian-averaged phase `e^{iθ}` on the spatial qubit's `|1>` branch,
/// `θ ~ N(0, σ²)`: coherences between the two paths shrink by `e^{−σ²/2}`.
/// The spatial qubit is qubit 0 of the channel.
pub fn dephase_spatial(chi: &ProcessMatrix, sigma: f64) -> Result<ProcessMatrix> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma = {sigma} must be >= 0")));
    }
    if sigma == 0.0 {
        return Ok(chi.clone());
    }
    chi.dephase_output(0, (-0.5 * sigma * sigma).exp())
}

/// Kraus operators on the two signal qubits after `U(φ)` on the idler and an
/// idler projection onto `ancilla_outcome`; the idler enters in `|0>`.
pub fn replication_kraus(
    phi: PhaseAngle,
    params: &OpticsParams,
    ancilla_outcome: Projector,
) -> Result<Vec<Operator>> {
    let gate = effective_toffoli(params)?;
    let phase = Operator::identity(2).kron(&phase_gate(phi));
    let ket = ancilla_outcome.ket();
    Ok(gate
        .kraus
        .iter()
        .map(|k| {
            let w = &phase * k;
            let m = w.matrix();
            let reduced = CMatrix::from_fn(4, 4, |o, i| {
                ket[0].conj() * m[(2 * o, 2 * i)] + ket[1].conj() * m[(2 * o + 1, 2 * i)]
            });
            Operator::new(reduced).expect("4x4")
        })
        .collect())
}

/// Simulated experiment: optical Toffoli, `U(φ)` on the idler, idler
/// accepted only in `|+>`. The result is the raw sub-normalized channel on
/// the two signal qubits.
pub fn replication_experiment_channel(phi: PhaseAngle, params: &OpticsParams) -> Result<ProcessMatrix> {
    let kraus = replication_kraus(phi, params, Projector::Plus)?;
    dephase_spatial(&choi_from_kraus(&kraus)?, params.phase_jitter_sigma)
}

/// The same experiment with the idler discarded instead of projected.
pub fn replication_unprojected_channel(phi: PhaseAngle, params: &OpticsParams) -> Result<ProcessMatrix> {
    let mut kraus = replication_kraus(phi, params, Projector::Zero)?;
    kraus.extend(replication_kraus(phi, params, Projector::One)?);
    dephase_spatial(&choi_from_kraus(&kraus)?, params.phase_jitter_sigma)
}

/// Process fidelities of the simulated experiment at one phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentFidelities {
    pub phi: f64,
    /// Against `CU(φ)`.
    pub controlled: f64,
    /// Against `U(φ) ⊗ U(φ)`.
    pub replicas: f64,
    /// `Tr chi`: coincidence probability per maximally mixed input.
    pub success_probability: f64,
}

pub fn experiment_fidelities(phi: PhaseAngle, params: &OpticsParams) -> Result<ExperimentFidelities> {
    let chi = replication_experiment_channel(phi, params)?;
    let u = phase_gate(phi);
    Ok(ExperimentFidelities {
        phi: phi.radians(),
        controlled: process_fidelity(&chi, &cu_phase(phi))?,
        replicas: process_fidelity(&chi, &u.kron(&u))?,
        success_probability: chi.trace(),
    })
}

/// Process fidelity of the optical gate with the ideal Toffoli.
pub fn toffoli_fidelity(params: &OpticsParams) -> Result<f64> {
    let gate = effective_toffoli(params)?;
    process_fidelity(&gate.process_matrix(params)?, &toffoli())
}

/// Parameters varied by single-parameter imperfection scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanParameter {
    RV,
    RH,
    Visibility,
    PhaseJitter,
}

impl ScanParameter {
    pub const ALL: [ScanParameter; 4] = [
        ScanParameter::RV,
        ScanParameter::RH,
        ScanParameter::Visibility,
        ScanParameter::PhaseJitter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScanParameter::RV => "r_v",
            ScanParameter::RH => "r_h",
            ScanParameter::Visibility => "visibility",
            ScanParameter::PhaseJitter => "phase_jitter_sigma",
        }
    }

    pub fn apply(self, base: &OpticsParams, value: f64) -> OpticsParams {
        let mut p = *base;
        match self {
            ScanParameter::RV => p.r_v = value,
            ScanParameter::RH => p.r_h = value,
            ScanParameter::Visibility => p.visibility = value,
            ScanParameter::PhaseJitter => p.phase_jitter_sigma = value,
        }
        p
    }
}

/// One point of an imperfection scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub parameter: ScanParameter,
    pub value: f64,
    pub toffoli_fidelity: f64,
    /// Mean over the scan phases of the fidelity with `CU(φ)`.
    pub mean_controlled: f64,
    /// Mean over the scan phases of the fidelity with `U(φ) ⊗ U(φ)`.
    pub mean_replicas: f64,
}

/// Varies one parameter away from `base`, keeping the others fixed.
pub fn imperfection_scan(
    parameter: ScanParameter,
    base: &OpticsParams,
    values: &[f64],
    phases: &[PhaseAngle],
) -> Result<Vec<ScanPoint>> {
    if phases.is_empty() {
        return Err(Error::InvalidParameter("empty phase grid".into()));
    }
    values
        .iter()
        .map(|&value| {
            let params = parameter.apply(base, value);
            params.validate()?;
            let mut fc = 0.0;
            let mut fu = 0.0;
            for &phi in phases {
                let f = experiment_fidelities(phi, &params)?;
                fc += f.controlled;
                fu += f.replicas;
            }
            let n = phases.len() as f64;
            Ok(ScanPoint {
                parameter,
                value,
                toffoli_fidelity: toffoli_fidelity(&params)?,
                mean_controlled: fc / n,
                mean_replicas: fu / n,
            })
        })
        .collect()
}
