//! Simulated two-qubit process tomography.
//!
//! Inputs are products of Pauli eigenstates, measurements are products of
//! Pauli bases. For input `|psi>` and measurement vector `|b>` the outcome
//! probability is `p = d <psi* ⊗ b| chi |psi* ⊗ b>` with `d = 4`. Counts are
//! independent Poisson variables. Reconstruction maximizes the Poisson
//! likelihood over trace-one positive `chi` with a diluted `R chi R`
//! iteration.

use std::io::{Read, Write};

use nalgebra::linalg::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::choi::{choi_of_unitary, process_fidelity, Normalization, ProcessMatrix};
use crate::error::{Error, Result};
use crate::gates::{cu_phase, phase_gate, PhaseAngle};
use crate::optics::{replication_experiment_channel, OpticsParams};
use crate::qmat::{CMatrix, CVector, Projector, C64};

const QUBITS: usize = 2;
const DIM: usize = 4;
const CHOI_DIM: usize = 16;

/// Single-qubit Pauli measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliBasis {
    Z,
    X,
    Y,
}

impl PauliBasis {
    pub const ALL: [PauliBasis; 3] = [PauliBasis::Z, PauliBasis::X, PauliBasis::Y];

    /// Eigenstates in outcome order (`+1` first).
    pub fn projectors(self) -> [Projector; 2] {
        match self {
            PauliBasis::Z => [Projector::Zero, Projector::One],
            PauliBasis::X => [Projector::Plus, Projector::Minus],
            PauliBasis::Y => [Projector::PlusI, Projector::MinusI],
        }
    }
}

fn product_ket(a: Projector, b: Projector) -> CVector {
    let ka = a.ket();
    let kb = b.ket();
    CVector::from_fn(DIM, |i, _| ka[i >> 1] * kb[i & 1])
}

fn gram_rank(kets: &[CVector]) -> usize {
    let n = kets.len();
    let g = CMatrix::from_fn(n, n, |i, j| C64::new(kets[i].dotc(&kets[j]).norm_sqr(), 0.0));
    let eig = SymmetricEigen::new(g).eigenvalues;
    let top = eig.iter().cloned().fold(0.0, f64::max);
    eig.iter().filter(|&&x| x > 1e-10 * top.max(1.0)).count()
}

/// Input states and measurement settings for two-qubit process tomography.
#[derive(Debug, Clone)]
pub struct TomographyDesign {
    inputs: Vec<[Projector; 2]>,
    settings: Vec<[PauliBasis; 2]>,
    /// `psi* ⊗ b` for every (input, setting, outcome), columns in that order.
    vectors: nalgebra::DMatrix<C64>,
    /// `(A^dagger A)^-1` for the linear-inversion estimate.
    frame_inverse: CMatrix,
}

impl TomographyDesign {
    /// Builds a design and checks that it identifies every two-qubit channel.
    pub fn new(inputs: Vec<[Projector; 2]>, settings: Vec<[PauliBasis; 2]>) -> Result<Self> {
        let input_kets: Vec<CVector> = inputs.iter().map(|p| product_ket(p[0], p[1])).collect();
        let effects: Vec<CVector> = settings
            .iter()
            .flat_map(|s| {
                (0..4).map(move |o| product_ket(s[0].projectors()[o >> 1], s[1].projectors()[o & 1]))
            })
            .collect();
        let required = DIM * DIM;
        let input_rank = gram_rank(&input_kets);
        let effect_rank = gram_rank(&effects);
        if input_rank < required || effect_rank < required {
            return Err(Error::UnidentifiableModel {
                rank: input_rank * effect_rank,
                required: required * required,
            });
        }

        let count = inputs.len() * settings.len() * 4;
        let mut vectors = CMatrix::zeros(CHOI_DIM, count);
        for (i, psi) in input_kets.iter().enumerate() {
            for (e, b) in effects.iter().enumerate() {
                let col = i * effects.len() + e;
                for r in 0..DIM {
                    for o in 0..DIM {
                        vectors[(r * DIM + o, col)] = psi[r].conj() * b[o];
                    }
                }
            }
        }

        // Row k of A is vec(v v^dagger)^dagger scaled by d, so p = A vec(chi).
        let n2 = CHOI_DIM * CHOI_DIM;
        let mut gram = CMatrix::zeros(n2, n2);
        let mut row = CVector::zeros(n2);
        for k in 0..count {
            let v = vectors.column(k);
            for a in 0..CHOI_DIM {
                for b in 0..CHOI_DIM {
                    row[a * CHOI_DIM + b] = v[a] * v[b].conj() * DIM as f64;
                }
            }
            gram.gerc(C64::new(1.0, 0.0), &row, &row, C64::new(1.0, 0.0));
        }
        let frame_inverse = gram.try_inverse().ok_or(Error::UnidentifiableModel {
            rank: input_rank * effect_rank,
            required: n2,
        })?;

        Ok(Self {
            inputs,
            settings,
            vectors,
            frame_inverse,
        })
    }

    pub fn inputs(&self) -> &[[Projector; 2]] {
        &self.inputs
    }

    pub fn settings(&self) -> &[[PauliBasis; 2]] {
        &self.settings
    }

    pub const OUTCOMES: usize = 4;

    /// Number of (input, setting, outcome) cells.
    pub fn cells(&self) -> usize {
        self.inputs.len() * self.settings.len() * Self::OUTCOMES
    }

    fn cell(&self, input: usize, setting: usize, outcome: usize) -> usize {
        (input * self.settings.len() + setting) * Self::OUTCOMES + outcome
    }

    /// The two-qubit projector for one setting and outcome.
    pub fn effect(&self, setting: usize, outcome: usize) -> CMatrix {
        let s = self.settings[setting];
        let b = product_ket(s[0].projectors()[outcome >> 1], s[1].projectors()[outcome & 1]);
        &b * b.adjoint()
    }

    /// Outcome probabilities `Tr[Pi E(rho)]` for every cell, in cell order.
    pub fn probabilities(&self, chi: &ProcessMatrix) -> Result<Vec<f64>> {
        if chi.qubits() != QUBITS {
            return Err(Error::DimensionMismatch {
                expected: QUBITS,
                found: chi.qubits(),
            });
        }
        Ok(probabilities_of(&self.vectors, chi.matrix()))
    }
}

fn probabilities_of(vectors: &CMatrix, chi: &CMatrix) -> Vec<f64> {
    let cv = chi * vectors;
    vectors
        .column_iter()
        .zip(cv.column_iter())
        .map(|(v, w)| DIM as f64 * v.dotc(&w).re)
        .collect()
}

/// 36 Pauli-eigenstate products in, 9 Pauli-basis products measured.
pub fn default_design() -> TomographyDesign {
    let mut inputs = Vec::with_capacity(36);
    for a in Projector::ALL {
        for b in Projector::ALL {
            inputs.push([a, b]);
        }
    }
    let mut settings = Vec::with_capacity(9);
    for a in PauliBasis::ALL {
        for b in PauliBasis::ALL {
            settings.push([a, b]);
        }
    }
    TomographyDesign::new(inputs, settings).expect("Pauli design is informationally complete")
}

/// One coincidence count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub phase_id: usize,
    pub input_id: usize,
    pub setting_id: usize,
    pub outcome_id: usize,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomographyDataset {
    pub records: Vec<CountRecord>,
    /// Expected counts per (input, setting) used to generate the data, if known.
    pub rate: Option<f64>,
}

impl TomographyDataset {
    pub fn phase_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.records.iter().map(|r| r.phase_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn for_phase(&self, phase_id: usize) -> TomographyDataset {
        TomographyDataset {
            records: self
                .records
                .iter()
                .filter(|r| r.phase_id == phase_id)
                .copied()
                .collect(),
            rate: self.rate,
        }
    }

    pub fn merge(mut self, other: TomographyDataset) -> TomographyDataset {
        self.records.extend(other.records);
        self
    }

    pub fn total_counts(&self) -> u64 {
        self.records.iter().map(|r| r.count).sum()
    }

    /// Counts in design cell order for a single-phase dataset.
    pub fn count_table(&self, design: &TomographyDesign) -> Result<Vec<f64>> {
        let phases = self.phase_ids();
        if phases.len() > 1 {
            return Err(Error::IncompleteDataset(format!(
                "{} phases in one reconstruction",
                phases.len()
            )));
        }
        let mut table = vec![None; design.cells()];
        for r in &self.records {
            if r.input_id >= design.inputs.len()
                || r.setting_id >= design.settings.len()
                || r.outcome_id >= TomographyDesign::OUTCOMES
            {
                return Err(Error::IncompleteDataset(format!(
                    "record outside design: input {}, setting {}, outcome {}",
                    r.input_id, r.setting_id, r.outcome_id
                )));
            }
            let k = design.cell(r.input_id, r.setting_id, r.outcome_id);
            if table[k].replace(r.count as f64).is_some() {
                return Err(Error::IncompleteDataset(format!(
                    "duplicate record: input {}, setting {}, outcome {}",
                    r.input_id, r.setting_id, r.outcome_id
                )));
            }
        }
        table
            .into_iter()
            .enumerate()
            .map(|(k, c)| {
                c.ok_or_else(|| {
                    let outcome = k % 4;
                    let setting = (k / 4) % design.settings.len();
                    let input = k / 4 / design.settings.len();
                    Error::IncompleteDataset(format!(
                        "missing record: input {input}, setting {setting}, outcome {outcome}"
                    ))
                })
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()
    }

    /// Reads the CSV layout written by [`write_csv`](Self::write_csv); lines
    /// starting with `#` are skipped.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let expected = ["phase_id", "input_id", "setting_id", "outcome_id", "count"];
        let headers = rd
            .headers()
            .map_err(|e| Error::IncompleteDataset(e.to_string()))?
            .clone();
        if headers.iter().ne(expected.iter().copied()) {
            return Err(Error::IncompleteDataset(format!(
                "expected columns {}, found {}",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let records = rd
            .deserialize()
            .collect::<std::result::Result<Vec<CountRecord>, _>>()
            .map_err(|e| Error::IncompleteDataset(e.to_string()))?;
        Ok(Self {
            records,
            rate: None,
        })
    }
}

fn poisson_draw(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Poisson counts with mean `rate * p` in every cell, labeled with `phase_id`.
/// The RNG stream is selected by `phase_id`, so each phase has its own
/// reproducible draw.
pub fn simulate_counts(
    channel: &ProcessMatrix,
    design: &TomographyDesign,
    rate: f64,
    seed: u64,
    phase_id: usize,
) -> Result<TomographyDataset> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::InvalidParameter(format!("rate = {rate} must be positive")));
    }
    let probs = design.probabilities(channel)?;
    let mut rng = rng_for(seed, phase_id as u64);
    let mut records = Vec::with_capacity(design.cells());
    for input_id in 0..design.inputs.len() {
        for setting_id in 0..design.settings.len() {
            for outcome_id in 0..TomographyDesign::OUTCOMES {
                let p = probs[design.cell(input_id, setting_id, outcome_id)].max(0.0);
                records.push(CountRecord {
                    phase_id,
                    input_id,
                    setting_id,
                    outcome_id,
                    count: poisson_draw(&mut rng, rate * p),
                });
            }
        }
    }
    Ok(TomographyDataset {
        records,
        rate: Some(rate),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Stop once the log-likelihood gain per recorded count falls below this.
    pub tolerance: f64,
    /// Starting point; defaults to the positive part of the linear-inversion estimate.
    pub initial: Option<ProcessMatrix>,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            tolerance: 1e-10,
            initial: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MleResult {
    /// Trace-one estimate.
    pub chi: ProcessMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood `sum n_k ln p_k` after every accepted step, starting point first.
    pub log_likelihood: Vec<f64>,
}

fn log_likelihood(counts: &[f64], probs: &[f64]) -> f64 {
    counts
        .iter()
        .zip(probs)
        .filter(|(n, _)| **n > 0.0)
        .map(|(n, p)| if *p > 0.0 { n * p.ln() } else { f64::NEG_INFINITY })
        .sum()
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn normalize_trace(m: CMatrix) -> CMatrix {
    let tr = m.trace().re;
    m / C64::new(tr, 0.0)
}

/// Positive part of a Hermitian matrix, mixed with a little of the identity
/// so that the likelihood is finite everywhere, at unit trace.
fn positive_start(m: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(hermitize(m));
    let vals: Vec<f64> = eig.eigenvalues.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = vals.iter().sum();
    let n = m.nrows();
    if total <= 0.0 {
        return CMatrix::identity(n, n) / C64::new(n as f64, 0.0);
    }
    let mut diag = CMatrix::zeros(n, n);
    for (i, v) in vals.iter().enumerate() {
        diag[(i, i)] = C64::new(*v / total, 0.0);
    }
    let pos = &eig.eigenvectors * diag * eig.eigenvectors.adjoint();
    let mix = 1e-6;
    normalize_trace(hermitize(&pos) * C64::new(1.0 - mix, 0.0) + CMatrix::identity(n, n) * C64::new(mix / n as f64, 0.0))
}

/// Least-squares linear inversion from relative frequencies.
pub fn linear_inversion(counts: &[f64], design: &TomographyDesign) -> Result<CMatrix> {
    if counts.len() != design.cells() {
        return Err(Error::DimensionMismatch {
            expected: design.cells(),
            found: counts.len(),
        });
    }
    let n2 = CHOI_DIM * CHOI_DIM;
    let mut rhs = CVector::zeros(n2);
    for (k, &n) in counts.iter().enumerate() {
        if n == 0.0 {
            continue;
        }
        let v = design.vectors.column(k);
        for a in 0..CHOI_DIM {
            for b in 0..CHOI_DIM {
                rhs[a * CHOI_DIM + b] += v[a] * v[b].conj() * (n * DIM as f64);
            }
        }
    }
    let x = &design.frame_inverse * rhs;
    let m = CMatrix::from_fn(CHOI_DIM, CHOI_DIM, |a, b| x[a * CHOI_DIM + b]);
    Ok(hermitize(&m))
}

/// Maximum-likelihood estimate from a count table in design cell order.
/// Counts may be fractional, which allows exact expected counts.
pub fn mle_from_counts(counts: &[f64], design: &TomographyDesign, options: &MleOptions) -> Result<MleResult> {
    if counts.len() != design.cells() {
        return Err(Error::DimensionMismatch {
            expected: design.cells(),
            found: counts.len(),
        });
    }
    if counts.iter().any(|&n| !(n >= 0.0) || !n.is_finite()) {
        return Err(Error::IncompleteDataset("counts must be finite and non-negative".into()));
    }
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(Error::IncompleteDataset("dataset has no counts".into()));
    }

    let mut chi = match &options.initial {
        Some(init) => {
            if init.qubits() != QUBITS {
                return Err(Error::DimensionMismatch {
                    expected: QUBITS,
                    found: init.qubits(),
                });
            }
            positive_start(init.matrix())
        }
        None => positive_start(&linear_inversion(counts, design)?),
    };

    // Sum of d v v^dagger over all cells is c I, so with Tr chi = 1 the
    // fixed point of R = sum (n_k / p_k) d v v^dagger is R = (N / c) c I.
    let vectors = &design.vectors;
    let mut probs = probabilities_of(vectors, &chi);
    let mut ll = log_likelihood(counts, &probs);
    let mut history = vec![ll];
    let mut epsilon: f64 = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    let id = CMatrix::identity(CHOI_DIM, CHOI_DIM);

    while iterations < options.max_iterations {
        iterations += 1;
        let mut weighted = vectors.clone();
        for (k, mut col) in weighted.column_iter_mut().enumerate() {
            let w = if counts[k] > 0.0 {
                counts[k] / probs[k] * DIM as f64 / total
            } else {
                0.0
            };
            col *= C64::new(w, 0.0);
        }
        let r = &weighted * vectors.adjoint();

        let mut accepted = false;
        while epsilon > 1e-12 {
            let step = (&id + &r * C64::new(epsilon, 0.0)) / C64::new(1.0 + epsilon, 0.0);
            let candidate = normalize_trace(hermitize(&(&step * &chi * &step)));
            let cand_probs = probabilities_of(vectors, &candidate);
            let cand_ll = log_likelihood(counts, &cand_probs);
            if cand_ll >= ll {
                let gain = (cand_ll - ll) / total;
                chi = candidate;
                probs = cand_probs;
                ll = cand_ll;
                history.push(ll);
                accepted = true;
                if gain < options.tolerance {
                    converged = true;
                }
                break;
            }
            epsilon *= 0.5;
        }
        if !accepted {
            // No ascent direction left at machine precision.
            converged = true;
        }
        if converged {
            break;
        }
        epsilon = (epsilon * 2.0).min(1e8);
    }

    Ok(MleResult {
        chi: ProcessMatrix::new(chi, Normalization::TraceOne)?,
        iterations,
        converged,
        log_likelihood: history,
    })
}

/// Maximum-likelihood reconstruction of a single-phase dataset.
pub fn mle_reconstruct(
    dataset: &TomographyDataset,
    design: &TomographyDesign,
    options: &MleOptions,
) -> Result<MleResult> {
    mle_from_counts(&dataset.count_table(design)?, design, options)
}

/// Reconstruction from exact expected counts: the infinite-statistics limit.
pub fn mle_expected(channel: &ProcessMatrix, design: &TomographyDesign, options: &MleOptions) -> Result<MleResult> {
    let probs: Vec<f64> = design.probabilities(channel)?.into_iter().map(|p| p.max(0.0)).collect();
    mle_from_counts(&probs, design, options)
}

/// Mean and standard deviation of a fidelity over Monte Carlo trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityStats {
    pub mean: f64,
    pub std_dev: f64,
}

impl FidelityStats {
    fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            std_dev: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloStats {
    pub trials: usize,
    pub controlled: FidelityStats,
    pub replicas: FidelityStats,
}

/// Poisson resampling around the observed counts, with a full reconstruction
/// per trial. Trial `t` draws from RNG stream `t`.
pub fn monte_carlo_errors(
    dataset: &TomographyDataset,
    design: &TomographyDesign,
    trials: usize,
    phi: PhaseAngle,
    seed: u64,
    options: &MleOptions,
) -> Result<MonteCarloStats> {
    if trials < 2 {
        return Err(Error::InvalidParameter(format!("trials = {trials}, need at least 2")));
    }
    let observed = dataset.count_table(design)?;
    let cu = cu_phase(phi);
    let u = phase_gate(phi);
    let uu = u.kron(&u);
    let mut fc = Vec::with_capacity(trials);
    let mut fu = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng = rng_for(seed, t as u64);
        let counts: Vec<f64> = observed
            .iter()
            .map(|&n| poisson_draw(&mut rng, n) as f64)
            .collect();
        let est = mle_from_counts(&counts, design, options)?;
        fc.push(process_fidelity(&est.chi, &cu)?);
        fu.push(process_fidelity(&est.chi, &uu)?);
    }
    Ok(MonteCarloStats {
        trials,
        controlled: FidelityStats::from_samples(&fc),
        replicas: FidelityStats::from_samples(&fu),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub residual_rms: f64,
}

/// Least-squares fit of `A + B cos φ`.
pub fn fit_cosine(phases: &[f64], fidelities: &[f64]) -> Result<FitResult> {
    if phases.len() != fidelities.len() {
        return Err(Error::DimensionMismatch {
            expected: phases.len(),
            found: fidelities.len(),
        });
    }
    let n = phases.len() as f64;
    let (mut sc, mut scc, mut sy, mut scy) = (0.0, 0.0, 0.0, 0.0);
    for (&phi, &y) in phases.iter().zip(fidelities) {
        let c = phi.cos();
        sc += c;
        scc += c * c;
        sy += y;
        scy += c * y;
    }
    let det = n * scc - sc * sc;
    if phases.len() < 2 || det.abs() <= 1e-12 * n * n {
        return Err(Error::InvalidParameter(
            "cosine fit needs at least 2 phases with distinct cos φ".into(),
        ));
    }
    let b = (n * scy - sc * sy) / det;
    let a = (sy - b * sc) / n;
    let ss: f64 = phases
        .iter()
        .zip(fidelities)
        .map(|(&phi, &y)| (y - a - b * phi.cos()).powi(2))
        .sum();
    Ok(FitResult {
        a,
        b,
        residual_rms: (ss / n).sqrt(),
    })
}

/// Eight phases `kπ/4`, one full period.
pub fn default_phases() -> Vec<PhaseAngle> {
    PhaseAngle::uniform_grid(8)
}

#[derive(Debug, Clone)]
pub struct PhaseReport {
    pub phase_id: usize,
    pub phi: f64,
    /// Reconstructed trace-one process matrix.
    pub chi: ProcessMatrix,
    /// Ideal `CU(φ)` process matrix.
    pub chi_ideal: ProcessMatrix,
    pub controlled: f64,
    pub replicas: f64,
    /// Fidelities of the generating channel itself.
    pub model_controlled: f64,
    pub model_replicas: f64,
    pub mle_converged: bool,
    pub error_bars: Option<MonteCarloStats>,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub phases: Vec<PhaseReport>,
    pub dataset: TomographyDataset,
    pub fit: FitResult,
    pub mean_controlled: f64,
    pub mean_replicas: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub phases: Vec<PhaseAngle>,
    /// Expected counts per (input, setting) for the loss-free design point.
    pub rate: f64,
    /// Monte Carlo trials per phase; 0 skips error bars.
    pub trials: usize,
    pub seed: u64,
    pub mle: MleOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            phases: default_phases(),
            rate: 1e4,
            trials: 0,
            seed: 0,
            mle: MleOptions::default(),
        }
    }
}

/// Channel scaled so that `rate` counts per (input, setting) are expected
/// at the design point. Imperfect parameters lose coincidences relative to it.
fn counting_channel(phi: PhaseAngle, params: &OpticsParams) -> Result<ProcessMatrix> {
    let chi = replication_experiment_channel(phi, params)?;
    let reference = replication_experiment_channel(phi, &OpticsParams::ideal())?.trace();
    Ok(chi.scaled(1.0 / reference))
}

/// Simulated experiment: channel, counts, reconstruction, fidelities, error
/// bars and the cosine fit. Phase `k` uses RNG stream `k` for its counts and
/// seed `seed + 1 + k` for its Monte Carlo trials.
pub fn experiment_pipeline(params: &OpticsParams, config: &PipelineConfig) -> Result<PipelineReport> {
    params.validate()?;
    if config.phases.is_empty() {
        return Err(Error::InvalidParameter("empty phase grid".into()));
    }
    let design = default_design();
    let mut phases = Vec::with_capacity(config.phases.len());
    let mut dataset = TomographyDataset {
        records: Vec::new(),
        rate: Some(config.rate),
    };
    for (k, &phi) in config.phases.iter().enumerate() {
        let channel = counting_channel(phi, params)?;
        let data = simulate_counts(&channel, &design, config.rate, config.seed, k)?;
        let est = mle_reconstruct(&data, &design, &config.mle)?;
        let cu = cu_phase(phi);
        let u = phase_gate(phi);
        let uu = u.kron(&u);
        let error_bars = if config.trials > 0 {
            let opts = MleOptions {
                initial: Some(est.chi.clone()),
                ..config.mle.clone()
            };
            Some(monte_carlo_errors(
                &data,
                &design,
                config.trials,
                phi,
                config.seed.wrapping_add(1 + k as u64),
                &opts,
            )?)
        } else {
            None
        };
        phases.push(PhaseReport {
            phase_id: k,
            phi: phi.radians(),
            controlled: process_fidelity(&est.chi, &cu)?,
            replicas: process_fidelity(&est.chi, &uu)?,
            model_controlled: process_fidelity(&channel, &cu)?,
            model_replicas: process_fidelity(&channel, &uu)?,
            chi_ideal: choi_of_unitary(&cu),
            chi: est.chi,
            mle_converged: est.converged,
            error_bars,
        });
        dataset.records.extend(data.records);
    }
    let xs: Vec<f64> = phases.iter().map(|p| p.phi).collect();
    let ys: Vec<f64> = phases.iter().map(|p| p.replicas).collect();
    let n = phases.len() as f64;
    let mean_controlled = phases.iter().map(|p| p.controlled).sum::<f64>() / n;
    let mean_replicas = ys.iter().sum::<f64>() / n;
    let fit = if phases.len() >= 2 {
        fit_cosine(&xs, &ys)?
    } else {
        FitResult {
            a: mean_replicas,
            b: 0.0,
            residual_rms: 0.0,
        }
    };
    Ok(PipelineReport {
        phases,
        dataset,
        fit,
        mean_controlled,
        mean_replicas,
    })
}
