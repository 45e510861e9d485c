//! Run configuration: a TOML file plus command-line overrides.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use superrep_core::gates::PhaseAngle;
use superrep_core::optics::{OpticsParams, ScanParameter};

use crate::CliError;

/// Written into `--help` and validation errors.
pub const SCHEMA_HINT: &str = "\
configuration schema (TOML, unknown keys rejected):
  seed = <u64>                      out_dir = \"<path>\"        svg = <bool>
  phases = <count> | [<radians>, ...]
  max_qubits = <1..=24>
  [optics]   preset = \"ideal\" | \"measured\"; r_v, r_h, visibility, phase_jitter_sigma = <f64>
  [replicate] twirl_grid = <n >= 2>
  [superrep] alpha = <f64 > 0>; copies = [<n>, ...]; pairs = [[<N>, <M>], ...]; phase_points = <n >= 1>
  [tomo]     rate = <f64 > 0>; trials = <n>; max_iterations = <n>; tolerance = <f64>
  [scan]     parameter = \"r_v\" | \"r_h\" | \"visibility\" | \"phase_jitter\"; values = [<f64>, ...]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Ideal,
    Measured,
}

/// Either a number of uniformly spaced phases over one period or an
/// explicit list in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhaseGrid {
    Count(usize),
    List(Vec<f64>),
}

impl PhaseGrid {
    pub fn angles(&self) -> Vec<PhaseAngle> {
        match self {
            PhaseGrid::Count(n) => PhaseAngle::uniform_grid(*n),
            PhaseGrid::List(xs) => xs.iter().map(|&x| PhaseAngle::new(x)).collect(),
        }
    }

    /// Parses `8`, `pi`, `3pi/4` or a comma-separated list of such terms. A
    /// lone integer is a count; anything else is a list of angles.
    pub fn parse(text: &str) -> Result<Self, String> {
        let text = text.trim();
        if let Ok(n) = text.parse::<usize>() {
            return Ok(PhaseGrid::Count(n));
        }
        text.split(',')
            .map(|t| parse_angle(t.trim()))
            .collect::<Result<Vec<_>, _>>()
            .map(PhaseGrid::List)
    }
}

fn parse_angle(term: &str) -> Result<f64, String> {
    let bad = || format!("cannot parse phase '{term}' (use radians, 'pi', '3pi/4', ...)");
    let lower = term.to_ascii_lowercase();
    let Some(idx) = lower.find("pi") else {
        return lower.parse::<f64>().map_err(|_| bad());
    };
    let coeff = lower[..idx].trim_end_matches('*');
    let coeff = match coeff {
        "" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    let rest = &lower[idx + 2..];
    let denom = if rest.is_empty() {
        1.0
    } else {
        rest.strip_prefix('/')
            .ok_or_else(bad)?
            .parse::<f64>()
            .map_err(|_| bad())?
    };
    Ok(coeff * PI / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticsSection {
    pub preset: Preset,
    pub r_v: Option<f64>,
    pub r_h: Option<f64>,
    pub visibility: Option<f64>,
    pub phase_jitter_sigma: Option<f64>,
}

impl Default for OpticsSection {
    fn default() -> Self {
        Self {
            preset: Preset::Measured,
            r_v: None,
            r_h: None,
            visibility: None,
            phase_jitter_sigma: None,
        }
    }
}

impl OpticsSection {
    pub fn params(&self) -> OpticsParams {
        let mut p = match self.preset {
            Preset::Ideal => OpticsParams::ideal(),
            Preset::Measured => OpticsParams::measured(0.0),
        };
        if let Some(x) = self.r_v {
            p.r_v = x;
        }
        if let Some(x) = self.r_h {
            p.r_h = x;
        }
        if let Some(x) = self.visibility {
            p.visibility = x;
        }
        if let Some(x) = self.phase_jitter_sigma {
            p.phase_jitter_sigma = x;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplicateSection {
    pub twirl_grid: usize,
}

impl Default for ReplicateSection {
    fn default() -> Self {
        Self { twirl_grid: 360 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuperrepSection {
    pub alpha: f64,
    pub copies: Vec<usize>,
    /// Explicit `[N, M]` rows; replaces `copies` when present.
    pub pairs: Option<Vec<[usize; 2]>>,
    pub phase_points: usize,
}

impl Default for SuperrepSection {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            copies: vec![1, 2, 4, 9, 16, 25],
            pairs: None,
            phase_points: 720,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomoSection {
    pub rate: f64,
    pub trials: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for TomoSection {
    fn default() -> Self {
        Self {
            rate: 1e4,
            trials: 0,
            max_iterations: 5000,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    /// `None` scans every parameter over its default range.
    pub parameter: Option<ScanParameter>,
    pub values: Option<Vec<f64>>,
}

pub fn default_scan_values(parameter: ScanParameter) -> Vec<f64> {
    let (lo, hi) = match parameter {
        ScanParameter::RV => (0.5, 0.8),
        ScanParameter::RH => (0.0, 0.1),
        ScanParameter::Visibility => (0.8, 1.0),
        ScanParameter::PhaseJitter => (0.0, 0.8),
    };
    (0..=20).map(|i| lo + (hi - lo) * i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Not part of the config hash: results do not depend on where they land.
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
    pub svg: bool,
    pub phases: PhaseGrid,
    /// Largest `N + M` register for which the superrep command builds and
    /// checks the imprinting permutation.
    pub max_qubits: usize,
    pub optics: OpticsSection,
    pub replicate: ReplicateSection,
    pub superrep: SuperrepSection,
    pub tomo: TomoSection,
    pub scan: ScanSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: None,
            svg: false,
            phases: PhaseGrid::Count(8),
            max_qubits: 16,
            optics: OpticsSection::default(),
            replicate: ReplicateSection::default(),
            superrep: SuperrepSection::default(),
            tomo: TomoSection::default(),
            scan: ScanSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("invalid config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Validation(msg));
        let phases = self.phases.angles();
        if phases.is_empty() {
            return fail("phase grid is empty".into());
        }
        if let PhaseGrid::List(xs) = &self.phases {
            if xs.iter().any(|x| !x.is_finite()) {
                return fail("phases must be finite".into());
            }
        }
        if self.max_qubits == 0 || self.max_qubits > 24 {
            return fail(format!("max_qubits = {} outside 1..=24", self.max_qubits));
        }
        self.optics
            .params()
            .validate()
            .map_err(|e| CliError::Validation(format!("optics: {e}")))?;
        if self.replicate.twirl_grid < 2 {
            return fail("replicate.twirl_grid must be at least 2".into());
        }
        if !(self.superrep.alpha > 0.0) || !self.superrep.alpha.is_finite() {
            return fail(format!("superrep.alpha = {} must be > 0", self.superrep.alpha));
        }
        if self.superrep.copies.is_empty() || self.superrep.copies.contains(&0) {
            return fail("superrep.copies must be a non-empty list of positive integers".into());
        }
        if let Some(pairs) = &self.superrep.pairs {
            if pairs.is_empty() || pairs.iter().any(|p| p[0] == 0 || p[1] == 0) {
                return fail("superrep.pairs must be a non-empty list of positive [N, M]".into());
            }
        }
        if self.superrep.phase_points == 0 {
            return fail("superrep.phase_points must be positive".into());
        }
        if !(self.tomo.rate > 0.0) || !self.tomo.rate.is_finite() {
            return fail(format!("tomo.rate = {} must be > 0", self.tomo.rate));
        }
        if self.tomo.trials == 1 {
            return fail("tomo.trials must be 0 (no error bars) or at least 2".into());
        }
        if self.tomo.max_iterations == 0 || !(self.tomo.tolerance > 0.0) {
            return fail("tomo.max_iterations and tomo.tolerance must be positive".into());
        }
        if let Some(values) = &self.scan.values {
            if values.is_empty() {
                return fail("scan.values is empty".into());
            }
            if self.scan.parameter.is_none() {
                return fail("scan.values requires scan.parameter".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_terms() {
        assert_eq!(PhaseGrid::parse("8").unwrap(), PhaseGrid::Count(8));
        let PhaseGrid::List(xs) = PhaseGrid::parse("pi, 3pi/4, -pi/2, 0.5, 2*pi").unwrap() else {
            panic!()
        };
        let expected = [PI, 0.75 * PI, -0.5 * PI, 0.5, 2.0 * PI];
        for (a, b) in xs.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(PhaseGrid::parse("pie").is_err());
        assert!(PhaseGrid::parse("x").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 1").is_err());
        assert!(toml::from_str::<RunConfig>("[tomo]\nrat = 1.0").is_err());
        let c: RunConfig = toml::from_str("phases = [3.0]\n[optics]\npreset = \"ideal\"").unwrap();
        assert_eq!(c.phases, PhaseGrid::List(vec![3.0]));
        assert_eq!(c.optics.params(), OpticsParams::ideal());
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        let mut c = RunConfig::default();
        c.superrep.alpha = 0.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.optics.visibility = Some(1.5);
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.phases = PhaseGrid::Count(0);
        assert!(c.validate().is_err());
    }
}
