//! Declarative experiment configuration and run manifests.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::isoenergetic::RadialParams;
use crate::lattice::{box_cardinality, Frequency, FrequencyKind, GrowthSchedule, LatticeIndex};
use crate::potential::{PotentialSpec, Violation};
use crate::resonance::{Thresholds, MIN_PHI_RESOLUTION};
use crate::spectral::SelectionParams;
use crate::synthesis::{Convention, Grid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientEntry {
    pub s1: [i64; 2],
    pub s2: [i64; 2],
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub frequency: FrequencyKind,
    /// Assumed irrationality measure of `α`.
    #[serde(default)]
    pub mu: Option<f64>,
    pub order: u32,
    pub cutoff: u32,
    pub coupling: f64,
    #[serde(default = "yes")]
    pub real_valued: bool,
    pub coefficients: Vec<CoefficientEntry>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    /// Angle samples `N` for carving and curve tracing.
    pub phi_resolution: usize,
    /// Side of the square momentum grid used by oracle scans.
    pub k_grid: usize,
    pub spatial: Grid,
    pub grid_cap: usize,
    pub fraction_samples: usize,
    pub fraction_radii: Vec<f64>,
    #[serde(default)]
    pub annulus: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub potential: PotentialConfig,
    pub schedule: GrowthSchedule,
    pub thresholds: Thresholds,
    pub selection: SelectionParams,
    pub radial: RadialParams,
    pub grids: Grids,
    #[serde(default)]
    pub convention: Convention,
    pub lambdas: Vec<f64>,
    pub levels: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub output_dir: String,
}

/// One semantic problem, tagged with the offending key path.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigViolation {
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

fn violation(key: impl Into<String>, message: impl Into<String>) -> ConfigViolation {
    ConfigViolation {
        key: key.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Syntax-level parse; semantic checks are separate.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Canonical serialization, the input of [`Self::hash`].
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn frequency(&self) -> Result<Frequency> {
        let f = Frequency::from_kind(self.potential.frequency)?;
        match self.potential.mu {
            Some(mu) => f.with_mu(mu),
            None => Ok(f),
        }
    }

    /// The potential, without validation.
    pub fn spec(&self) -> Result<PotentialSpec> {
        let p = &self.potential;
        let mut spec = PotentialSpec::new(self.frequency()?, p.order, p.cutoff).with_coupling(p.coupling);
        spec.real_valued = p.real_valued;
        for c in &p.coefficients {
            spec = spec.with_coefficient(c.s1, c.s2, Complex64::new(c.re, c.im));
        }
        Ok(spec)
    }

    /// The potential, rejecting any violation.
    pub fn valid_spec(&self) -> Result<PotentialSpec> {
        let spec = self.spec()?;
        let v = spec.validate();
        if v.is_empty() {
            Ok(spec)
        } else {
            Err(Error::InvalidPotential(v))
        }
    }

    /// Every semantic violation, each naming its key.
    pub fn validate(&self) -> Vec<ConfigViolation> {
        let mut out = Vec::new();
        self.validate_potential(&mut out);
        if let Err(e) = self.schedule.validate() {
            out.push(violation("schedule", e.to_string()));
        } else if let Some(radii) = &self.schedule.radii {
            for (i, r) in radii.iter().enumerate() {
                let dim = box_cardinality(r[0] as i64, r[1] as i64);
                if dim > self.schedule.max_dim {
                    out.push(violation(
                        format!("schedule.radii[{i}]"),
                        format!("dimension {dim} exceeds max_dim {}", self.schedule.max_dim),
                    ));
                }
            }
        }
        if self.schedule.max_dim == 0 {
            out.push(violation("schedule.max_dim", "must be positive"));
        }
        let t = &self.thresholds;
        if let Some(d) = t.delta1 {
            if !(d >= 0.0 && d.is_finite()) {
                out.push(violation("thresholds.delta1", format!("{d} must be finite and ≥ 0")));
            }
        }
        if !(t.rho > 0.0 && t.rho.is_finite()) {
            out.push(violation("thresholds.rho", format!("{} must be positive", t.rho)));
        }
        if !(t.eps0 >= 0.0 && t.eps0.is_finite()) {
            out.push(violation("thresholds.eps0", format!("{} must be ≥ 0", t.eps0)));
        }
        let s = &self.selection;
        if !(s.overlap_floor > 0.0 && s.overlap_floor < 1.0) {
            out.push(violation("selection.overlap_floor", "must lie in (0, 1)"));
        }
        if !(s.gap_floor > 0.0 && s.gap_floor.is_finite()) {
            out.push(violation("selection.gap_floor", "must be positive"));
        }
        let r = &self.radial;
        if !(r.eta > 0.0 && r.eta < 1.0) {
            out.push(violation("radial.eta", "must lie in (0, 1)"));
        }
        if r.monotone_checks < 2 {
            out.push(violation("radial.monotone_checks", "must be ≥ 2"));
        }
        if !(r.radial_floor > 0.0 && r.radial_floor.is_finite()) {
            out.push(violation("radial.radial_floor", "must be positive"));
        }
        let g = &self.grids;
        if g.phi_resolution < MIN_PHI_RESOLUTION {
            out.push(violation("grids.phi_resolution", format!("must be ≥ {MIN_PHI_RESOLUTION}")));
        }
        if g.k_grid == 0 {
            out.push(violation("grids.k_grid", "must be positive"));
        }
        if g.spatial.is_empty() {
            out.push(violation("grids.spatial", "empty grid"));
        }
        if g.grid_cap == 0 {
            out.push(violation("grids.grid_cap", "must be positive"));
        } else if g.spatial.len() > g.grid_cap {
            out.push(violation("grids.spatial", format!("{} points exceed grid_cap", g.spatial.len())));
        }
        if g.fraction_samples == 0 {
            out.push(violation("grids.fraction_samples", "must be positive"));
        }
        for (i, r) in g.fraction_radii.iter().enumerate() {
            if !(*r > 0.0 && r.is_finite()) {
                out.push(violation(format!("grids.fraction_radii[{i}]"), "must be positive"));
            }
        }
        if self.lambdas.is_empty() {
            out.push(violation("lambdas", "at least one energy is required"));
        }
        for (i, l) in self.lambdas.iter().enumerate() {
            if !(*l > 0.0 && l.is_finite()) {
                out.push(violation(format!("lambdas[{i}]"), format!("{l} must be positive")));
            }
        }
        if self.levels < 1 {
            out.push(violation("levels", "must be ≥ 1"));
        } else if let Some(n) = self.schedule.levels() {
            if (self.levels as usize) > n {
                out.push(violation("levels", format!("schedule lists only {n} levels")));
            }
        }
        out
    }

    fn validate_potential(&self, out: &mut Vec<ConfigViolation>) {
        let p = &self.potential;
        if let Err(e) = self.frequency() {
            out.push(violation("potential.frequency", e.to_string()));
            return;
        }
        let mut seen: BTreeMap<LatticeIndex, usize> = BTreeMap::new();
        for (i, c) in p.coefficients.iter().enumerate() {
            let key = LatticeIndex::new(c.s1, c.s2);
            if let Some(first) = seen.insert(key, i) {
                out.push(violation(
                    format!("potential.coefficients[{i}]"),
                    format!("key {key} already given at index {first}"),
                ));
            }
        }
        let spec = match self.spec() {
            Ok(s) => s,
            Err(e) => {
                out.push(violation("potential", e.to_string()));
                return;
            }
        };
        for v in spec.validate() {
            let key = match &v {
                Violation::ConstantTerm => seen.get(&LatticeIndex::ZERO).map(|i| format!("potential.coefficients[{i}]")),
                Violation::CutoffExceeded { key, .. }
                | Violation::MissingPartner { key }
                | Violation::NotHermitian { key }
                | Violation::NonFiniteCoefficient { key } => seen.get(key).map(|i| format!("potential.coefficients[{i}]")),
                Violation::NonFiniteCoupling => Some("potential.coupling".into()),
                Violation::OrderTooLow { .. } => Some("potential.order".into()),
                Violation::ZeroCutoff => Some("potential.cutoff".into()),
            };
            out.push(violation(key.unwrap_or_else(|| "potential".into()), v.to_string()));
        }
    }

    /// A config whose every check passes.
    pub fn checked(self) -> std::result::Result<Self, Vec<ConfigViolation>> {
        let v = self.validate();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(v)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifact_version: String,
    pub subcommand: String,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig, subcommand: &str) -> Self {
        Self {
            config_hash: config.hash(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}
