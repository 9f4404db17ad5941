//! Python bindings. Every computing call takes a `Config` for its numerical
//! parameters and releases the GIL while it runs.

use std::sync::Arc;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use quasispec::lattice::{diophantine_report, min_shift_norm};
use quasispec::synthesis::eigenfunction;
use quasispec::{
    assemble, branch_pair, is_resonant, nonresonant_fraction, run_multiscale, swiss_cheese, trace_curve, Error,
    ExperimentConfig, LatticeIndex, MomentumPoint, MultiscaleOutcome, PotentialSpec, SpectralPair, TruncationSet,
};

create_exception!(pyquasispec, ResonantError, PyException, "The momentum is resonant at some level.");

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        Error::Parse(_)
        | Error::InvalidFrequency(_)
        | Error::InvalidSchedule(_)
        | Error::InvalidPotential(_)
        | Error::NonHermitianPotential
        | Error::InvalidArgument(_)
        | Error::GridCap { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn momentum(k: (f64, f64)) -> PyResult<MomentumPoint> {
    MomentumPoint::new(k.0, k.1).map_err(err)
}

type Index = (i64, i64, i64, i64);

fn index(i: &LatticeIndex) -> Index {
    (i.p[0], i.p[1], i.m[0], i.m[1])
}

/// A validated experiment config.
#[pyclass(frozen, module = "pyquasispec")]
struct Config {
    inner: ExperimentConfig,
    spec: PotentialSpec,
}

impl Config {
    fn new(inner: ExperimentConfig) -> PyResult<Self> {
        let inner = inner.checked().map_err(|v| {
            PyValueError::new_err(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "))
        })?;
        let spec = inner.valid_spec().map_err(err)?;
        Ok(Self { inner, spec })
    }
}

#[pymethods]
impl Config {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::new(ExperimentConfig::from_json(text).map_err(err)?)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Self::new(ExperimentConfig::load(path).map_err(err)?)
    }

    /// Violations of a config text as `(key, message)` pairs, without raising.
    #[staticmethod]
    fn check(text: &str) -> PyResult<Vec<(String, String)>> {
        let c = ExperimentConfig::from_json(text).map_err(err)?;
        Ok(c.validate().into_iter().map(|v| (v.key, v.message)).collect())
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    fn to_json(&self) -> String {
        self.inner.canonical_json()
    }

    #[getter]
    fn potential(&self) -> Potential {
        Potential { inner: self.spec.clone() }
    }

    #[getter]
    fn levels(&self) -> u32 {
        self.inner.levels
    }

    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.inner.lambdas.clone()
    }

    fn __repr__(&self) -> String {
        format!("Config(hash={:?})", self.inner.hash())
    }
}

/// The quasi-periodic potential `V`.
#[pyclass(frozen, module = "pyquasispec")]
struct Potential {
    inner: PotentialSpec,
}

#[pymethods]
impl Potential {
    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.freq.value()
    }

    #[getter]
    fn order(&self) -> u32 {
        self.inner.order
    }

    #[getter]
    fn cutoff(&self) -> u32 {
        self.inner.cutoff
    }

    #[getter]
    fn coupling(&self) -> f64 {
        self.inner.coupling
    }

    /// `(p1, p2, m1, m2) → V_s`, unscaled by the coupling.
    fn coefficients(&self) -> Vec<(Index, Complex64)> {
        self.inner.coeffs.iter().map(|(k, v)| (index(k), *v)).collect()
    }

    /// `g·V(x)`.
    fn __call__(&self, x1: f64, x2: f64) -> Complex64 {
        self.inner.evaluate([x1, x2])
    }

    /// `H(k)` over the box `‖p‖∞ ≤ p_radius, ‖m‖∞ ≤ m_radius`, with its row indices.
    fn matrix(&self, py: Python<'_>, k: (f64, f64), p_radius: i64, m_radius: i64) -> PyResult<(Vec<Index>, Vec<Vec<Complex64>>)> {
        let k = momentum(k)?;
        let set = Arc::new(TruncationSet::from_box(0, p_radius, m_radius));
        let h = py.detach(|| assemble(&self.inner, k, &set)).map_err(err)?;
        let rows = (0..h.dim()).map(|i| (0..h.dim()).map(|j| h.entry(i, j)).collect()).collect();
        Ok((set.indices().iter().map(index).collect(), rows))
    }

    /// Smallest `|p + αm|` over nonzero indices in the box, with its minimiser.
    fn min_shift(&self, p_radius: i64, m_radius: i64) -> Option<(f64, Index)> {
        let set = TruncationSet::from_box(0, p_radius, m_radius);
        min_shift_norm(&set, &self.inner.freq).map(|(d, i)| (d, index(&i)))
    }

    /// `(box, min_norm, minimiser)` for boxes `1..=max_box`.
    fn diophantine(&self, max_box: u32) -> Vec<(u32, f64, Index)> {
        diophantine_report(&self.inner.freq, max_box)
            .into_iter()
            .map(|r| (r.box_size, r.min_norm, index(&r.minimizer)))
            .collect()
    }
}

/// An eigenpair `(λ⁽ⁿ⁾(k), u⁽ⁿ⁾)` followed to some level.
#[pyclass(frozen, module = "pyquasispec")]
struct Pair {
    inner: SpectralPair,
    config: Arc<ExperimentConfig>,
}

#[pymethods]
impl Pair {
    #[getter]
    fn level(&self) -> u32 {
        self.inner.level
    }

    #[getter]
    fn k(&self) -> (f64, f64) {
        (self.inner.k.k[0], self.inner.k.k[1])
    }

    #[getter]
    fn eigenvalue(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn gap(&self) -> f64 {
        self.inner.gap
    }

    fn coefficients(&self) -> Vec<(Index, Complex64)> {
        self.inner.set.indices().iter().zip(&self.inner.coeffs).map(|(i, c)| (index(i), *c)).collect()
    }

    /// `Ψ(x)`.
    fn __call__(&self, x1: f64, x2: f64) -> PyResult<Complex64> {
        let freq = self.config.frequency().map_err(err)?;
        Ok(eigenfunction(&self.inner, &freq, self.config.convention, [x1, x2]))
    }

    fn __repr__(&self) -> String {
        format!("Pair(level={}, k={:?}, eigenvalue={})", self.inner.level, self.inner.k.k, self.inner.lambda)
    }
}

/// Level rows `(n, λ, diff, l1_increment, residual_next, (gx, gy))` of the chain at `k`.
#[pyfunction]
#[pyo3(signature = (config, k, levels=None))]
fn converge(py: Python<'_>, config: &Config, k: (f64, f64), levels: Option<u32>) -> PyResult<Vec<(u32, f64, f64, f64, f64, (f64, f64))>> {
    let k = momentum(k)?;
    let c = &config.inner;
    let levels = levels.unwrap_or(c.levels);
    match py.detach(|| run_multiscale(&config.spec, k, levels, &c.schedule, &c.selection)).map_err(err)? {
        MultiscaleOutcome::Converged(r) => Ok(r
            .rows
            .iter()
            .map(|r| (r.level, r.lambda, r.diff, r.l1_increment, r.residual_next, (r.gradient[0], r.gradient[1])))
            .collect()),
        MultiscaleOutcome::Resonant { level, witness } => Err(ResonantError::new_err(format!(
            "resonant at level {level}: overlap {}, gap {}",
            witness.overlap, witness.gap
        ))),
    }
}

#[pyfunction]
#[pyo3(signature = (config, k, level=None))]
fn pair(py: Python<'_>, config: &Config, k: (f64, f64), level: Option<u32>) -> PyResult<Pair> {
    let k = momentum(k)?;
    let c = &config.inner;
    let level = level.unwrap_or(c.levels);
    match py.detach(|| branch_pair(&config.spec, k, level, &c.schedule, &c.selection)).map_err(err)? {
        Ok(p) => Ok(Pair { inner: p, config: Arc::new(c.clone()) }),
        Err(w) => Err(ResonantError::new_err(format!("resonant at level {}: overlap {}, gap {}", w.level, w.overlap, w.gap))),
    }
}

/// Whether `k` is resonant at `level` for the reference energy `lam`.
#[pyfunction]
fn resonant(py: Python<'_>, config: &Config, k: (f64, f64), lam: f64, level: u32) -> PyResult<bool> {
    let k = momentum(k)?;
    let c = &config.inner;
    let v = py.detach(|| is_resonant(&config.spec, k, lam, level, &c.schedule, &c.thresholds)).map_err(err)?;
    Ok(v.resonant)
}

/// Arcs `(start, end)` of the angle sets `B₁ ⊇ … ⊇ B_levels`.
#[pyfunction]
#[pyo3(signature = (config, lam, levels=None))]
fn cheese(py: Python<'_>, config: &Config, lam: f64, levels: Option<u32>) -> PyResult<Vec<Vec<(f64, f64)>>> {
    let c = &config.inner;
    let levels = levels.unwrap_or(c.levels);
    let sets = py
        .detach(|| {
            swiss_cheese(&config.spec, lam, levels, c.grids.phi_resolution, &c.schedule, &c.thresholds, &c.selection, &c.radial)
        })
        .map_err(err)?;
    Ok(sets.iter().map(|s| s.arcs().iter().map(|a| (a.start, a.end)).collect()).collect())
}

/// Samples `(φ, κ, dκ/dφ, residual)` of the isoenergetic curve on `B_level`.
#[pyfunction]
#[pyo3(signature = (config, lam, level=1))]
fn isocurve(py: Python<'_>, config: &Config, lam: f64, level: u32) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let c = &config.inner;
    let curve = py
        .detach(|| {
            let sets = swiss_cheese(&config.spec, lam, level, c.grids.phi_resolution, &c.schedule, &c.thresholds, &c.selection, &c.radial)?;
            let b = sets.last().expect("at least one level");
            trace_curve(&config.spec, lam, level, b, c.grids.phi_resolution, &c.schedule, &c.selection, &c.radial)
        })
        .map_err(err)?;
    Ok(curve.samples.iter().map(|s| (s.phi, s.kappa, s.dkappa_dphi, s.residual)).collect())
}

/// `(fraction, ci_low, ci_high)` of non-resonant samples in the disk or annulus of `radius`.
#[pyfunction]
#[pyo3(signature = (config, radius, level=1))]
fn fraction(py: Python<'_>, config: &Config, radius: f64, level: u32) -> PyResult<(f64, f64, f64)> {
    let c = &config.inner;
    let seed = c.seed.ok_or_else(|| PyValueError::new_err("seed: required for Monte Carlo sampling"))?;
    let f = py
        .detach(|| {
            nonresonant_fraction(&config.spec, radius, level, c.grids.fraction_samples, seed, c.grids.annulus, &c.schedule, &c.thresholds, &c.selection)
        })
        .map_err(err)?;
    Ok((f.fraction, f.ci_low, f.ci_high))
}

#[pymodule]
fn pyquasispec(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Config>()?;
    m.add_class::<Potential>()?;
    m.add_class::<Pair>()?;
    m.add("ResonantError", m.py().get_type::<ResonantError>())?;
    m.add_function(wrap_pyfunction!(converge, m)?)?;
    m.add_function(wrap_pyfunction!(pair, m)?)?;
    m.add_function(wrap_pyfunction!(resonant, m)?)?;
    m.add_function(wrap_pyfunction!(cheese, m)?)?;
    m.add_function(wrap_pyfunction!(isocurve, m)?)?;
    m.add_function(wrap_pyfunction!(fraction, m)?)?;
    Ok(())
}
