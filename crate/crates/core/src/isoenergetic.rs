//! Radial parametrization `k = κₙ(λ, φ)·ν(φ)` of the isoenergetic curves
//! `Dₙ(λ) = {k : λ⁽ⁿ⁾(k) = λ}` and the Swiss-cheese sequence `Bₙ(λ)`.
//!
//! Roots are found for the deviation `δ = κ − λ^{1/2l}` rather than for `κ`
//! itself: the residual `λ⁽ⁿ⁾(κν) − λ = λ·expm1(2l·ln1p(δ/κ₀)) + σ(κν)`, with
//! `σ` the branch's level shift, keeps full relative precision in `δ` even
//! when `δ` is far below the resolution of `κ`.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arcs::AngleSet;
use crate::error::{Error, Result};
use crate::hamiltonian::MomentumPoint;
use crate::lattice::{dual_vector, GrowthSchedule};
use crate::potential::PotentialSpec;
use crate::resonance::{carve_cheese, Thresholds};
use crate::spectral::{branch_pair, gradient, ResonantWitness, SelectionParams, SpectralPair};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialParams {
    /// Relative bracket half-width `η` around `λ^{1/2l}`.
    pub eta: f64,
    /// Number of equally spaced probes used to certify radial monotonicity.
    #[serde(default = "default_checks")]
    pub monotone_checks: usize,
    /// Floor on `∇λ·ν` relative to the free value `2l·κ^{2l−1}`.
    #[serde(default = "default_radial_floor")]
    pub radial_floor: f64,
}

fn default_checks() -> usize {
    10
}

fn default_radial_floor() -> f64 {
    0.1
}

impl Default for RadialParams {
    fn default() -> Self {
        Self {
            eta: 0.2,
            monotone_checks: default_checks(),
            radial_floor: default_radial_floor(),
        }
    }
}

/// Root certificate tolerance `|λ⁽ⁿ⁾(κν) − λ| ≤ ROOT_TOL·λ`.
pub const ROOT_TOL: f64 = 1e-9;

const MAX_NEWTON: usize = 80;

#[derive(Clone, Debug)]
pub struct RadialRoot {
    pub phi: f64,
    pub kappa: f64,
    /// `κ − λ^{1/2l}`, computed without cancellation.
    pub deviation: f64,
    /// `λ⁽ⁿ⁾(κν) − λ` at the root.
    pub residual: f64,
    pub pair: SpectralPair,
}

#[derive(Clone, Debug)]
pub enum RadialOutcome {
    Root(RadialRoot),
    NoRoot {
        kappa_lo: f64,
        kappa_hi: f64,
        residual_lo: f64,
        residual_hi: f64,
    },
    /// The branch could not be continued at some probe.
    Resonant { kappa: f64, witness: ResonantWitness },
    /// The probes along the bracket were not strictly increasing.
    NotMonotone { kappa: f64 },
}

impl RadialOutcome {
    pub fn root(self) -> Option<RadialRoot> {
        match self {
            RadialOutcome::Root(r) => Some(r),
            _ => None,
        }
    }
}

/// Residual of the branch along one ray, parametrized by the deviation.
struct Ray<'a> {
    spec: &'a PotentialSpec,
    lambda: f64,
    phi: f64,
    kappa0: f64,
    level: u32,
    schedule: &'a GrowthSchedule,
    selection: &'a SelectionParams,
}

struct Probe {
    residual: f64,
    slope: f64,
    pair: SpectralPair,
}

impl Ray<'_> {
    fn kappa(&self, dev: f64) -> f64 {
        self.kappa0 + dev
    }

    fn eval(&self, dev: f64) -> Result<std::result::Result<Probe, ResonantWitness>> {
        let kappa = self.kappa(dev);
        let k = MomentumPoint::polar(kappa, self.phi)?;
        let pair = match branch_pair(self.spec, k, self.level, self.schedule, self.selection)? {
            Ok(p) => p,
            Err(w) => return Ok(Err(w)),
        };
        let two_l = 2.0 * self.spec.order as f64;
        let free_excess = self.lambda * (two_l * (dev / self.kappa0).ln_1p()).exp_m1();
        let residual = free_excess + pair.level_shift;
        let slope = match gradient(self.spec, &pair, self.selection) {
            Ok(g) => g[0] * self.phi.cos() + g[1] * self.phi.sin(),
            Err(Error::NearDegenerate { .. }) => f64::NAN,
            Err(e) => return Err(e),
        };
        Ok(Ok(Probe { residual, slope, pair }))
    }
}

/// Solves `λ⁽ⁿ⁾(κν(φ)) = λ` for `κ ∈ [κ₀(1−η), κ₀(1+η)]`, `κ₀ = λ^{1/2l}`.
#[allow(clippy::too_many_arguments)]
pub fn radial_solve(
    spec: &PotentialSpec,
    lambda: f64,
    phi: f64,
    level: u32,
    schedule: &GrowthSchedule,
    selection: &SelectionParams,
    radial: &RadialParams,
) -> Result<RadialOutcome> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("energy {lambda} must be positive")));
    }
    if !(radial.eta > 0.0 && radial.eta < 1.0) || radial.monotone_checks < 2 {
        return Err(Error::InvalidArgument(format!("bad radial parameters {radial:?}")));
    }
    let ray = Ray {
        spec,
        lambda,
        phi,
        kappa0: lambda.powf(1.0 / (2.0 * spec.order as f64)),
        level,
        schedule,
        selection,
    };
    let lo = -radial.eta * ray.kappa0;
    let hi = radial.eta * ray.kappa0;
    let n = radial.monotone_checks;
    let mut probes: Vec<(f64, f64)> = Vec::with_capacity(n);
    for i in 0..n {
        let dev = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        match ray.eval(dev)? {
            Ok(p) => probes.push((dev, p.residual)),
            Err(witness) => {
                return Ok(RadialOutcome::Resonant {
                    kappa: ray.kappa(dev),
                    witness,
                })
            }
        }
    }
    if let Some(w) = probes.windows(2).find(|w| !(w[1].1 > w[0].1)) {
        return Ok(RadialOutcome::NotMonotone {
            kappa: ray.kappa(w[1].0),
        });
    }
    let (first, last) = (probes[0], probes[n - 1]);
    if first.1 > 0.0 || last.1 < 0.0 {
        return Ok(RadialOutcome::NoRoot {
            kappa_lo: ray.kappa(first.0),
            kappa_hi: ray.kappa(last.0),
            residual_lo: first.1,
            residual_hi: last.1,
        });
    }
    let i = probes
        .windows(2)
        .position(|w| w[0].1 <= 0.0 && w[1].1 >= 0.0)
        .expect("monotone probes straddle zero");
    let (a, b) = (probes[i], probes[i + 1]);
    let guess = if b.1 == a.1 {
        0.5 * (a.0 + b.0)
    } else {
        a.0 - a.1 * (b.0 - a.0) / (b.1 - a.1)
    };
    refine(&ray, guess, Some((a.0, b.0)))
}

/// Newton refinement of the root starting from `kappa_guess`, without the
/// monotonicity probes. The search is confined to `κ₀(1 ± η)`.
#[allow(clippy::too_many_arguments)]
pub fn radial_refine(
    spec: &PotentialSpec,
    lambda: f64,
    phi: f64,
    level: u32,
    kappa_guess: f64,
    schedule: &GrowthSchedule,
    selection: &SelectionParams,
    radial: &RadialParams,
) -> Result<RadialOutcome> {
    let ray = Ray {
        spec,
        lambda,
        phi,
        kappa0: lambda.powf(1.0 / (2.0 * spec.order as f64)),
        level,
        schedule,
        selection,
    };
    let limit = radial.eta * ray.kappa0;
    let guess = (kappa_guess - ray.kappa0).clamp(-limit, limit);
    refine(&ray, guess, None)
}

fn refine(ray: &Ray<'_>, start: f64, bracket: Option<(f64, f64)>) -> Result<RadialOutcome> {
    let mut bracket = bracket;
    let mut x = start;
    let mut best: Option<(f64, Probe)> = None;
    for _ in 0..MAX_NEWTON {
        let probe = match ray.eval(x)? {
            Ok(p) => p,
            Err(witness) => {
                return Ok(RadialOutcome::Resonant {
                    kappa: ray.kappa(x),
                    witness,
                })
            }
        };
        let r = probe.residual;
        let slope = probe.slope;
        if let Some((a, b)) = bracket.as_mut() {
            if r < 0.0 {
                *a = x;
            } else {
                *b = x;
            }
        }
        let improved = best.as_ref().map_or(true, |(_, p)| r.abs() < p.residual.abs());
        if improved {
            best = Some((x, probe));
        }
        if r == 0.0 {
            break;
        }
        let mut next = if slope.is_finite() && slope > 0.0 { x - r / slope } else { f64::NAN };
        if let Some((a, b)) = bracket {
            if !(next > a.min(b) && next < a.max(b)) {
                next = 0.5 * (a + b);
            }
        }
        if !next.is_finite() {
            break;
        }
        let step = (next - x).abs();
        x = next;
        if step <= 4.0 * f64::EPSILON * x.abs() || step == 0.0 || !improved && step < 1e-13 * ray.kappa0 {
            // One last evaluation at the converged point.
            if let Ok(p) = ray.eval(x)? {
                if p.residual.abs() < best.as_ref().map_or(f64::INFINITY, |b| b.1.residual.abs()) {
                    best = Some((x, p));
                }
            }
            break;
        }
    }
    let (dev, probe) = best.expect("at least one probe");
    if !(probe.residual.abs() <= ROOT_TOL * ray.lambda) {
        return Ok(RadialOutcome::NoRoot {
            kappa_lo: ray.kappa(dev),
            kappa_hi: ray.kappa(dev),
            residual_lo: probe.residual,
            residual_hi: probe.residual,
        });
    }
    Ok(RadialOutcome::Root(RadialRoot {
        phi: ray.phi,
        kappa: ray.kappa(dev),
        deviation: dev,
        residual: probe.residual,
        pair: probe.pair,
    }))
}

/// `dκ/dφ = −(∇λ·t)·κ / (∇λ·ν)` at a solved sample.
pub fn curve_derivative(
    spec: &PotentialSpec,
    root: &RadialRoot,
    selection: &SelectionParams,
    radial: &RadialParams,
) -> Result<f64> {
    // Checks the gap floor; the components are then summed in polar form so
    // that ⟨k, t⟩ = 0 holds exactly instead of by cancellation.
    gradient(spec, &root.pair, selection)?;
    let (s, c) = root.phi.sin_cos();
    let l = spec.order as i32;
    let k = root.pair.k.k;
    let (mut radial_part, mut tangential) = (0.0, 0.0);
    for (idx, u) in root.pair.set.indices().iter().zip(&root.pair.coeffs) {
        let w = u.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let b = dual_vector(*idx, &spec.freq);
        let x = k[0] + b[0];
        let y = k[1] + b[1];
        let f = 2.0 * l as f64 * (x * x + y * y).powi(l - 1) * w;
        radial_part += f * (root.kappa + b[0] * c + b[1] * s);
        tangential += f * (-b[0] * s + b[1] * c);
    }
    let floor = radial.radial_floor * 2.0 * l as f64 * root.kappa.powi(2 * l - 1);
    if !(radial_part > floor) {
        return Err(Error::TangentialCrossing {
            value: radial_part,
            floor,
        });
    }
    Ok(-tangential * root.kappa / radial_part)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IsoSample {
    pub phi: f64,
    pub kappa: f64,
    pub deviation: f64,
    pub dkappa_dphi: f64,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SampleFailure {
    NoRoot,
    Resonant,
    NotMonotone,
    Tangential,
    NearDegenerate,
}

#[derive(Clone, Debug, Serialize)]
pub struct IsoCurve {
    pub lambda: f64,
    pub level: u32,
    pub samples: Vec<IsoSample>,
    /// Directions inside the angle set where no sample could be produced.
    pub failures: Vec<(f64, SampleFailure)>,
    pub angle_set: AngleSet,
}

impl IsoCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phi,kappa,dkappa_dphi,residual\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{},{}\n", s.phi, s.kappa, s.dkappa_dphi, s.residual));
        }
        out
    }

    /// `max |κ − λ^{1/2l}|` over the samples.
    pub fn max_deviation(&self) -> f64 {
        self.samples.iter().map(|s| s.deviation.abs()).fold(0.0, f64::max)
    }
}

fn classify(out: &RadialOutcome) -> SampleFailure {
    match out {
        RadialOutcome::Root(_) => unreachable!("roots are not failures"),
        RadialOutcome::NoRoot { .. } => SampleFailure::NoRoot,
        RadialOutcome::Resonant { .. } => SampleFailure::Resonant,
        RadialOutcome::NotMonotone { .. } => SampleFailure::NotMonotone,
    }
}

/// Solves the radius at every grid angle `2πi/N` inside `angle_set`.
#[allow(clippy::too_many_arguments)]
pub fn trace_curve(
    spec: &PotentialSpec,
    lambda: f64,
    level: u32,
    angle_set: &AngleSet,
    resolution: usize,
    schedule: &GrowthSchedule,
    selection: &SelectionParams,
    radial: &RadialParams,
) -> Result<IsoCurve> {
    if angle_set.is_empty() {
        return Err(Error::InvalidArgument("empty angle set".into()));
    }
    if resolution == 0 {
        return Err(Error::InvalidArgument("zero angle resolution".into()));
    }
    let h = TAU / resolution as f64;
    let phis: Vec<f64> = (0..resolution)
        .map(|i| i as f64 * h)
        .filter(|&p| angle_set.contains(p))
        .collect();
    let results: Vec<std::result::Result<IsoSample, (f64, SampleFailure)>> = phis
        .par_iter()
        .map(|&phi| -> Result<_> {
            let out = radial_solve(spec, lambda, phi, level, schedule, selection, radial)?;
            let root = match out {
                RadialOutcome::Root(r) => r,
                other => return Ok(Err((phi, classify(&other)))),
            };
            match curve_derivative(spec, &root, selection, radial) {
                Ok(d) => Ok(Ok(IsoSample {
                    phi,
                    kappa: root.kappa,
                    deviation: root.deviation,
                    dkappa_dphi: d,
                    residual: root.residual,
                })),
                Err(Error::TangentialCrossing { .. }) => Ok(Err((phi, SampleFailure::Tangential))),
                Err(Error::NearDegenerate { .. }) => Ok(Err((phi, SampleFailure::NearDegenerate))),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(f) => failures.push(f),
        }
    }
    Ok(IsoCurve {
        lambda,
        level,
        samples,
        failures,
        angle_set: angle_set.clone(),
    })
}

/// `κₙ(λ, φ)`: a full bracketed solve at level one, then one Newton step per
/// level starting from the level below. Consecutive levels differ by far less
/// than `√ε·κ`, so a single step already lands on the double-precision root.
#[allow(clippy::too_many_arguments)]
pub fn radius_at_level(
    spec: &PotentialSpec,
    lambda: f64,
    phi: f64,
    level: u32,
    schedule: &GrowthSchedule,
    selection: &SelectionParams,
    radial: &RadialParams,
) -> Result<Option<f64>> {
    let Some(root) = radial_solve(spec, lambda, phi, 1, schedule, selection, radial)?.root() else {
        return Ok(None);
    };
    let kappa0 = root.kappa - root.deviation;
    let mut dev = root.deviation;
    for n in 2..=level {
        let ray = Ray {
            spec,
            lambda,
            phi,
            kappa0,
            level: n,
            schedule,
            selection,
        };
        let Ok(probe) = ray.eval(dev)? else {
            return Ok(None);
        };
        if !(probe.slope > 0.0) {
            return Ok(None);
        }
        dev -= probe.residual / probe.slope;
        if dev.abs() > radial.eta * kappa0 {
            return Ok(None);
        }
    }
    Ok(Some(kappa0 + dev))
}

/// The nested sets `B₁(λ) ⊇ B₂(λ) ⊇ … ⊇ B_N(λ)`.
#[allow(clippy::too_many_arguments)]
pub fn swiss_cheese(
    spec: &PotentialSpec,
    lambda: f64,
    max_level: u32,
    resolution: usize,
    schedule: &GrowthSchedule,
    thresholds: &Thresholds,
    selection: &SelectionParams,
    radial: &RadialParams,
) -> Result<Vec<AngleSet>> {
    let kappa0 = lambda.powf(1.0 / (2.0 * spec.order as f64));
    let mut sets: Vec<AngleSet> = Vec::with_capacity(max_level as usize);
    for n in 1..=max_level {
        let set = if n == 1 {
            carve_cheese(spec, lambda, 1, |_| Ok(Some(kappa0)), None, resolution, schedule, thresholds)?
        } else {
            let radius = |phi: f64| radius_at_level(spec, lambda, phi, n - 1, schedule, selection, radial);
            carve_cheese(spec, lambda, n, radius, sets.last(), resolution, schedule, thresholds)?
        };
        sets.push(set);
    }
    Ok(sets)
}
