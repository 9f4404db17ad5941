//! Resonance tests against shifted-block spectra, the Swiss-cheese carving of
//! non-resonant directions, and Monte Carlo estimates of the non-resonant
//! momentum set.
//!
//! A momentum `k` is resonant at level `n ≥ 2` for the energy `λ` when some
//! block `H⁽ˢ⁾(k + b(j))` with `s = n − 1` and `j ∈ Mₙ ∖ Mₛ` has an eigenvalue
//! within `δₙ` of `λ`. Shifts inside `Mₛ` are skipped because those blocks
//! contain the zero index and so carry the branch itself. At level one the
//! blocks are `1×1` and the test compares `λ` with `|k + b(j)|^{2l}`.

use std::f64::consts::TAU;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arcs::{AngleSet, Interval};
use crate::error::{Error, Result};
use crate::hamiltonian::{assemble_shifted, kinetic, shifted_diagonal, MomentumPoint};
use crate::lattice::{box_cardinality, dual_vector, GrowthSchedule, LatticeIndex, TruncationSet};
use crate::potential::PotentialSpec;
use crate::spectral::{branch_pair, eigenvalues_hermitian, SelectionParams};

/// Minimum number of angle samples for a carve.
pub const MIN_PHI_RESOLUTION: usize = 1 << 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Level-one threshold `δ₁`; `None` selects `0.1·λ^{1−1/2l}`.
    #[serde(default)]
    pub delta1: Option<f64>,
    /// Per-level ratio `ρ` in `δₙ = δ₁ρⁿ⁻¹`.
    pub rho: f64,
    /// Half-width `ε₀` of the energy window, added to every `δₙ`.
    #[serde(default)]
    pub eps0: f64,
    /// Scan every block level `s = 1, …, n − 1` instead of only `s = n − 1`.
    #[serde(default)]
    pub full_block_scan: bool,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            delta1: None,
            rho: 0.1,
            eps0: 0.0,
            full_block_scan: false,
        }
    }
}

impl Thresholds {
    pub fn zero() -> Self {
        Self {
            delta1: Some(0.0),
            rho: 0.1,
            eps0: 0.0,
            full_block_scan: false,
        }
    }

    pub fn delta1_for(&self, lambda: f64, order: u32) -> f64 {
        self.delta1
            .unwrap_or_else(|| 0.1 * lambda.abs().powf(1.0 - 1.0 / (2.0 * order as f64)))
    }

    /// Effective threshold `δₙ + ε₀`.
    pub fn delta(&self, level: u32, lambda: f64, order: u32) -> f64 {
        self.delta1_for(lambda, order) * self.rho.powi(level as i32 - 1) + self.eps0
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.delta1.map_or(true, |d| d >= 0.0 && d.is_finite())
            && self.rho > 0.0
            && self.rho.is_finite()
            && self.eps0 >= 0.0
            && self.eps0.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad thresholds {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub shift: LatticeIndex,
    pub block_level: u32,
    pub distance: f64,
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResonanceVerdict {
    pub resonant: bool,
    pub witness: Option<Witness>,
}

impl ResonanceVerdict {
    pub fn clear() -> Self {
        Self {
            resonant: false,
            witness: None,
        }
    }

    pub fn hit(w: Witness) -> Self {
        Self {
            resonant: true,
            witness: Some(w),
        }
    }
}

/// Rounding margin added to the Weyl prefilter so it never skips a block whose
/// computed spectrum could fall inside the threshold.
fn prefilter_margin(lambda: f64) -> f64 {
    1e-9 * (1.0 + lambda.abs())
}

/// Necessary condition for `B = D + W` (zero-diagonal `W`, `‖W‖ ≤ w`) to have
/// an eigenvalue within `δ` of `λ`.
///
/// With `N = {i : |dᵢ − λ| < T}` and `F` its complement, every such
/// eigenvalue `μ` is an eigenvalue of the Schur complement
/// `B_NN − B_NF(B_FF − μ)⁻¹B_FN`, whose correction term is bounded by
/// `w²/(T − δ − w)`; by Weyl, `μ` lies within `‖W_NN‖ + w²/(T − δ − w)` of
/// some `dᵢ`, `i ∈ N`. `‖W_NN‖` is bounded by its largest absolute row sum.
/// Several `T` are tried; each gives a valid test.
pub fn block_may_resonate(
    diag: &[f64],
    block: &TruncationSet,
    terms: &[(LatticeIndex, Complex64)],
    lambda: f64,
    delta: f64,
    w: f64,
    margin: f64,
) -> bool {
    let nearest = diag.iter().map(|d| (d - lambda).abs()).fold(f64::INFINITY, f64::min);
    // Plain Weyl bound.
    if nearest >= delta + w + margin {
        return false;
    }
    if w == 0.0 {
        return true;
    }
    for factor in [3.0, 9.0, 27.0] {
        let t = delta + factor * w;
        let near: Vec<bool> = diag.iter().map(|d| (d - lambda).abs() < t).collect();
        let mut row_max = 0.0f64;
        for (i, _) in near.iter().enumerate().filter(|(_, &n)| n) {
            let idx = block.indices()[i];
            let row: f64 = terms
                .iter()
                .filter(|(s, _)| block.position(&(idx - *s)).is_some_and(|j| near[j]))
                .map(|(_, v)| v.norm())
                .sum();
            row_max = row_max.max(row);
        }
        let reach = row_max + w * w / (t - delta - w);
        if nearest >= delta + reach + margin {
            return false;
        }
    }
    [30.0, 300.0].into_iter().all(|factor| !schur_excludes(diag, block, terms, lambda, delta, w, margin, delta + factor * w))
}

/// Second-order form of the test in [`block_may_resonate`]: `S(λ)` is computed
/// and its spectrum moves by at most `δw²/((T − δ − w)(T − w))` across the
/// window `|μ − λ| < δ`. `(B_FF − λ)⁻¹B_FN` is a Jacobi series contracting by
/// `w/T` per term.
#[allow(clippy::too_many_arguments)]
fn schur_excludes(
    diag: &[f64],
    block: &TruncationSet,
    terms: &[(LatticeIndex, Complex64)],
    lambda: f64,
    delta: f64,
    w: f64,
    margin: f64,
    t: f64,
) -> bool {
    let near: Vec<usize> = (0..diag.len()).filter(|&i| (diag[i] - lambda).abs() < t).collect();
    if near.is_empty() {
        return true;
    }
    if near.len() > NEAR_BLOCK_CAP {
        return false;
    }
    let mut local = vec![usize::MAX; diag.len()];
    for (a, &i) in near.iter().enumerate() {
        local[i] = a;
    }
    // H[r, c] = v for every (c, v) in links[r].
    let links: Vec<Vec<(usize, Complex64)>> = block
        .indices()
        .iter()
        .map(|&idx| terms.iter().filter_map(|(s, v)| block.position(&(idx - *s)).map(|c| (c, *v))).collect())
        .collect();
    let far = |i: usize| local[i] == usize::MAX;
    let q = w / t;
    let sweeps = if q > 0.0 { (40.0 * std::f64::consts::LN_10 / -q.ln()).ceil() as usize } else { 1 };
    let m = near.len();
    let mut b = Mat::<Complex64>::zeros(m, m);
    for (a, &i) in near.iter().enumerate() {
        b[(a, a)] = Complex64::new(diag[i], 0.0);
        for &(c, v) in &links[i] {
            if !far(c) {
                b[(a, local[c])] = v;
            }
        }
    }
    let zero = Complex64::new(0.0, 0.0);
    for (col, &j) in near.iter().enumerate() {
        // y = B_F j, then x = (B_FF − λ)⁻¹ y.
        let mut y = vec![zero; diag.len()];
        for &(c, v) in &links[j] {
            if far(c) {
                y[c] = v.conj();
            }
        }
        let mut x = vec![zero; diag.len()];
        for _ in 0..sweeps {
            let next: Vec<Complex64> = (0..diag.len())
                .map(|f| {
                    if !far(f) {
                        return zero;
                    }
                    let wx: Complex64 = links[f].iter().filter(|(c, _)| far(*c)).map(|&(c, v)| v * x[c]).sum();
                    (y[f] - wx) / (diag[f] - lambda)
                })
                .collect();
            x = next;
        }
        for (a, &i) in near.iter().enumerate() {
            let e: Complex64 = links[i].iter().filter(|(c, _)| far(*c)).map(|&(c, v)| v * x[c]).sum();
            b[(a, col)] -= e;
        }
    }
    let Ok(spectrum) = eigenvalues_hermitian(&b) else { return false };
    let drift = delta * w * w / ((t - delta - w) * (t - w));
    spectrum_distance(&spectrum, lambda) >= delta + drift + margin
}

/// Largest near set whose spectrum the prefilter computes densely.
const NEAR_BLOCK_CAP: usize = 256;

pub fn is_resonant(
    spec: &PotentialSpec,
    k: MomentumPoint,
    lambda_ref: f64,
    level: u32,
    schedule: &GrowthSchedule,
    thresholds: &Thresholds,
) -> Result<ResonanceVerdict> {
    if !lambda_ref.is_finite() {
        return Err(Error::InvalidArgument("non-finite reference energy".into()));
    }
    thresholds.validate()?;
    if level < 1 {
        return Err(Error::InvalidArgument("level must be ≥ 1".into()));
    }
    let delta = thresholds.delta(level, lambda_ref, spec.order);
    let (rn, mn) = schedule.radii(level)?;
    let outer = TruncationSet::from_box(level, rn, mn);

    if level == 1 {
        for &j in outer.indices() {
            if j.is_zero() {
                continue;
            }
            let d = (lambda_ref - kinetic(k.k, dual_vector(j, &spec.freq), spec.order)).abs();
            if d < delta {
                return Ok(ResonanceVerdict::hit(Witness {
                    shift: j,
                    block_level: 0,
                    distance: d,
                    threshold: delta,
                }));
            }
        }
        return Ok(ResonanceVerdict::clear());
    }

    let block_levels: Vec<u32> = if thresholds.full_block_scan {
        (1..level).collect()
    } else {
        vec![level - 1]
    };
    let vbound = spec.operator_norm_bound();
    let terms = spec.scaled_terms();
    let margin = prefilter_margin(lambda_ref);
    for s in block_levels {
        let (rs, ms) = schedule.radii(s)?;
        let dim = box_cardinality(rs, ms);
        if dim > schedule.max_dim {
            return Err(Error::ScanCap {
                stopped_at: outer.indices()[0],
                block_level: s,
                dim,
                cap: schedule.max_dim,
            });
        }
        let block = Arc::new(TruncationSet::from_box(s, rs, ms));
        for &j in outer.indices() {
            if block.contains(&j) {
                continue;
            }
            let diag = shifted_diagonal(spec, k, j, &block);
            if !block_may_resonate(&diag, &block, &terms, lambda_ref, delta, vbound, margin) {
                continue;
            }
            let h = assemble_shifted(spec, k, j, &block)?;
            let d = spectrum_distance(&eigenvalues_hermitian(h.entries())?, lambda_ref);
            if d < delta {
                return Ok(ResonanceVerdict::hit(Witness {
                    shift: j,
                    block_level: s,
                    distance: d,
                    threshold: delta,
                }));
            }
        }
    }
    Ok(ResonanceVerdict::clear())
}

/// `min |μ − λ|` over a sorted spectrum.
pub fn spectrum_distance(sorted: &[f64], lambda: f64) -> f64 {
    let i = sorted.partition_point(|&x| x < lambda);
    let mut d = f64::INFINITY;
    if i < sorted.len() {
        d = d.min(sorted[i] - lambda);
    }
    if i > 0 {
        d = d.min(lambda - sorted[i - 1]);
    }
    d
}

/// Angle grid `φᵢ = 2πi/N`.
pub fn phi_grid(resolution: usize) -> Vec<f64> {
    let h = TAU / resolution as f64;
    (0..resolution).map(|i| i as f64 * h).collect()
}

/// Carves `Bₙ(λ)` out of `prev` (`Bₙ₋₁`, or the full circle at level one).
///
/// `radius(φ)` supplies `κₙ₋₁(λ, φ)`; `None` marks a direction whose radius
/// could not be computed, which is removed. Every marked sample `φᵢ` removes
/// `[φᵢ − h/2, φᵢ + h/2)`; samples outside `prev` are not tested.
#[allow(clippy::too_many_arguments)]
pub fn carve_cheese<F>(
    spec: &PotentialSpec,
    lambda: f64,
    level: u32,
    radius: F,
    prev: Option<&AngleSet>,
    resolution: usize,
    schedule: &GrowthSchedule,
    thresholds: &Thresholds,
) -> Result<AngleSet>
where
    F: Fn(f64) -> Result<Option<f64>> + Sync,
{
    if resolution < MIN_PHI_RESOLUTION {
        return Err(Error::InvalidArgument(format!(
            "angle resolution {resolution} below {MIN_PHI_RESOLUTION}"
        )));
    }
    let base = prev.cloned().unwrap_or_else(|| AngleSet::full(level.saturating_sub(1), lambda));
    let h = TAU / resolution as f64;
    let marks: Vec<bool> = (0..resolution)
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let phi = i as f64 * h;
            if !base.contains(phi) {
                return Ok(false);
            }
            let Some(kappa) = radius(phi)? else {
                return Ok(true);
            };
            let k = MomentumPoint::polar(kappa, phi)?;
            Ok(is_resonant(spec, k, lambda, level, schedule, thresholds)?.resonant)
        })
        .collect::<Result<_>>()?;
    let holes = marks
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| Interval::new((i as f64 - 0.5) * h, (i as f64 + 0.5) * h));
    let carved = AngleSet::from_holes(level, lambda, holes);
    Ok(carved.intersect(&base).with_level(level))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FractionEstimate {
    pub radius: f64,
    pub level: u32,
    pub samples: usize,
    pub nonresonant: usize,
    pub fraction: f64,
    /// Wilson 95% interval.
    pub ci_low: f64,
    pub ci_high: f64,
    pub annulus: bool,
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * ((p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt()) / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Uniform point of the disk `|k| ≤ R` (or annulus `R/2 ≤ |k| ≤ R`) drawn from
/// a ChaCha stream keyed by `(seed, sample)`.
pub fn sample_momentum(seed: u64, sample: u64, radius: f64, annulus: bool) -> MomentumPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample);
    let u: f64 = rng.gen();
    let v: f64 = rng.gen();
    let r = if annulus {
        let inner = 0.25;
        radius * (inner + (1.0 - inner) * u).sqrt()
    } else {
        radius * u.sqrt()
    };
    MomentumPoint::polar(r, TAU * v).expect("finite sample")
}

/// Fraction of sampled momenta that are non-resonant at every level `1..=level`.
///
/// The reference energy at level `s` is `λ⁽ˢ⁻¹⁾(k)` from the continued branch
/// (`|k|^{2l}` at level one); a branch that fails to continue counts as resonant.
#[allow(clippy::too_many_arguments)]
pub fn nonresonant_fraction(
    spec: &PotentialSpec,
    radius: f64,
    level: u32,
    samples: usize,
    seed: u64,
    annulus: bool,
    schedule: &GrowthSchedule,
    thresholds: &Thresholds,
    params: &SelectionParams,
) -> Result<FractionEstimate> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    if samples < 1000 {
        return Err(Error::InvalidArgument("at least 1000 samples are required".into()));
    }
    let verdicts: Vec<bool> = (0..samples as u64)
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let k = sample_momentum(seed, i, radius, annulus);
            for s in 1..=level {
                let lambda_ref = if s == 1 {
                    kinetic(k.k, [0.0, 0.0], spec.order)
                } else {
                    match branch_pair(spec, k, s - 1, schedule, params)? {
                        Ok(p) => p.lambda,
                        Err(_) => return Ok(false),
                    }
                };
                if is_resonant(spec, k, lambda_ref, s, schedule, thresholds)?.resonant {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect::<Result<_>>()?;
    let nonresonant = verdicts.iter().filter(|&&v| v).count();
    let (ci_low, ci_high) = wilson_interval(nonresonant, samples);
    Ok(FractionEstimate {
        radius,
        level,
        samples,
        nonresonant,
        fraction: nonresonant as f64 / samples as f64,
        ci_low,
        ci_high,
        annulus,
    })
}

pub fn fractions_csv(rows: &[FractionEstimate]) -> String {
    let mut out = String::from("radius,level,samples,nonresonant,fraction,ci_low,ci_high,annulus\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.radius, r.level, r.samples, r.nonresonant, r.fraction, r.ci_low, r.ci_high, r.annulus
        ));
    }
    out
}
