//! Brute-force reference implementations. They rebuild every quantity from
//! the defining formulas and share only the domain types with the library.

#![allow(dead_code)]

use std::f64::consts::TAU;

use faer::{Mat, Side};
use num_complex::Complex64;
use quasispec::lattice::FrequencyKind;
use quasispec::{Frequency, LatticeIndex, PotentialSpec};

pub type CMatrix = Vec<Vec<Complex64>>;

/// `p + αm` for one component, written out from the frequency's description.
pub fn alpha_shift(freq: &Frequency, p: i64, m: i64) -> f64 {
    match freq.kind() {
        FrequencyKind::Decimal { value } => p as f64 + value * m as f64,
        FrequencyKind::Quadratic { a, b, d, den } => {
            if m == 0 {
                return p as f64;
            }
            // (den·p + a·m) + (b·m)√d, over den.
            let x = den as i128 * p as i128 + a as i128 * m as i128;
            let y = b as i128 * m as i128;
            let sqrt_d = (d as f64).sqrt();
            let top = if x != 0 && (x > 0) != (y > 0) {
                (x * x - y * y * d as i128) as f64 / (x as f64 - y as f64 * sqrt_d)
            } else {
                x as f64 + y as f64 * sqrt_d
            };
            top / den as f64
        }
    }
}

pub fn shift_vector(freq: &Frequency, idx: LatticeIndex) -> [f64; 2] {
    [alpha_shift(freq, idx.p[0], idx.m[0]), alpha_shift(freq, idx.p[1], idx.m[1])]
}

/// Every index of the box `|p|∞ ≤ r_p`, `|m|∞ ≤ r_m`, ordered by `(m, p)`.
pub fn box_indices(r_p: i64, r_m: i64) -> Vec<LatticeIndex> {
    let mut out = Vec::new();
    for m1 in -r_m..=r_m {
        for m2 in -r_m..=r_m {
            for p1 in -r_p..=r_p {
                for p2 in -r_p..=r_p {
                    out.push(LatticeIndex::new([p1, p2], [m1, m2]));
                }
            }
        }
    }
    out
}

fn diag_entry(k: [f64; 2], b: [f64; 2], order: u32) -> f64 {
    let x = k[0] + b[0];
    let y = k[1] + b[1];
    (x * x + y * y).powi(order as i32)
}

/// `H(k)` on `indices` by a double loop over rows and columns.
pub fn naive_assemble(spec: &PotentialSpec, k: [f64; 2], indices: &[LatticeIndex]) -> CMatrix {
    naive_assemble_shifted(spec, k, LatticeIndex::ZERO, indices)
}

/// `H(k + b(shift))` on `indices`, diagonal evaluated at `b(idx + shift)`.
pub fn naive_assemble_shifted(spec: &PotentialSpec, k: [f64; 2], shift: LatticeIndex, indices: &[LatticeIndex]) -> CMatrix {
    let n = indices.len();
    let mut h = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for (r, row) in indices.iter().enumerate() {
        for (c, col) in indices.iter().enumerate() {
            if r == c {
                let b = shift_vector(&spec.freq, *row + shift);
                h[r][c] = Complex64::new(diag_entry(k, b, spec.order), 0.0);
            } else {
                let key = LatticeIndex::new(
                    [row.p[0] - col.p[0], row.p[1] - col.p[1]],
                    [row.m[0] - col.m[0], row.m[1] - col.m[1]],
                );
                if let Some(v) = spec.coeffs.get(&key) {
                    h[r][c] = *v * spec.coupling;
                }
            }
        }
    }
    h
}

pub fn eigenvalues(h: &CMatrix) -> Vec<f64> {
    let n = h.len();
    let m = Mat::<Complex64>::from_fn(n, n, |i, j| h[i][j]);
    let mut v = m.self_adjoint_eigenvalues(Side::Lower).expect("eigenvalues");
    v.sort_by(f64::total_cmp);
    v
}

/// `(min |p + αm|, argmin)` over every nonzero index of the box. Ties go to
/// the lexicographically largest shift vector.
pub fn exhaustive_min_shift(freq: &Frequency, r_p: i64, r_m: i64) -> Option<(f64, LatticeIndex)> {
    let mut best: Option<(f64, [f64; 2], LatticeIndex)> = None;
    for idx in box_indices(r_p, r_m) {
        if idx == LatticeIndex::ZERO {
            continue;
        }
        let b = shift_vector(freq, idx);
        let norm = b[0].hypot(b[1]);
        let better = match &best {
            None => true,
            Some((v, bb, _)) => norm < *v || (norm == *v && (b[0], b[1]) > (bb[0], bb[1])),
        };
        if better {
            best = Some((norm, b, idx));
        }
    }
    best.map(|(v, _, i)| (v, i))
}

/// Resonance verdict recomputed by eigendecomposing every shifted block.
pub fn brute_force_resonant(
    spec: &PotentialSpec,
    k: [f64; 2],
    lambda: f64,
    outer: (i64, i64),
    block: Option<(i64, i64)>,
    delta: f64,
) -> bool {
    let shifts = box_indices(outer.0, outer.1);
    match block {
        None => shifts
            .iter()
            .filter(|j| **j != LatticeIndex::ZERO)
            .any(|j| (lambda - diag_entry(k, shift_vector(&spec.freq, *j), spec.order)).abs() < delta),
        Some((bp, bm)) => {
            let inner = box_indices(bp, bm);
            shifts.iter().filter(|j| !inner.contains(j)).any(|j| {
                let ev = eigenvalues(&naive_assemble_shifted(spec, k, *j, &inner));
                ev.iter().any(|e| (e - lambda).abs() < delta)
            })
        }
    }
}

/// Root of a sampled increasing function: the first sign change among `n`
/// equally spaced samples, refined by linear interpolation.
pub fn dense_root_scan(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Option<f64> {
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    for i in 0..n - 1 {
        if ys[i] == 0.0 {
            return Some(xs[i]);
        }
        if (ys[i] < 0.0) != (ys[i + 1] < 0.0) {
            let t = ys[i] / (ys[i] - ys[i + 1]);
            return Some(xs[i] + t * (xs[i + 1] - xs[i]));
        }
    }
    None
}

/// Central differences with step `h` along each axis.
pub fn fd_gradient(f: impl Fn([f64; 2]) -> f64, x: [f64; 2], h: f64) -> [f64; 2] {
    let dx = (f([x[0] + h, x[1]]) - f([x[0] - h, x[1]])) / (2.0 * h);
    let dy = (f([x[0], x[1] + h]) - f([x[0], x[1] - h])) / (2.0 * h);
    [dx, dy]
}

/// Central difference of a scalar function.
pub fn fd_derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Clone, Copy, Debug)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Self { hi: s, lo: err }
    }

    fn quick(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        Self { hi: s, lo: lo - (s - hi) }
    }

    pub fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        Self::quick(s.hi, s.lo + self.lo + o.lo)
    }

    pub fn mul(self, o: Self) -> Self {
        let p = self.hi * o.hi;
        let err = self.hi.mul_add(o.hi, -p);
        Self::quick(p, err + self.hi * o.lo + self.lo * o.hi)
    }

    /// Fractional part in `[0, 1)`.
    pub fn fract(self) -> f64 {
        let f = self.hi.floor();
        let r = Self::two_sum(self.hi - f, self.lo);
        let v = r.hi + r.lo;
        v - v.floor()
    }
}

/// `√d` to double-double precision via one Newton step.
fn dd_sqrt(d: f64) -> DoubleDouble {
    let s = d.sqrt();
    let sq = DoubleDouble::from_f64(s).mul(DoubleDouble::from_f64(s));
    let resid = DoubleDouble::from_f64(d).add(DoubleDouble { hi: -sq.hi, lo: -sq.lo });
    DoubleDouble::quick(s, (resid.hi + resid.lo) / (2.0 * s))
}

fn dd_alpha(freq: &Frequency) -> DoubleDouble {
    match freq.kind() {
        FrequencyKind::Decimal { value } => DoubleDouble::from_f64(value),
        FrequencyKind::Quadratic { a, b, d, den } => {
            let r = dd_sqrt(d as f64).mul(DoubleDouble::from_f64(b as f64));
            let num = r.add(DoubleDouble::from_f64(a as f64));
            // Division by an integer denominator: one correction step.
            let q = num.hi / den as f64;
            let back = DoubleDouble::from_f64(q).mul(DoubleDouble::from_f64(den as f64));
            let rem = num.add(DoubleDouble { hi: -back.hi, lo: -back.lo });
            DoubleDouble::quick(q, (rem.hi + rem.lo) / den as f64)
        }
    }
}

/// `g·Σ V_s e^{2πi⟨s1+αs2, x⟩}` with the phase reduced mod 1 in double-double
/// arithmetic before the trigonometric evaluation.
pub fn extended_potential(spec: &PotentialSpec, x: [f64; 2]) -> Complex64 {
    let alpha = dd_alpha(&spec.freq);
    let mut acc = Complex64::new(0.0, 0.0);
    for (key, v) in &spec.coeffs {
        let mut phase = DoubleDouble::from_f64(0.0);
        for c in 0..2 {
            let freq_c = alpha
                .mul(DoubleDouble::from_f64(key.m[c] as f64))
                .add(DoubleDouble::from_f64(key.p[c] as f64));
            phase = phase.add(freq_c.mul(DoubleDouble::from_f64(x[c])));
        }
        let t = TAU * phase.fract();
        acc += *v * Complex64::new(t.cos(), t.sin());
    }
    acc * spec.coupling
}

/// Grid samples `φᵢ = 2πi/N` marked resonant at level one for `V = 0`, from
/// the circle-intersection geometry: `|κν + b|^{2l} ∈ (λ − δ, λ + δ)` holds
/// exactly when `⟨ν, b⟩` lies in an interval, i.e. `φ` in up to two arcs
/// around the direction of `b`.
pub fn geometric_level_one_marks(
    freq: &Frequency,
    order: u32,
    lambda: f64,
    delta: f64,
    box_radii: (i64, i64),
    resolution: usize,
) -> Vec<bool> {
    let kappa = lambda.powf(1.0 / (2.0 * order as f64));
    let inv = 1.0 / order as f64;
    let lo2 = if lambda - delta > 0.0 { (lambda - delta).powf(inv) } else { f64::NEG_INFINITY };
    let hi2 = (lambda + delta).powf(inv);
    let mut arcs: Vec<(f64, f64)> = Vec::new();
    for idx in box_indices(box_radii.0, box_radii.1) {
        if idx == LatticeIndex::ZERO {
            continue;
        }
        let b = shift_vector(freq, idx);
        let nb = b[0].hypot(b[1]);
        // |κν + b|² = κ² + |b|² + 2κ|b|cos(φ − θ).
        let c_lo = (lo2 - kappa * kappa - nb * nb) / (2.0 * kappa * nb);
        let c_hi = (hi2 - kappa * kappa - nb * nb) / (2.0 * kappa * nb);
        if c_hi <= -1.0 || c_lo >= 1.0 {
            continue;
        }
        let theta = b[1].atan2(b[0]);
        let a_out = c_hi.min(1.0).acos();
        let a_in = c_lo.max(-1.0).acos();
        arcs.push((theta + a_out, theta + a_in));
        arcs.push((theta - a_in, theta - a_out));
    }
    let h = TAU / resolution as f64;
    (0..resolution)
        .map(|i| {
            let phi = i as f64 * h;
            arcs.iter().any(|&(s, e)| {
                let mut x = (phi - s).rem_euclid(TAU);
                if x == TAU {
                    x = 0.0;
                }
                x > 0.0 && x < (e - s)
            })
        })
        .collect()
}
