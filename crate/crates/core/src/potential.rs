//! The quasi-periodic trigonometric-polynomial potential
//! `V(x) = Σ V_{s1,s2} e^{2πi⟨s1+αs2, x⟩}` over `0 < |s1| + |s2| ≤ Q`.
//!
//! A coefficient key `(s1, s2)` is stored as a [`LatticeIndex`] with `p = s1`,
//! `m = s2`, so the matrix element between indices `i` and `j` is the
//! coefficient at key `i − j`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;

use crate::lattice::{dual_vector, Frequency, LatticeIndex, Vec2};
use crate::synthesis::Convention;

/// Slack when comparing the real-valued norm sum `|s1| + |s2|` against `Q`.
const CUTOFF_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    pub freq: Frequency,
    /// Polyharmonic order `l` of `(−Δ)ˡ`.
    pub order: u32,
    /// Frequency cutoff `Q`.
    pub cutoff: u32,
    /// Multiplier `g` applied to every coefficient when the operator is built.
    pub coupling: f64,
    pub coeffs: BTreeMap<LatticeIndex, Complex64>,
    /// Declares `V` real, which demands `V_{−s} = conj(V_s)`.
    pub real_valued: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    ConstantTerm,
    CutoffExceeded { key: LatticeIndex, norm_sum: f64, cutoff: u32 },
    MissingPartner { key: LatticeIndex },
    NotHermitian { key: LatticeIndex },
    NonFiniteCoefficient { key: LatticeIndex },
    NonFiniteCoupling,
    OrderTooLow { order: u32 },
    ZeroCutoff,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ConstantTerm => write!(f, "key ((0,0),(0,0)): |s1|+|s2|=0 (constant term)"),
            Violation::CutoffExceeded { key, norm_sum, cutoff } => write!(
                f,
                "key {key}: cutoff exceeded (|s1|+|s2| = {norm_sum} > Q = {cutoff})"
            ),
            Violation::MissingPartner { key } => {
                write!(f, "key {key}: Hermitian partner {} missing", -*key)
            }
            Violation::NotHermitian { key } => write!(
                f,
                "key {key}: coefficient is not the conjugate of its partner {}",
                -*key
            ),
            Violation::NonFiniteCoefficient { key } => write!(f, "key {key}: non-finite amplitude"),
            Violation::NonFiniteCoupling => write!(f, "coupling is not finite"),
            Violation::OrderTooLow { order } => write!(f, "order l = {order} < 2"),
            Violation::ZeroCutoff => write!(f, "cutoff Q = 0"),
        }
    }
}

/// `|s1| + |s2|` with Euclidean norms.
pub fn mode_norm(key: &LatticeIndex) -> f64 {
    let s1 = (key.p[0] as f64).hypot(key.p[1] as f64);
    let s2 = (key.m[0] as f64).hypot(key.m[1] as f64);
    s1 + s2
}

impl PotentialSpec {
    pub fn new(freq: Frequency, order: u32, cutoff: u32) -> Self {
        Self {
            freq,
            order,
            cutoff,
            coupling: 1.0,
            coeffs: BTreeMap::new(),
            real_valued: true,
        }
    }

    pub fn with_coupling(mut self, g: f64) -> Self {
        self.coupling = g;
        self
    }

    pub fn with_coefficient(mut self, s1: [i64; 2], s2: [i64; 2], v: Complex64) -> Self {
        self.coeffs.insert(LatticeIndex::new(s1, s2), v);
        self
    }

    /// Inserts `v` at `(s1, s2)` and `conj(v)` at `(−s1, −s2)`.
    pub fn with_real_pair(self, s1: [i64; 2], s2: [i64; 2], v: Complex64) -> Self {
        self.with_coefficient(s1, s2, v)
            .with_coefficient([-s1[0], -s1[1]], [-s2[0], -s2[1]], v.conj())
    }

    /// Every violated invariant, in key order.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.order < 2 {
            out.push(Violation::OrderTooLow { order: self.order });
        }
        if self.cutoff < 1 {
            out.push(Violation::ZeroCutoff);
        }
        if !self.coupling.is_finite() {
            out.push(Violation::NonFiniteCoupling);
        }
        for (key, v) in &self.coeffs {
            if key.is_zero() {
                out.push(Violation::ConstantTerm);
                continue;
            }
            let n = mode_norm(key);
            if n > self.cutoff as f64 + CUTOFF_SLACK {
                out.push(Violation::CutoffExceeded {
                    key: *key,
                    norm_sum: n,
                    cutoff: self.cutoff,
                });
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                out.push(Violation::NonFiniteCoefficient { key: *key });
            }
            if self.real_valued {
                match self.coeffs.get(&-*key) {
                    None => out.push(Violation::MissingPartner { key: *key }),
                    Some(w) if *w != v.conj() => out.push(Violation::NotHermitian { key: *key }),
                    Some(_) => {}
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// `V_s = conj(V_{−s})` for every stored key, regardless of the declared flag.
    pub fn is_hermitian(&self) -> bool {
        self.coeffs
            .iter()
            .all(|(k, v)| self.coeffs.get(&-*k).is_some_and(|w| *w == v.conj()))
    }

    /// Stored amplitude at `(s1, s2)`; zero when absent or beyond the cutoff.
    pub fn coefficient(&self, s1: [i64; 2], s2: [i64; 2]) -> Complex64 {
        self.coefficient_at(&LatticeIndex::new(s1, s2))
    }

    pub fn coefficient_at(&self, key: &LatticeIndex) -> Complex64 {
        if key.is_zero() || mode_norm(key) > self.cutoff as f64 + CUTOFF_SLACK {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs.get(key).copied().unwrap_or_default()
    }

    /// `Σ |V_s|` (unscaled).
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|v| v.norm()).sum()
    }

    /// Upper bound `g·Σ|V_s|` on the operator norm of the potential part of any
    /// truncated matrix.
    pub fn operator_norm_bound(&self) -> f64 {
        self.coupling.abs() * self.l1_norm()
    }

    /// Nonzero scaled coefficients `(s, g·V_s)` in key order.
    pub fn scaled_terms(&self) -> Vec<(LatticeIndex, Complex64)> {
        self.coeffs
            .iter()
            .map(|(k, v)| (*k, *v * self.coupling))
            .filter(|(_, v)| *v != Complex64::new(0.0, 0.0))
            .collect()
    }

    /// The potential entering the operator, `g·Σ V_s e^{2πi⟨s1+αs2, x⟩}`.
    pub fn evaluate(&self, x: Vec2) -> Complex64 {
        self.evaluate_in(Convention::Literal, x)
    }

    /// Evaluates with the phase convention used for eigenfunctions:
    /// `Literal` keeps the `2π`, `Absorbed` measures `x` in units where it is `1`.
    pub fn evaluate_in(&self, convention: Convention, x: Vec2) -> Complex64 {
        let scale = convention.scale();
        let mut acc = Complex64::new(0.0, 0.0);
        for (key, v) in &self.coeffs {
            let b = dual_vector(*key, &self.freq);
            let phase = scale * (b[0] * x[0] + b[1] * x[1]);
            acc += *v * Complex64::from_polar(1.0, phase);
        }
        acc * self.coupling
    }
}

/// `cos(2πx₁)`-type test potential: `V_{(±1,0),(0,0)} = 1`.
pub fn cosine(freq: Frequency, order: u32, cutoff: u32) -> PotentialSpec {
    PotentialSpec::new(freq, order, cutoff).with_real_pair([1, 0], [0, 0], Complex64::new(1.0, 0.0))
}

impl Convention {
    pub fn scale(self) -> f64 {
        match self {
            Convention::Absorbed => 1.0,
            Convention::Literal => TAU,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn constant_term_rejected() {
        let spec = PotentialSpec::new(Frequency::sqrt2(), 2, 2).with_coefficient([0, 0], [0, 0], c(1.0));
        let v = spec.validate();
        assert_eq!(v, vec![Violation::ConstantTerm]);
        assert!(v[0].to_string().contains("|s1|+|s2|=0"));
    }

    #[test]
    fn hermitian_pair_ok() {
        let spec = cosine(Frequency::sqrt2(), 2, 1);
        assert!(spec.is_valid());
        assert!(spec.is_hermitian());
    }

    #[test]
    fn cutoff_boundary() {
        let spec = PotentialSpec::new(Frequency::sqrt2(), 2, 2).with_real_pair([3, 0], [0, 0], c(1.0));
        let v = spec.validate();
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|x| x.to_string().contains("cutoff exceeded")));
        let spec = PotentialSpec::new(Frequency::sqrt2(), 2, 2).with_real_pair([1, 0], [1, 0], c(1.0));
        assert!(spec.is_valid());
        assert_eq!(spec.coefficient([3, 0], [0, 0]), c(0.0));
    }

    #[test]
    fn missing_partner_and_bad_conjugate() {
        let spec = PotentialSpec::new(Frequency::sqrt2(), 2, 2)
            .with_coefficient([1, 0], [0, 0], Complex64::new(1.0, 0.5))
            .with_coefficient([-1, 0], [0, 0], Complex64::new(1.0, 0.5))
            .with_coefficient([0, 1], [0, 0], c(1.0));
        let v = spec.validate();
        assert!(v.contains(&Violation::NotHermitian { key: LatticeIndex::new([1, 0], [0, 0]) }));
        assert!(v.contains(&Violation::MissingPartner { key: LatticeIndex::new([0, 1], [0, 0]) }));
        let mut relaxed = spec.clone();
        relaxed.real_valued = false;
        assert!(relaxed.is_valid());
        assert!(!relaxed.is_hermitian());
    }

    #[test]
    fn order_and_cutoff_floors() {
        let spec = PotentialSpec::new(Frequency::sqrt2(), 1, 0);
        let v = spec.validate();
        assert!(v.contains(&Violation::OrderTooLow { order: 1 }));
        assert!(v.contains(&Violation::ZeroCutoff));
    }

    #[test]
    fn cosine_values() {
        let spec = cosine(Frequency::sqrt2(), 2, 1);
        assert!((spec.evaluate([0.0, 0.0]) - c(2.0)).norm() < 1e-15);
        assert!(spec.evaluate([0.25, 0.0]).norm() < 1e-14);
        assert!((spec.evaluate_in(Convention::Absorbed, [1.0, 0.0]) - c(2.0 * 1f64.cos())).norm() < 1e-15);
    }

    #[test]
    fn coefficient_lookup() {
        let spec = cosine(Frequency::sqrt2(), 2, 1);
        assert_eq!(spec.coefficient([1, 0], [0, 0]), c(1.0));
        assert_eq!(spec.coefficient([0, 1], [0, 0]), c(0.0));
        assert_eq!(spec.coefficient([0, 0], [0, 0]), c(0.0));
    }

    #[test]
    fn coefficient_scan_beyond_cutoff_is_zero() {
        let q = 2i64;
        let mut spec = PotentialSpec::new(Frequency::sqrt2(), 2, q as u32);
        // Deliberately store out-of-range keys; lookups must still return zero.
        for s in [[3, 0], [0, -4], [2, 1]] {
            spec.coeffs.insert(LatticeIndex::new(s, [0, 0]), c(1.0));
        }
        let r = q + 2;
        for a in -r..=r {
            for b in -r..=r {
                for m1 in -r..=r {
                    for m2 in -r..=r {
                        let key = LatticeIndex::new([a, b], [m1, m2]);
                        if mode_norm(&key) > q as f64 {
                            assert_eq!(spec.coefficient_at(&key), c(0.0), "{key}");
                        }
                    }
                }
            }
        }
    }
}
