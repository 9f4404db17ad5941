//! Index arithmetic on the quasi-periodic dual lattice `{p + αm : p, m ∈ Z²}`.
//!
//! Momenta are measured in units where the shift attached to an index is exactly
//! `p + αm`; the `2π` of the potential's exponentials is absorbed into the spatial
//! coordinate (see [`crate::synthesis::Convention`]).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

/// Default cap on the dimension of any dense matrix built from a truncation set.
pub const DEFAULT_MAX_DIM: usize = 2500;

/// A pair `(p, m)` of integer 2-vectors labelling the exponential
/// `e^{i⟨p+αm, x⟩}` relative to the carrier plane wave.
///
/// Ordering is lexicographic on `(m, p)`, which is the canonical matrix layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeIndex {
    pub p: [i64; 2],
    pub m: [i64; 2],
}

impl LatticeIndex {
    pub const ZERO: LatticeIndex = LatticeIndex { p: [0, 0], m: [0, 0] };

    pub const fn new(p: [i64; 2], m: [i64; 2]) -> Self {
        Self { p, m }
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }

    pub fn p_sup(&self) -> i64 {
        self.p[0].abs().max(self.p[1].abs())
    }

    pub fn m_sup(&self) -> i64 {
        self.m[0].abs().max(self.m[1].abs())
    }
}

impl Ord for LatticeIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.m, self.p).cmp(&(other.m, other.p))
    }
}

impl PartialOrd for LatticeIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for LatticeIndex {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            p: [self.p[0] + o.p[0], self.p[1] + o.p[1]],
            m: [self.m[0] + o.m[0], self.m[1] + o.m[1]],
        }
    }
}

impl Sub for LatticeIndex {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            p: [self.p[0] - o.p[0], self.p[1] - o.p[1]],
            m: [self.m[0] - o.m[0], self.m[1] - o.m[1]],
        }
    }
}

impl Neg for LatticeIndex {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            p: [-self.p[0], -self.p[1]],
            m: [-self.m[0], -self.m[1]],
        }
    }
}

impl fmt::Display for LatticeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(({},{}),({},{}))",
            self.p[0], self.p[1], self.m[0], self.m[1]
        )
    }
}

/// How the irrational frequency was specified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FrequencyKind {
    /// `α = (a + b√d) / den` with integer `a, b, den` and squarefree `d > 1`.
    Quadratic {
        a: i64,
        b: i64,
        d: i64,
        #[serde(default = "one")]
        den: i64,
    },
    /// A decimal literal. Small-denominator diagnostics inherit its truncation
    /// error, so `|p + αm|` below roughly `1e-16·|m|` is meaningless.
    Decimal { value: f64 },
}

fn one() -> i64 {
    1
}

/// The irrational frequency `α` of the potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frequency {
    value: f64,
    kind: FrequencyKind,
    mu_assumed: f64,
}

impl Frequency {
    pub fn quadratic(a: i64, b: i64, d: i64, den: i64) -> Result<Self> {
        if b == 0 {
            return Err(Error::InvalidFrequency("b = 0 makes α rational".into()));
        }
        if den == 0 {
            return Err(Error::InvalidFrequency("zero denominator".into()));
        }
        if d < 2 || !is_squarefree(d) {
            return Err(Error::InvalidFrequency(format!(
                "d = {d} is not a squarefree integer > 1"
            )));
        }
        let value = (a as f64 + b as f64 * (d as f64).sqrt()) / den as f64;
        Ok(Self {
            value,
            kind: FrequencyKind::Quadratic { a, b, d, den },
            mu_assumed: 2.0,
        })
    }

    pub fn sqrt2() -> Self {
        Self::quadratic(0, 1, 2, 1).expect("√2 is a valid quadratic irrational")
    }

    pub fn golden() -> Self {
        Self::quadratic(1, 1, 5, 2).expect("golden mean is a valid quadratic irrational")
    }

    pub fn decimal(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidFrequency(format!("α = {value} is not finite")));
        }
        if value.fract() == 0.0 {
            return Err(Error::InvalidFrequency(format!("α = {value} is an integer")));
        }
        Ok(Self {
            value,
            kind: FrequencyKind::Decimal { value },
            mu_assumed: 2.0,
        })
    }

    pub fn from_kind(kind: FrequencyKind) -> Result<Self> {
        match kind {
            FrequencyKind::Quadratic { a, b, d, den } => Self::quadratic(a, b, d, den),
            FrequencyKind::Decimal { value } => Self::decimal(value),
        }
    }

    /// Sets the assumed irrationality measure (diagnostic only).
    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        if !(mu >= 2.0) || !mu.is_finite() {
            return Err(Error::InvalidFrequency(format!("μ = {mu} must be finite and ≥ 2")));
        }
        self.mu_assumed = mu;
        Ok(self)
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn kind(&self) -> FrequencyKind {
        self.kind
    }

    pub fn mu_assumed(&self) -> f64 {
        self.mu_assumed
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.kind, FrequencyKind::Quadratic { .. })
    }

    /// `p + α·m` for scalar integers.
    ///
    /// For quadratic irrationals a cancelling sum `A + B√d` is evaluated as
    /// `(A² − B²d) / (A − B√d)`, whose numerator is an exact integer, so tiny
    /// shifts keep full relative precision.
    pub fn shift(&self, p: i64, m: i64) -> f64 {
        match self.kind {
            FrequencyKind::Decimal { value } => p as f64 + value * m as f64,
            FrequencyKind::Quadratic { a, b, d, den } => {
                if m == 0 {
                    return p as f64;
                }
                let big_a = den as i128 * p as i128 + a as i128 * m as i128;
                let big_b = b as i128 * m as i128;
                let root = (d as f64).sqrt();
                let num = if big_a != 0 && (big_a > 0) != (big_b > 0) {
                    let norm = big_a * big_a - big_b * big_b * d as i128;
                    norm as f64 / (big_a as f64 - big_b as f64 * root)
                } else {
                    big_a as f64 + big_b as f64 * root
                };
                num / den as f64
            }
        }
    }
}

fn is_squarefree(d: i64) -> bool {
    let mut f = 2i64;
    while f * f <= d {
        if d % (f * f) == 0 {
            return false;
        }
        f += 1;
    }
    true
}

/// `b(idx) = p + α·m`, componentwise.
pub fn dual_vector(idx: LatticeIndex, freq: &Frequency) -> Vec2 {
    [
        freq.shift(idx.p[0], idx.m[0]),
        freq.shift(idx.p[1], idx.m[1]),
    ]
}

/// Growth law for the nested boxes `Mₙ`.
///
/// Level `n` has sup-norm radii `(Rₙ, rₙ) = (R₁, r₁)·∏ factors[i]` over the
/// first `n − 1` factors (the last factor repeats). `radii`, when present,
/// lists the per-level radii explicitly and overrides the geometric law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthSchedule {
    pub p_radius: u32,
    pub m_radius: u32,
    #[serde(default = "default_factors")]
    pub factors: Vec<u32>,
    #[serde(default)]
    pub radii: Option<Vec<[u32; 2]>>,
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
}

fn default_factors() -> Vec<u32> {
    vec![2]
}

fn default_max_dim() -> usize {
    DEFAULT_MAX_DIM
}

impl GrowthSchedule {
    pub fn geometric(p_radius: u32, m_radius: u32, factor: u32) -> Self {
        Self {
            p_radius,
            m_radius,
            factors: vec![factor],
            radii: None,
            max_dim: DEFAULT_MAX_DIM,
        }
    }

    pub fn explicit(radii: Vec<[u32; 2]>) -> Self {
        let first = radii.first().copied().unwrap_or([1, 1]);
        Self {
            p_radius: first[0],
            m_radius: first[1],
            factors: default_factors(),
            radii: Some(radii),
            max_dim: DEFAULT_MAX_DIM,
        }
    }

    pub fn with_max_dim(mut self, cap: usize) -> Self {
        self.max_dim = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(radii) = &self.radii {
            if radii.is_empty() {
                return Err(Error::InvalidSchedule("explicit radii list is empty".into()));
            }
            if radii[0][0] < 1 || radii[0][1] < 1 {
                return Err(Error::InvalidSchedule("level-1 radii must be ≥ 1".into()));
            }
            for w in radii.windows(2) {
                if w[1][0] < w[0][0] || w[1][1] < w[0][1] {
                    return Err(Error::InvalidSchedule(format!(
                        "radii {:?} -> {:?} break nesting",
                        w[0], w[1]
                    )));
                }
            }
            return Ok(());
        }
        if self.p_radius < 1 || self.m_radius < 1 {
            return Err(Error::InvalidSchedule("R₁ and r₁ must be ≥ 1".into()));
        }
        if self.factors.is_empty() || self.factors.iter().any(|&f| f < 2) {
            return Err(Error::InvalidSchedule("growth factors must be ≥ 2".into()));
        }
        Ok(())
    }

    /// Sup-norm radii `(Rₙ, rₙ)` at `level ≥ 1`.
    pub fn radii(&self, level: u32) -> Result<(i64, i64)> {
        if level < 1 {
            return Err(Error::InvalidSchedule("level must be ≥ 1".into()));
        }
        self.validate()?;
        if let Some(radii) = &self.radii {
            let r = radii
                .get(level as usize - 1)
                .ok_or_else(|| {
                    Error::InvalidSchedule(format!(
                        "explicit schedule has {} levels, level {level} requested",
                        radii.len()
                    ))
                })?;
            return Ok((r[0] as i64, r[1] as i64));
        }
        let mut rp = self.p_radius as i64;
        let mut rm = self.m_radius as i64;
        for i in 0..(level as usize - 1) {
            let f = *self.factors.get(i).unwrap_or(self.factors.last().unwrap()) as i64;
            rp = rp.checked_mul(f).ok_or_else(|| overflow(level))?;
            rm = rm.checked_mul(f).ok_or_else(|| overflow(level))?;
        }
        Ok((rp, rm))
    }

    pub fn levels(&self) -> Option<usize> {
        self.radii.as_ref().map(|r| r.len())
    }
}

fn overflow(level: u32) -> Error {
    Error::InvalidSchedule(format!("radius overflow at level {level}"))
}

/// Box dimension `(2R+1)²(2r+1)²`.
pub fn box_cardinality(p_radius: i64, m_radius: i64) -> usize {
    let a = (2 * p_radius + 1) as usize;
    let b = (2 * m_radius + 1) as usize;
    a * a * b * b
}

/// The finite index set `Mₙ = {(p,m) : |p|∞ ≤ Rₙ, |m|∞ ≤ rₙ}` in canonical order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncationSet {
    level: u32,
    p_radius: i64,
    m_radius: i64,
    indices: Vec<LatticeIndex>,
}

impl TruncationSet {
    /// A box with the given radii; `m_radius = 0` is allowed (periodic sub-lattice).
    pub fn from_box(level: u32, p_radius: i64, m_radius: i64) -> Self {
        assert!(p_radius >= 0 && m_radius >= 0, "negative box radius");
        let mut indices = Vec::with_capacity(box_cardinality(p_radius, m_radius));
        for m1 in -m_radius..=m_radius {
            for m2 in -m_radius..=m_radius {
                for p1 in -p_radius..=p_radius {
                    for p2 in -p_radius..=p_radius {
                        indices.push(LatticeIndex::new([p1, p2], [m1, m2]));
                    }
                }
            }
        }
        Self {
            level,
            p_radius,
            m_radius,
            indices,
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn p_radius(&self) -> i64 {
        self.p_radius
    }

    pub fn m_radius(&self) -> i64 {
        self.m_radius
    }

    pub fn indices(&self) -> &[LatticeIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, idx: &LatticeIndex) -> bool {
        idx.p_sup() <= self.p_radius && idx.m_sup() <= self.m_radius
    }

    /// Row of `idx` in the canonical layout.
    pub fn position(&self, idx: &LatticeIndex) -> Option<usize> {
        if !self.contains(idx) {
            return None;
        }
        let wp = 2 * self.p_radius + 1;
        let wm = 2 * self.m_radius + 1;
        let mpart = (idx.m[0] + self.m_radius) * wm + (idx.m[1] + self.m_radius);
        let ppart = (idx.p[0] + self.p_radius) * wp + (idx.p[1] + self.p_radius);
        Some((mpart * wp * wp + ppart) as usize)
    }

    pub fn zero_position(&self) -> usize {
        self.position(&LatticeIndex::ZERO)
            .expect("every box contains the zero index")
    }

    pub fn is_subset_of(&self, other: &TruncationSet) -> bool {
        self.p_radius <= other.p_radius && self.m_radius <= other.m_radius
    }

    pub fn dual_vectors(&self, freq: &Frequency) -> Vec<Vec2> {
        self.indices.iter().map(|&i| dual_vector(i, freq)).collect()
    }

    /// CSV with header `p1,p2,m1,m2`, rows in canonical order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p1,p2,m1,m2\n");
        for i in &self.indices {
            out.push_str(&format!("{},{},{},{}\n", i.p[0], i.p[1], i.m[0], i.m[1]));
        }
        out
    }
}

/// Builds `Mₙ` for `level` under `schedule`, rejecting sets whose dense matrix
/// would exceed `schedule.max_dim`.
pub fn build_truncation(level: u32, schedule: &GrowthSchedule) -> Result<TruncationSet> {
    let (rp, rm) = schedule.radii(level)?;
    let dim = box_cardinality(rp, rm);
    if dim > schedule.max_dim {
        return Err(Error::DimensionCap {
            dim,
            cap: schedule.max_dim,
        });
    }
    Ok(TruncationSet::from_box(level, rp, rm))
}

/// Minimum of `|p + αm|` over the nonzero indices of `set`, with a minimizer.
///
/// Ties resolve to the minimizer whose dual vector is lexicographically largest.
/// Returns `None` only for the single-point set `{0}`.
pub fn min_shift_norm(set: &TruncationSet, freq: &Frequency) -> Option<(f64, LatticeIndex)> {
    let mut best: Option<(f64, Vec2, LatticeIndex)> = None;
    for &idx in set.indices() {
        if idx.is_zero() {
            continue;
        }
        let b = dual_vector(idx, freq);
        let n = b[0].hypot(b[1]);
        let better = match &best {
            None => true,
            Some((bn, bb, _)) => n < *bn || (n == *bn && (b[0], b[1]) > (bb[0], bb[1])),
        };
        if better {
            best = Some((n, b, idx));
        }
    }
    best.map(|(n, _, i)| (n, i))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiophantineRow {
    pub box_size: u32,
    pub min_norm: f64,
    pub minimizer: LatticeIndex,
}

/// Minimal `|p + αm|` over boxes `R = r = 1..=max_box`.
pub fn diophantine_report(freq: &Frequency, max_box: u32) -> Vec<DiophantineRow> {
    // Each box is scanned only on its outer shell; the running minimum carries over.
    let mut rows = Vec::with_capacity(max_box as usize);
    let mut best: Option<(f64, Vec2, LatticeIndex)> = None;
    for size in 1..=max_box as i64 {
        let set = TruncationSet::from_box(0, size, size);
        for &idx in set.indices() {
            if idx.is_zero() || (idx.p_sup() < size && idx.m_sup() < size) {
                continue;
            }
            let b = dual_vector(idx, freq);
            let n = b[0].hypot(b[1]);
            let better = match &best {
                None => true,
                Some((bn, bb, _)) => n < *bn || (n == *bn && (b[0], b[1]) > (bb[0], bb[1])),
            };
            if better {
                best = Some((n, b, idx));
            }
        }
        let (n, _, i) = best.expect("box of radius ≥ 1 has nonzero indices");
        rows.push(DiophantineRow {
            box_size: size as u32,
            min_norm: n,
            minimizer: i,
        });
    }
    rows
}

pub fn diophantine_csv(rows: &[DiophantineRow]) -> String {
    let mut out = String::from("box,min_norm,p1,p2,m1,m2\n");
    for r in rows {
        let i = r.minimizer;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.box_size, r.min_norm, i.p[0], i.p[1], i.m[0], i.m[1]
        ));
    }
    out
}
