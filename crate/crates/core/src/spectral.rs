//! Dense Hermitian eigendecomposition and continuation of the non-resonant
//! branch `λ⁽ⁿ⁾(k)` across the nested truncations.
//!
//! The branch is followed by maximal overlap: at level `n` the selected
//! eigenvector is the one with the largest `|⟨v, ext(u⁽ⁿ⁻¹⁾)⟩|²`, where `ext`
//! zero-extends the previous vector into `Mₙ`. A selection whose overlap is not
//! above `overlap_floor`, or whose eigenvalue sits within `gap_floor` of a
//! neighbour, is reported as resonant.
//!
//! Eigenvalues of accepted pairs are refined through the zero-index row of the
//! eigen-equation, `λ − |k|^{2l} = Σⱼ H₀ⱼ uⱼ / u₀`. The dense solver's absolute
//! error scales with the largest diagonal entry, while this level shift is
//! accurate relative to its own (small) size, which is what makes cross-level
//! differences and radial root-finding meaningful far below `ε·‖H‖`.

use std::sync::Arc;

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{
    apply_full, assemble, check_assembly, kinetic, shifted_diagonal, AssemblyOptions, HamiltonianMatrix, MomentumPoint,
};
use crate::lattice::{build_truncation, dual_vector, GrowthSchedule, LatticeIndex, TruncationSet, Vec2};
use crate::potential::PotentialSpec;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Below this weight `|u₀|²` the zero-row refinement is skipped.
const REFINE_WEIGHT_FLOOR: f64 = 0.25;

/// Eigenvalues ascending with orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: Mat<Complex64>,
}

impl Eigensystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, i: usize) -> Vec<Complex64> {
        let col = self.vectors.col(i);
        (0..self.len()).map(|r| col[r]).collect()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, Vec<Complex64>)> + '_ {
        (0..self.len()).map(|i| (self.values[i], self.vector(i)))
    }

    /// Distance from eigenvalue `i` to its nearest neighbour (`∞` when alone).
    pub fn gap(&self, i: usize) -> f64 {
        let mut g = f64::INFINITY;
        if i > 0 {
            g = g.min(self.values[i] - self.values[i - 1]);
        }
        if i + 1 < self.len() {
            g = g.min(self.values[i + 1] - self.values[i]);
        }
        g
    }
}

pub fn eig_all(h: &HamiltonianMatrix) -> Result<Eigensystem> {
    if !h.is_hermitian() {
        return Err(Error::NonHermitianMatrix);
    }
    eig_hermitian(h.entries())
}

/// Ascending permutation of the diagonal when every off-diagonal entry is zero.
/// Such matrices are decomposed exactly instead of by the dense solver.
fn diagonal_order(a: &Mat<Complex64>) -> Option<Vec<usize>> {
    let n = a.nrows();
    for c in 0..n {
        for r in 0..n {
            if r != c && a[(r, c)] != ZERO {
                return None;
            }
        }
    }
    if (0..n).any(|i| !a[(i, i)].re.is_finite()) {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    Some(order)
}

/// Full eigendecomposition of a Hermitian matrix (lower triangle is read).
pub fn eig_hermitian(a: &Mat<Complex64>) -> Result<Eigensystem> {
    if let Some(order) = diagonal_order(a) {
        let n = a.nrows();
        let values = order.iter().map(|&i| a[(i, i)].re).collect();
        let vectors = Mat::<Complex64>::from_fn(n, n, |r, c| if r == order[c] { Complex64::new(1.0, 0.0) } else { ZERO });
        return Ok(Eigensystem { values, vectors });
    }
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Solver(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..a.nrows()).map(|i| s[i].re).collect();
    let vectors = evd.U().to_owned();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("non-finite eigenvalue".into()));
    }
    for j in 0..vectors.ncols() {
        let col = vectors.col(j);
        if (0..vectors.nrows()).any(|i| !(col[i].re.is_finite() && col[i].im.is_finite())) {
            return Err(Error::Solver("non-finite eigenvector".into()));
        }
    }
    Ok(Eigensystem { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn eigenvalues_hermitian(a: &Mat<Complex64>) -> Result<Vec<f64>> {
    if let Some(order) = diagonal_order(a) {
        return Ok(order.iter().map(|&i| a[(i, i)].re).collect());
    }
    let v = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Solver(format!("{e:?}")))?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Solver("non-finite eigenvalue".into()));
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionParams {
    pub overlap_floor: f64,
    /// Relative gap floor; the absolute floor is `gap_floor·(1 + |λ|)`.
    pub gap_floor: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self {
            overlap_floor: 0.5,
            gap_floor: 1e-8,
        }
    }
}

impl SelectionParams {
    pub fn absolute_gap_floor(&self, lambda: f64) -> f64 {
        self.gap_floor * (1.0 + lambda.abs())
    }
}

#[derive(Clone, Debug)]
pub struct SpectralPair {
    pub level: u32,
    pub k: MomentumPoint,
    pub set: Arc<TruncationSet>,
    /// `λ⁽ⁿ⁾(k)`.
    pub lambda: f64,
    /// `λ⁽ⁿ⁾(k) − |k|^{2l}`.
    pub level_shift: f64,
    /// Unit-norm `u⁽ⁿ⁾` over `set`, zero-index entry real and nonnegative.
    pub coeffs: Vec<Complex64>,
    pub overlap_prev: f64,
    /// `‖u⁽ⁿ⁾ − ext(u⁽ⁿ⁻¹⁾)‖₁`.
    pub l1_increment: f64,
    /// Distance to the nearest other eigenvalue of `H⁽ⁿ⁾(k)`.
    pub gap: f64,
}

impl SpectralPair {
    /// The plane wave `u⁽⁰⁾ = δ₀` with `λ = |k|^{2l}`, as a level-0 pair on `set`.
    pub fn unperturbed(spec: &PotentialSpec, k: MomentumPoint, set: Arc<TruncationSet>) -> Self {
        let mut coeffs = vec![ZERO; set.len()];
        coeffs[set.zero_position()] = Complex64::new(1.0, 0.0);
        Self {
            level: 0,
            k,
            set,
            lambda: kinetic(k.k, [0.0, 0.0], spec.order),
            level_shift: 0.0,
            coeffs,
            overlap_prev: 1.0,
            l1_increment: 0.0,
            gap: f64::INFINITY,
        }
    }

    pub fn zero_coefficient(&self) -> Complex64 {
        self.coeffs[self.set.zero_position()]
    }

    /// Zero-extension of the coefficients into `target ⊇ self.set`.
    pub fn extend_into(&self, target: &TruncationSet) -> Result<Vec<Complex64>> {
        if !self.set.is_subset_of(target) {
            return Err(Error::Mismatch("target set does not contain the pair's set".into()));
        }
        let mut out = vec![ZERO; target.len()];
        for (idx, u) in self.set.indices().iter().zip(&self.coeffs) {
            out[target.position(idx).expect("nested")] = *u;
        }
        Ok(out)
    }

    /// `‖u − u⁽⁰⁾‖₁`.
    pub fn l1_distance_from_plane_wave(&self) -> f64 {
        let z = self.set.zero_position();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, u)| if i == z { (*u - 1.0).norm() } else { u.norm() })
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResonantWitness {
    pub level: u32,
    /// Best squared overlap achieved.
    pub overlap: f64,
    /// Gap of the best candidate to its nearest neighbour.
    pub gap: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug)]
pub enum Continuation {
    Accepted(SpectralPair),
    Resonant(ResonantWitness),
}

impl Continuation {
    pub fn accepted(self) -> Option<SpectralPair> {
        match self {
            Continuation::Accepted(p) => Some(p),
            Continuation::Resonant(_) => None,
        }
    }
}

/// Index of the eigenvector with maximal `|⟨v, target⟩|²` (lowest index on
/// ties) and that overlap.
pub fn select_by_overlap(sys: &Eigensystem, target: &[Complex64]) -> (usize, f64) {
    let mut best = (0usize, -1.0f64);
    for i in 0..sys.len() {
        let col = sys.vectors.col(i);
        let mut dot = ZERO;
        for (r, t) in target.iter().enumerate() {
            if *t != ZERO {
                dot += col[r].conj() * *t;
            }
        }
        let ov = dot.norm_sqr();
        if ov > best.1 {
            best = (i, ov);
        }
    }
    best
}

/// Rotates `v` so its zero-index entry is real and nonnegative; if that entry
/// vanishes, the first largest-modulus entry is used instead.
pub fn fix_phase(v: &mut [Complex64], zero_pos: usize) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let anchor = if v[zero_pos].norm() > 1e-12 * max {
        zero_pos
    } else {
        let mut a = 0;
        for (i, z) in v.iter().enumerate() {
            if z.norm() > v[a].norm() {
                a = i;
            }
        }
        a
    };
    let z = v[anchor];
    let r = z.norm();
    if r == 0.0 {
        return;
    }
    let rot = z.conj() / r;
    for x in v.iter_mut() {
        *x *= rot;
    }
    v[anchor] = Complex64::new(r, 0.0);
}

/// Level shift `λ − |k|^{2l}` from the zero-index row of `H u = λ u`.
fn zero_row_shift(spec: &PotentialSpec, set: &TruncationSet, coeffs: &[Complex64]) -> Option<f64> {
    let z = set.zero_position();
    let u0 = coeffs[z];
    if u0.norm_sqr() < REFINE_WEIGHT_FLOOR {
        return None;
    }
    let mut acc = ZERO;
    for (key, v) in spec.scaled_terms() {
        // Row 0, column j: g·V_{0 − j}, so j = −key.
        if let Some(j) = set.position(&(-key)) {
            acc += v * coeffs[j];
        }
    }
    Some((acc / u0).re)
}

/// Components whose diagonal sits this many `‖gV‖₁` away from `λ` are
/// recomputed from their own row of the eigen-equation.
const POLISH_RATIO: f64 = 4.0;
const POLISH_SWEEPS: usize = 3;

/// Jacobi sweeps `uᵢ ← Σ g·V_{i−j}u_j / (λ − dᵢ)` over the far components.
/// The dense solver leaves absolute noise of order `ε` in every component;
/// multiplied by `|dᵢ − λ|` that noise dominates the residual of tiny far
/// components, and these sweeps remove it.
fn polish(spec: &PotentialSpec, set: &TruncationSet, diag: &[f64], coeffs: &mut [Complex64], lambda: f64) {
    let terms = spec.scaled_terms();
    let vsum: f64 = terms.iter().map(|(_, v)| v.norm()).sum();
    if vsum == 0.0 {
        return;
    }
    let z = set.zero_position();
    let far: Vec<usize> = (0..set.len())
        .filter(|&i| i != z && (diag[i] - lambda).abs() >= POLISH_RATIO * vsum)
        .collect();
    for _ in 0..POLISH_SWEEPS {
        let old = coeffs.to_vec();
        for &i in &far {
            let idx = set.indices()[i];
            let mut acc = ZERO;
            for (key, v) in &terms {
                if let Some(j) = set.position(&(idx - *key)) {
                    acc += *v * old[j];
                }
            }
            coeffs[i] = acc / (lambda - diag[i]);
        }
    }
    let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in coeffs.iter_mut() {
        *c /= norm;
    }
}

/// Truncations at least this large are first tried with [`window_select`].
const WINDOW_MIN_DIM: usize = 64;
/// Half-width of the near set in units of `‖gV‖₁`.
const WINDOW_RATIO: f64 = 40.0;
const WINDOW_MAX_NEAR: usize = 400;
const WINDOW_MAX_STEPS: usize = 12;

struct WindowPair {
    lambda: f64,
    vector: Vec<Complex64>,
    overlap: f64,
    gap: f64,
}

/// Feshbach reduction of `H` onto the near set `N = {i : |dᵢ − c| < T}`.
///
/// With `w = ‖gV‖₁` every eigenvalue `μ` of `H` in `|μ − c| < T/2` solves
/// `μ ∈ spec S(μ)`, `S(μ) = H_NN − H_NF(H_FF − μ)⁻¹H_FN`, and conversely. The
/// inverse is a Jacobi series contracting by `2w/T` per term, and the branches
/// `ν_j(μ)` of `spec S(μ)` have slope at most `(w/(T/2 − w))²`, so each
/// fixed point is reached in a few steps.
struct Feshbach<'a> {
    diag: &'a [f64],
    /// `H[r, c] = v` for every `(c, v)` in `links[r]`.
    links: Vec<Vec<(usize, Complex64)>>,
    near: Vec<usize>,
    local: Vec<usize>,
    centre: f64,
    reach: f64,
    sweeps: usize,
}

impl Feshbach<'_> {
    fn is_far(&self, i: usize) -> bool {
        self.local[i] == usize::MAX
    }

    /// `S(μ)` and the columns of `(H_FF − μ)⁻¹H_FN`.
    fn reduce(&self, mu: f64) -> (Mat<Complex64>, Vec<Vec<Complex64>>) {
        let n = self.diag.len();
        let m = self.near.len();
        let mut s = Mat::<Complex64>::zeros(m, m);
        let mut cols = Vec::with_capacity(m);
        for (col, &j) in self.near.iter().enumerate() {
            let mut y = vec![ZERO; n];
            for &(c, v) in &self.links[j] {
                if self.is_far(c) {
                    y[c] = v.conj();
                }
            }
            let mut x = vec![ZERO; n];
            let mut next = vec![ZERO; n];
            for _ in 0..self.sweeps {
                for f in 0..n {
                    if !self.is_far(f) {
                        continue;
                    }
                    let mut acc = y[f];
                    for &(c, v) in &self.links[f] {
                        if self.is_far(c) {
                            acc -= v * x[c];
                        }
                    }
                    next[f] = acc / (self.diag[f] - mu);
                }
                std::mem::swap(&mut x, &mut next);
            }
            for (a, &i) in self.near.iter().enumerate() {
                let mut acc = if a == col { Complex64::new(self.diag[i], 0.0) } else { ZERO };
                for &(c, v) in &self.links[i] {
                    if self.is_far(c) {
                        acc -= v * x[c];
                    } else if self.local[c] == col {
                        acc += v;
                    }
                }
                s[(a, col)] = acc;
            }
            cols.push(x);
        }
        (s, cols)
    }

    /// Unit vector `(x, −(H_FF − μ)⁻¹H_FN x)`.
    fn lift(&self, x: &[Complex64], cols: &[Vec<Complex64>]) -> Vec<Complex64> {
        let mut u = vec![ZERO; self.diag.len()];
        for (a, col) in cols.iter().enumerate() {
            if x[a] == ZERO {
                continue;
            }
            for (f, c) in col.iter().enumerate() {
                if *c != ZERO {
                    u[f] -= *c * x[a];
                }
            }
        }
        for (a, &i) in self.near.iter().enumerate() {
            u[i] = x[a];
        }
        let norm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        u.iter_mut().for_each(|z| *z /= norm);
        u
    }

    fn inside(&self, mu: f64) -> bool {
        (mu - self.centre).abs() < self.reach
    }

    /// Fixed point of branch `j` from `mu`, with its eigenvector; `None` when
    /// the iteration leaves the window or stalls.
    fn branch(&self, j: usize, mut mu: f64) -> Option<(f64, Vec<Complex64>)> {
        for _ in 0..WINDOW_MAX_STEPS {
            let (s, cols) = self.reduce(mu);
            let sys = eig_hermitian(&s).ok()?;
            let nu = sys.values[j];
            if !self.inside(nu) {
                return None;
            }
            if (nu - mu).abs() <= 8.0 * f64::EPSILON * nu.abs().max(1.0) {
                return Some((nu, self.lift(&sys.vector(j), &cols)));
            }
            mu = nu;
        }
        None
    }
}

/// The branch continuing `target`, found without a dense solve. `None` leaves
/// the decision to the dense solver: no candidate above the overlap floor, a
/// gap below its floor, or a near set that is empty or too large.
///
/// The returned gap is exact when the neighbouring eigenvalue lies inside the
/// window and a lower bound otherwise.
fn window_select(
    spec: &PotentialSpec,
    set: &TruncationSet,
    diag: &[f64],
    target: &[Complex64],
    params: &SelectionParams,
) -> Option<WindowPair> {
    let terms = spec.scaled_terms();
    let w: f64 = terms.iter().map(|(_, v)| v.norm()).sum();
    if w == 0.0 {
        return None;
    }
    let links: Vec<Vec<(usize, Complex64)>> = set
        .indices()
        .iter()
        .map(|&idx| terms.iter().filter_map(|(s, v)| set.position(&(idx - *s)).map(|c| (c, *v))).collect())
        .collect();
    let weight: f64 = target.iter().map(|t| t.norm_sqr()).sum();
    if weight == 0.0 {
        return None;
    }
    let mut rq = 0.0;
    for (r, t) in target.iter().enumerate() {
        if *t == ZERO {
            continue;
        }
        let mut ht = *t * diag[r];
        for &(c, v) in &links[r] {
            ht += v * target[c];
        }
        rq += (t.conj() * ht).re;
    }
    let centre = rq / weight;
    let half = WINDOW_RATIO * w;
    let near: Vec<usize> = (0..diag.len()).filter(|&i| (diag[i] - centre).abs() < half).collect();
    if near.is_empty() || near.len() > WINDOW_MAX_NEAR {
        return None;
    }
    let mut local = vec![usize::MAX; diag.len()];
    for (a, &i) in near.iter().enumerate() {
        local[i] = a;
    }
    let reach = half / 2.0;
    let q = w / (half - reach);
    let sweeps = (40.0 * std::f64::consts::LN_10 / -q.ln()).ceil() as usize;
    let fb = Feshbach {
        diag,
        links,
        near,
        local,
        centre,
        reach,
        sweeps,
    };

    let (s, cols) = fb.reduce(centre);
    let sys = eig_hermitian(&s).ok()?;
    let overlap_of = |u: &[Complex64]| {
        let mut dot = ZERO;
        for (x, t) in u.iter().zip(target) {
            if *t != ZERO {
                dot += x.conj() * *t;
            }
        }
        dot.norm_sqr() / weight
    };
    let mut best = (0usize, -1.0f64);
    for j in 0..sys.len() {
        let ov = overlap_of(&fb.lift(&sys.vector(j), &cols));
        if ov > best.1 {
            best = (j, ov);
        }
    }
    let j = best.0;
    let (lambda, vector) = fb.branch(j, sys.values[j])?;
    let overlap = overlap_of(&vector);
    if !(overlap > params.overlap_floor) {
        return None;
    }
    let mut gap = reach - (lambda - centre).abs();
    for nb in [j.wrapping_sub(1), j + 1] {
        if nb < sys.len() {
            if let Some((mu, _)) = fb.branch(nb, lambda) {
                gap = gap.min((mu - lambda).abs());
            }
        }
    }
    if gap < params.absolute_gap_floor(lambda) {
        return None;
    }
    Some(WindowPair { lambda, vector, overlap, gap })
}

fn select_pair(
    spec: &PotentialSpec,
    k: MomentumPoint,
    set: Arc<TruncationSet>,
    level: u32,
    target: &[Complex64],
    params: &SelectionParams,
) -> Result<Continuation> {
    let windowed = if set.len() >= WINDOW_MIN_DIM {
        check_assembly(spec, &set, &AssemblyOptions::default())?;
        let diag = shifted_diagonal(spec, k, LatticeIndex::ZERO, &set);
        window_select(spec, &set, &diag, target, params).map(|w| (w, diag))
    } else {
        None
    };
    let (dense_lambda, gap, overlap, mut coeffs, diag) = match windowed {
        Some((w, diag)) => (w.lambda, w.gap, w.overlap, w.vector, diag),
        None => {
            let h = assemble(spec, k, &set)?;
            let sys = eig_all(&h)?;
            let (i, overlap) = select_by_overlap(&sys, target);
            let dense_lambda = sys.values[i];
            let gap = sys.gap(i);
            if !(overlap > params.overlap_floor) || gap < params.absolute_gap_floor(dense_lambda) {
                return Ok(Continuation::Resonant(ResonantWitness {
                    level,
                    overlap,
                    gap,
                    lambda: dense_lambda,
                }));
            }
            (dense_lambda, gap, overlap, sys.vector(i), h.diag().to_vec())
        }
    };
    fix_phase(&mut coeffs, set.zero_position());
    let free = kinetic(k.k, [0.0, 0.0], spec.order);
    let rough = zero_row_shift(spec, &set, &coeffs).map_or(dense_lambda, |s| free + s);
    polish(spec, &set, &diag, &mut coeffs, rough);
    let level_shift = zero_row_shift(spec, &set, &coeffs).unwrap_or(dense_lambda - free);
    let l1_increment = coeffs.iter().zip(target).map(|(a, b)| (*a - *b).norm()).sum();
    Ok(Continuation::Accepted(SpectralPair {
        level,
        k,
        set,
        lambda: free + level_shift,
        level_shift,
        coeffs,
        overlap_prev: overlap.min(1.0),
        l1_increment,
        gap,
    }))
}

/// Step one: the eigenpair of `H⁽¹⁾(k)` continuing the plane wave `u⁽⁰⁾`.
pub fn initial_pair(
    spec: &PotentialSpec,
    k: MomentumPoint,
    set: Arc<TruncationSet>,
    params: &SelectionParams,
) -> Result<Continuation> {
    let mut target = vec![ZERO; set.len()];
    target[set.zero_position()] = Complex64::new(1.0, 0.0);
    select_pair(spec, k, set, 1, &target, params)
}

/// Step `n`: continues `prev` (level `n − 1`) into `set ⊇ prev.set`.
pub fn continue_pair(
    spec: &PotentialSpec,
    k: MomentumPoint,
    prev: &SpectralPair,
    set: Arc<TruncationSet>,
    params: &SelectionParams,
) -> Result<Continuation> {
    if prev.k != k {
        return Err(Error::Mismatch("previous pair was computed at another momentum".into()));
    }
    let target = prev.extend_into(&set)?;
    select_pair(spec, k, set, prev.level + 1, &target, params)
}

/// Hellmann–Feynman gradient `∇λ = Σ 2l|k+b|^{2l−2}(k+b)|u_b|²`.
pub fn gradient(spec: &PotentialSpec, pair: &SpectralPair, params: &SelectionParams) -> Result<Vec2> {
    let floor = params.absolute_gap_floor(pair.lambda);
    if pair.gap < floor {
        return Err(Error::NearDegenerate { gap: pair.gap, floor });
    }
    Ok(hellmann_feynman(spec, pair.k, &pair.set, &pair.coeffs))
}

pub(crate) fn hellmann_feynman(
    spec: &PotentialSpec,
    k: MomentumPoint,
    set: &TruncationSet,
    coeffs: &[Complex64],
) -> Vec2 {
    let l = spec.order as i32;
    let mut g = [0.0, 0.0];
    for (idx, u) in set.indices().iter().zip(coeffs) {
        let w = u.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let b = dual_vector(*idx, &spec.freq);
        let x = k.k[0] + b[0];
        let y = k.k[1] + b[1];
        let f = 2.0 * l as f64 * (x * x + y * y).powi(l - 1) * w;
        g[0] += f * x;
        g[1] += f * y;
    }
    g
}

/// Chain of pairs `λ⁽¹⁾, …, λ⁽ᴺ⁾` at a single momentum.
pub fn continue_chain(
    spec: &PotentialSpec,
    k: MomentumPoint,
    levels: u32,
    schedule: &GrowthSchedule,
    params: &SelectionParams,
) -> Result<std::result::Result<Vec<SpectralPair>, ResonantWitness>> {
    let mut pairs: Vec<SpectralPair> = Vec::with_capacity(levels as usize);
    for n in 1..=levels {
        let set = Arc::new(build_truncation(n, schedule)?);
        let step = match pairs.last() {
            None => initial_pair(spec, k, set, params)?,
            Some(prev) => continue_pair(spec, k, prev, set, params)?,
        };
        match step {
            Continuation::Accepted(p) => pairs.push(p),
            Continuation::Resonant(w) => return Ok(Err(w)),
        }
    }
    Ok(Ok(pairs))
}

/// `λ⁽ⁿ⁾(k)` at the top level of the chain, or the resonance that stopped it.
pub fn branch_pair(
    spec: &PotentialSpec,
    k: MomentumPoint,
    level: u32,
    schedule: &GrowthSchedule,
    params: &SelectionParams,
) -> Result<std::result::Result<SpectralPair, ResonantWitness>> {
    Ok(continue_chain(spec, k, level, schedule, params)?
        .map(|mut v| v.pop().expect("level ≥ 1 yields a pair")))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelRow {
    pub level: u32,
    pub lambda: f64,
    /// `|λ⁽ⁿ⁾ − λ⁽ⁿ⁻¹⁾|` with `λ⁽⁰⁾ = |k|^{2l}`.
    pub diff: f64,
    pub l1_increment: f64,
    /// `‖H⁽ⁿ⁺¹⁾ũ − λ⁽ⁿ⁾ũ‖₂` for the zero-extension `ũ` of `u⁽ⁿ⁾`.
    pub residual_next: f64,
    pub gradient: Vec2,
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub k: MomentumPoint,
    pub rows: Vec<LevelRow>,
    pub pairs: Vec<SpectralPair>,
    /// Least-squares slope of `ln diff` against `n` (diagnostic only).
    pub diff_decay_rate: Option<f64>,
    /// Least-squares slope of `ln residual_next` against `n` (diagnostic only).
    pub residual_decay_rate: Option<f64>,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,lambda,diff,l1_increment,residual_next,grad_x,grad_y\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.level, r.lambda, r.diff, r.l1_increment, r.residual_next, r.gradient[0], r.gradient[1]
            ));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub enum MultiscaleOutcome {
    Converged(ConvergenceReport),
    Resonant { level: u32, witness: ResonantWitness },
}

/// Residual of the zero-extended `u⁽ⁿ⁾` against the box with radii `next`.
pub fn residual_in_box(spec: &PotentialSpec, pair: &SpectralPair, next: (i64, i64)) -> Result<f64> {
    let hu = apply_full(spec, pair.k, &pair.set, &pair.coeffs)?;
    let mut sum = 0.0;
    for (idx, v) in hu {
        if idx.p_sup() > next.0 || idx.m_sup() > next.1 {
            continue;
        }
        let u = pair.set.position(&idx).map_or(ZERO, |i| pair.coeffs[i]);
        sum += (v - u * pair.lambda).norm_sqr();
    }
    Ok(sum.sqrt())
}

pub fn run_multiscale(
    spec: &PotentialSpec,
    k: MomentumPoint,
    levels: u32,
    schedule: &GrowthSchedule,
    params: &SelectionParams,
) -> Result<MultiscaleOutcome> {
    if levels < 1 {
        return Err(Error::InvalidArgument("at least one level is required".into()));
    }
    let pairs = match continue_chain(spec, k, levels, schedule, params)? {
        Ok(p) => p,
        Err(witness) => {
            return Ok(MultiscaleOutcome::Resonant {
                level: witness.level,
                witness,
            })
        }
    };
    let mut rows = Vec::with_capacity(pairs.len());
    let mut prev_shift = 0.0;
    for pair in &pairs {
        let next = schedule.radii(pair.level + 1).or_else(|_| {
            // Explicit schedules may end here; one more factor-2 shell stands in.
            let (rp, rm) = schedule.radii(pair.level)?;
            Ok::<_, Error>((2 * rp, 2 * rm))
        })?;
        rows.push(LevelRow {
            level: pair.level,
            lambda: pair.lambda,
            diff: (pair.level_shift - prev_shift).abs(),
            l1_increment: pair.l1_increment,
            residual_next: residual_in_box(spec, pair, next)?,
            gradient: gradient(spec, pair, params)?,
        });
        prev_shift = pair.level_shift;
    }
    let diff_decay_rate = log_slope(rows.iter().map(|r| (r.level, r.diff)));
    let residual_decay_rate = log_slope(rows.iter().map(|r| (r.level, r.residual_next)));
    Ok(MultiscaleOutcome::Converged(ConvergenceReport {
        k,
        rows,
        pairs,
        diff_decay_rate,
        residual_decay_rate,
    }))
}

fn log_slope(points: impl Iterator<Item = (u32, f64)>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .filter(|(_, y)| *y > 0.0 && y.is_finite())
        .map(|(x, y)| (x as f64, y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Zero index position helper for callers holding only a set.
pub fn plane_wave(set: &TruncationSet) -> Vec<Complex64> {
    let mut v = vec![ZERO; set.len()];
    v[set.zero_position()] = Complex64::new(1.0, 0.0);
    v
}

#[allow(dead_code)]
fn _assert_send_sync() {
    fn ok<T: Send + Sync>() {}
    ok::<SpectralPair>();
    ok::<LatticeIndex>();
}
