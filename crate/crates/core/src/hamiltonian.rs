//! Dense truncations `H⁽ⁿ⁾(k) = PₙH(k)Pₙ` of `H(k) = H₀(k) + V`, where
//! `H₀(k)` is diagonal with entries `|k + p + αm|^{2l}` and `V` couples
//! `(p,m)` to `(p',m')` through `g·V_{p−p', m−m'}`.

use std::collections::BTreeMap;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{dual_vector, LatticeIndex, TruncationSet, Vec2, DEFAULT_MAX_DIM};
use crate::potential::PotentialSpec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentumPoint {
    pub k: Vec2,
}

impl MomentumPoint {
    pub fn new(kx: f64, ky: f64) -> Result<Self> {
        if !(kx.is_finite() && ky.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite momentum ({kx}, {ky})")));
        }
        Ok(Self { k: [kx, ky] })
    }

    pub fn polar(radius: f64, phi: f64) -> Result<Self> {
        Self::new(radius * phi.cos(), radius * phi.sin())
    }

    pub fn norm(&self) -> f64 {
        self.k[0].hypot(self.k[1])
    }

    pub fn shifted(&self, b: Vec2) -> Self {
        Self {
            k: [self.k[0] + b[0], self.k[1] + b[1]],
        }
    }
}

/// `|k + b|^{2l}`.
pub fn kinetic(k: Vec2, b: Vec2, order: u32) -> f64 {
    let x = k[0] + b[0];
    let y = k[1] + b[1];
    (x * x + y * y).powi(order as i32)
}

#[derive(Clone, Copy, Debug)]
pub struct AssemblyOptions {
    pub allow_non_hermitian: bool,
    pub max_dim: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            allow_non_hermitian: false,
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HamiltonianMatrix {
    k: MomentumPoint,
    shift: LatticeIndex,
    set: Arc<TruncationSet>,
    entries: Mat<Complex64>,
    diag: Vec<f64>,
}

impl HamiltonianMatrix {
    pub fn k(&self) -> MomentumPoint {
        self.k
    }

    /// Translation applied to the block (zero for an unshifted assembly).
    pub fn shift(&self) -> LatticeIndex {
        self.shift
    }

    pub fn set(&self) -> &Arc<TruncationSet> {
        &self.set
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn entries(&self) -> &Mat<Complex64> {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    /// Unperturbed diagonal `|k + b(idx)|^{2l}`.
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn is_hermitian(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| {
            self.entries[(i, i)].im == 0.0
                && (0..i).all(|j| self.entries[(i, j)] == self.entries[(j, i)].conj())
        })
    }

    pub fn multiply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            let vj = v[j];
            if vj == Complex64::new(0.0, 0.0) {
                continue;
            }
            let col = self.entries.col(j);
            for i in 0..n {
                out[i] += col[i] * vj;
            }
        }
        out
    }

    /// `(row, col, re, im)` for every nonzero entry, row-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,re,im\n");
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                let z = self.entries[(i, j)];
                if z != Complex64::new(0.0, 0.0) {
                    out.push_str(&format!("{i},{j},{},{}\n", z.re, z.im));
                }
            }
        }
        out
    }
}

pub fn assemble(
    spec: &PotentialSpec,
    k: MomentumPoint,
    set: &Arc<TruncationSet>,
) -> Result<HamiltonianMatrix> {
    assemble_with(spec, k, LatticeIndex::ZERO, set, &AssemblyOptions::default())
}

/// The block `H⁽ˢ⁾(k + b(shift))` over `set_s`.
///
/// The diagonal is evaluated as `|k + b(idx + shift)|^{2l}` so that the block is
/// entrywise identical to the `(idx + shift)` rows of an unshifted assembly.
pub fn assemble_shifted(
    spec: &PotentialSpec,
    k: MomentumPoint,
    shift: LatticeIndex,
    set_s: &Arc<TruncationSet>,
) -> Result<HamiltonianMatrix> {
    assemble_with(spec, k, shift, set_s, &AssemblyOptions::default())
}

pub fn assemble_with(
    spec: &PotentialSpec,
    k: MomentumPoint,
    shift: LatticeIndex,
    set: &Arc<TruncationSet>,
    opts: &AssemblyOptions,
) -> Result<HamiltonianMatrix> {
    let hermitian = check_assembly(spec, set, opts)?;
    let n = set.len();

    let diag = shifted_diagonal(spec, k, shift, set);
    let mut entries = Mat::<Complex64>::zeros(n, n);
    for (i, d) in diag.iter().enumerate() {
        entries[(i, i)] = Complex64::new(*d, 0.0);
    }
    let terms = spec.scaled_terms();
    for (row, idx) in set.indices().iter().enumerate() {
        for (key, v) in &terms {
            // H[row, col] = g·V_{row − col}  ⇒  col = row − key.
            if hermitian && *key < LatticeIndex::ZERO {
                continue;
            }
            if let Some(col) = set.position(&(*idx - *key)) {
                entries[(row, col)] = *v;
                if hermitian {
                    entries[(col, row)] = v.conj();
                }
            }
        }
    }
    let h = HamiltonianMatrix {
        k,
        shift,
        set: Arc::clone(set),
        entries,
        diag,
    };
    debug_assert!(!hermitian || h.is_hermitian());
    Ok(h)
}

/// The checks [`assemble_with`] applies before building anything; returns
/// whether the potential is Hermitian.
pub fn check_assembly(spec: &PotentialSpec, set: &TruncationSet, opts: &AssemblyOptions) -> Result<bool> {
    let violations = spec.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidPotential(violations));
    }
    let hermitian = spec.is_hermitian();
    if !hermitian && !opts.allow_non_hermitian {
        return Err(Error::NonHermitianPotential);
    }
    let n = set.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty truncation set".into()));
    }
    if n > opts.max_dim {
        return Err(Error::DimensionCap { dim: n, cap: opts.max_dim });
    }
    Ok(hermitian)
}

/// `|k + b(idx + shift)|^{2l}` over `set`.
pub fn shifted_diagonal(
    spec: &PotentialSpec,
    k: MomentumPoint,
    shift: LatticeIndex,
    set: &TruncationSet,
) -> Vec<f64> {
    set.indices()
        .iter()
        .map(|&idx| kinetic(k.k, dual_vector(idx + shift, &spec.freq), spec.order))
        .collect()
}

/// `H(k)·u` for `u` supported on `set`, evaluated on the full lattice: the
/// result lives on `set ⊕ supp(V)` and is returned in canonical order.
pub fn apply_full(
    spec: &PotentialSpec,
    k: MomentumPoint,
    set: &TruncationSet,
    coeffs: &[Complex64],
) -> Result<BTreeMap<LatticeIndex, Complex64>> {
    if coeffs.len() != set.len() {
        return Err(Error::Mismatch(format!(
            "{} coefficients for a set of {} indices",
            coeffs.len(),
            set.len()
        )));
    }
    let terms = spec.scaled_terms();
    let zero = Complex64::new(0.0, 0.0);
    let mut out = BTreeMap::new();
    for (&idx, &u) in set.indices().iter().zip(coeffs) {
        if u == zero {
            continue;
        }
        let d = kinetic(k.k, dual_vector(idx, &spec.freq), spec.order);
        *out.entry(idx).or_insert(zero) += u * d;
        for (key, v) in &terms {
            *out.entry(idx + *key).or_insert(zero) += *v * u;
        }
    }
    Ok(out)
}
