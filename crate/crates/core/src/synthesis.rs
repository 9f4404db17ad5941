//! Almost-plane waves `Ψₙ(k,x) = Σ u_idx e^{i⟨k+b(idx),x⟩}` and the exact
//! coefficient-space residual `fₙ = HΨₙ − λ⁽ⁿ⁾Ψₙ`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{apply_full, MomentumPoint};
use crate::lattice::{dual_vector, Frequency, LatticeIndex, Vec2};
use crate::potential::PotentialSpec;
use crate::spectral::SpectralPair;

/// Where the `2π` of the Fourier exponents lives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// `b = p + αm`, matching the diagonal `|k + p + αm|^{2l}`.
    #[default]
    Absorbed,
    /// `b = 2π(p + αm)`.
    Literal,
}

/// Largest number of grid points a single render may produce.
pub const DEFAULT_GRID_CAP: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveSample {
    pub x: Vec2,
    pub value: Complex64,
}

fn check_pair(pair: &SpectralPair) -> Result<()> {
    if pair.coeffs.len() != pair.set.len() {
        return Err(Error::Mismatch(format!(
            "{} coefficients for a set of {} indices",
            pair.coeffs.len(),
            pair.set.len()
        )));
    }
    Ok(())
}

fn phase(k: Vec2, b: Vec2, scale: f64, x: Vec2) -> f64 {
    (k[0] + scale * b[0]) * x[0] + (k[1] + scale * b[1]) * x[1]
}

/// `Σ u_idx e^{i⟨k+b(idx),x⟩}`.
pub fn eigenfunction(pair: &SpectralPair, freq: &Frequency, convention: Convention, x: Vec2) -> Complex64 {
    let scale = convention.scale();
    pair.set
        .indices()
        .iter()
        .zip(&pair.coeffs)
        .map(|(&idx, &u)| u * Complex64::from_polar(1.0, phase(pair.k.k, dual_vector(idx, freq), scale, x)))
        .sum()
}

/// A sparse exponential sum `Σ c_idx e^{i⟨k+b(idx),x⟩}`.
pub fn exponential_sum(
    k: MomentumPoint,
    terms: &BTreeMap<LatticeIndex, Complex64>,
    freq: &Frequency,
    convention: Convention,
    x: Vec2,
) -> Complex64 {
    let scale = convention.scale();
    terms
        .iter()
        .map(|(&idx, &c)| c * Complex64::from_polar(1.0, phase(k.k, dual_vector(idx, freq), scale, x)))
        .sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub level: u32,
    pub coeff_l1: f64,
    pub coeff_l2: f64,
    /// `‖f‖` restricted to the pair's own index set.
    pub interior_l2: f64,
    /// Indices with a nonzero residual coefficient, canonical order.
    pub support: Vec<LatticeIndex>,
    #[serde(skip)]
    pub coefficients: BTreeMap<LatticeIndex, Complex64>,
}

/// `fₙ = (H − λ⁽ⁿ⁾)Ψₙ` in coefficient space on `Mₙ ⊕ supp V`.
pub fn residual_coefficients(spec: &PotentialSpec, pair: &SpectralPair) -> Result<ResidualReport> {
    check_pair(pair)?;
    let mut coefficients = apply_full(spec, pair.k, &pair.set, &pair.coeffs)?;
    for (idx, u) in pair.set.indices().iter().zip(&pair.coeffs) {
        if let Some(c) = coefficients.get_mut(idx) {
            *c -= *u * pair.lambda;
        }
    }
    coefficients.retain(|_, c| c.norm_sqr() != 0.0);
    let coeff_l1 = coefficients.values().map(|c| c.norm()).sum();
    let coeff_l2 = coefficients.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let interior_l2 = coefficients
        .iter()
        .filter(|(idx, _)| pair.set.contains(idx))
        .map(|(_, c)| c.norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(ResidualReport {
        level: pair.level,
        coeff_l1,
        coeff_l2,
        interior_l2,
        support: coefficients.keys().copied().collect(),
        coefficients,
    })
}

/// Axis-aligned sampling rectangle with `nx × ny` points, endpoints included
/// when the count along an axis exceeds one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min: Vec2,
    pub max: Vec2,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn square(half_width: f64, n: usize) -> Self {
        Self {
            min: [-half_width, -half_width],
            max: [half_width, half_width],
            nx: n,
            ny: n,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn coord(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
        if n <= 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    }

    /// Point `(i, j)` with `i` along `x₁`; rows run along `x₁`.
    pub fn point(&self, i: usize, j: usize) -> Vec2 {
        [
            Self::coord(self.min[0], self.max[0], self.nx, i),
            Self::coord(self.min[1], self.max[1], self.ny, j),
        ]
    }
}

/// Row-major samples of `Ψₙ` on `grid`.
pub fn grid_render(
    pair: &SpectralPair,
    freq: &Frequency,
    convention: Convention,
    grid: &Grid,
    cap: usize,
) -> Result<Vec<WaveSample>> {
    check_pair(pair)?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    if grid.len() > cap {
        return Err(Error::GridCap {
            points: grid.len(),
            cap,
        });
    }
    if !(grid.min.iter().chain(&grid.max).all(|v| v.is_finite())) {
        return Err(Error::InvalidArgument("non-finite grid bounds".into()));
    }
    Ok((0..grid.ny)
        .into_par_iter()
        .flat_map_iter(|j| {
            (0..grid.nx).map(move |i| {
                let x = grid.point(i, j);
                WaveSample {
                    x,
                    value: eigenfunction(pair, freq, convention, x),
                }
            })
        })
        .collect())
}

/// `max | |Ψ| − 1 |` over rendered samples.
pub fn max_modulus_deviation(samples: &[WaveSample]) -> f64 {
    samples.iter().map(|s| (s.value.norm() - 1.0).abs()).fold(0.0, f64::max)
}

/// `x1,x2,re,im`, or `x1,x2,abs` when `magnitude` is set.
pub fn field_csv(samples: &[WaveSample], magnitude: bool) -> String {
    let mut out = String::from(if magnitude { "x1,x2,abs\n" } else { "x1,x2,re,im\n" });
    for s in samples {
        if magnitude {
            out.push_str(&format!("{},{},{}\n", s.x[0], s.x[1], s.value.norm()));
        } else {
            out.push_str(&format!("{},{},{},{}\n", s.x[0], s.x[1], s.value.re, s.value.im));
        }
    }
    out
}
