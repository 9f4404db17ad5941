//! Momentum-space multiscale toolkit for `H = (−Δ)ˡ + V` on `R²` with a
//! two-frequency quasi-periodic potential `V`.

pub mod arcs;
pub mod config;
pub mod error;
pub mod hamiltonian;
pub mod isoenergetic;
pub mod lattice;
pub mod potential;
pub mod resonance;
pub mod spectral;
pub mod synthesis;

pub use arcs::{hole_statistics, AngleSet, HoleStats, Interval};
pub use config::{ExperimentConfig, RunManifest};
pub use error::{Error, Result};
pub use hamiltonian::{assemble, HamiltonianMatrix, MomentumPoint};
pub use isoenergetic::{radial_solve, swiss_cheese, trace_curve, IsoCurve, RadialOutcome, RadialParams};
pub use lattice::{build_truncation, Frequency, GrowthSchedule, LatticeIndex, TruncationSet};
pub use potential::PotentialSpec;
pub use resonance::{carve_cheese, is_resonant, nonresonant_fraction, Thresholds};
pub use spectral::{branch_pair, run_multiscale, MultiscaleOutcome, SelectionParams, SpectralPair};
pub use synthesis::{eigenfunction, grid_render, residual_coefficients, Convention, Grid};
