use thiserror::Error;

use crate::lattice::LatticeIndex;
use crate::potential::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frequency: {0}")]
    InvalidFrequency(String),

    #[error("invalid growth schedule: {0}")]
    InvalidSchedule(String),

    #[error("matrix dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("resonance scan stopped at shift {stopped_at} (block level {block_level}): block dimension {dim} exceeds cap {cap}")]
    ScanCap {
        stopped_at: LatticeIndex,
        block_level: u32,
        dim: usize,
        cap: usize,
    },

    #[error("invalid potential: {}", display_violations(.0))]
    InvalidPotential(Vec<Violation>),

    #[error("potential is not Hermitian-symmetric; assembly needs the non-self-adjoint override")]
    NonHermitianPotential,

    #[error("matrix is not Hermitian")]
    NonHermitianMatrix,

    #[error("eigensolver failed: {0}")]
    Solver(String),

    #[error("eigenpair is near-degenerate (gap {gap:e} below floor {floor:e})")]
    NearDegenerate { gap: f64, floor: f64 },

    #[error("radial derivative {value:e} below positivity floor {floor:e}")]
    TangentialCrossing { value: f64, floor: f64 },

    #[error("dimension mismatch: {0}")]
    Mismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("render grid of {points} points exceeds cap {cap}")]
    GridCap { points: usize, cap: usize },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn display_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
