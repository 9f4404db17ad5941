#![allow(dead_code)]

pub mod oracles;

use num_complex::Complex64;
use quasispec::{ExperimentConfig, Frequency, PotentialSpec};

pub fn sample_config() -> ExperimentConfig {
    ExperimentConfig::from_json(include_str!("../../../../configs/sample.json")).expect("sample config")
}

pub fn free_config() -> ExperimentConfig {
    ExperimentConfig::from_json(include_str!("../../../../configs/free.json")).expect("free config")
}

/// `V = 2cos(2πx₁)`.
pub fn cosine(g: f64, order: u32) -> PotentialSpec {
    PotentialSpec::new(Frequency::sqrt2(), order, 2)
        .with_coupling(g)
        .with_real_pair([1, 0], [0, 0], Complex64::new(1.0, 0.0))
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
