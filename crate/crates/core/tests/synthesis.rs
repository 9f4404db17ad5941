mod common;

use std::sync::Arc;

use common::cosine;
use num_complex::Complex64;
use quasispec::lattice::dual_vector;
use quasispec::synthesis::{field_csv, max_modulus_deviation, DEFAULT_GRID_CAP};
use quasispec::{
    eigenfunction, grid_render, residual_coefficients, run_multiscale, Convention, GrowthSchedule, Grid,
    LatticeIndex, MomentumPoint, MultiscaleOutcome, SelectionParams, SpectralPair, TruncationSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn level_two_pair() -> (quasispec::PotentialSpec, SpectralPair) {
    let spec = cosine(0.05, 2)
        .with_real_pair([0, 1], [1, 0], Complex64::new(0.5, 0.0));
    let k = MomentumPoint::new(3.3, -1.7).unwrap();
    let MultiscaleOutcome::Converged(r) =
        run_multiscale(&spec, k, 2, &GrowthSchedule::geometric(1, 1, 2), &SelectionParams::default()).unwrap()
    else {
        panic!("resonant");
    };
    (spec, r.pairs[1].clone())
}

#[test]
fn origin_value_is_the_coefficient_sum() {
    let (spec, pair) = level_two_pair();
    let sum: Complex64 = pair.coeffs.iter().sum();
    let v = eigenfunction(&pair, &spec.freq, Convention::Absorbed, [0.0, 0.0]);
    assert!((v - sum).norm() < 1e-15);
    let one = grid_render(&pair, &spec.freq, Convention::Absorbed, &Grid::square(0.0, 1), DEFAULT_GRID_CAP).unwrap();
    assert_eq!(one[0].value, v);
}

#[test]
fn integer_translation_rotates_coefficients() {
    let (spec, pair) = level_two_pair();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let u = [rng.gen_range(-4i64..=4) as f64, rng.gen_range(-4i64..=4) as f64];
        let mut rotated = pair.clone();
        for (idx, c) in rotated.set.indices().iter().zip(rotated.coeffs.iter_mut()) {
            let b = dual_vector(*idx, &spec.freq);
            let t = (pair.k.k[0] + b[0]) * u[0] + (pair.k.k[1] + b[1]) * u[1];
            *c *= Complex64::from_polar(1.0, t);
        }
        let lhs = eigenfunction(&pair, &spec.freq, Convention::Absorbed, [x[0] + u[0], x[1] + u[1]]);
        let rhs = eigenfunction(&rotated, &spec.freq, Convention::Absorbed, x);
        assert!((lhs - rhs).norm() <= 1e-10);
    }
}

#[test]
fn modulus_bound_at_random_points() {
    let (spec, pair) = level_two_pair();
    let bound = pair.l1_distance_from_plane_wave();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let x = [rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)];
        for conv in [Convention::Absorbed, Convention::Literal] {
            let v = eigenfunction(&pair, &spec.freq, conv, x);
            assert!((v.norm() - 1.0).abs() <= bound);
        }
    }
}

#[test]
fn plane_wave_residual_is_the_coupled_potential() {
    let spec = cosine(0.05, 2).with_real_pair([0, 1], [1, 0], Complex64::new(0.25, 0.5));
    let pair = SpectralPair::unperturbed(&spec, MomentumPoint::new(2.0, 0.5).unwrap(), Arc::new(TruncationSet::from_box(1, 1, 1)));
    let r = residual_coefficients(&spec, &pair).unwrap();
    assert_eq!(r.coefficients.len(), spec.coeffs.len());
    for (key, v) in &spec.coeffs {
        assert_eq!(r.coefficients[key], *v * 0.05);
    }
    assert!((r.coeff_l1 - 0.05 * spec.l1_norm()).abs() < 1e-15);
    assert!(!r.coefficients.contains_key(&LatticeIndex::ZERO));
}

#[test]
fn chain_residuals_live_on_the_boundary_layer() {
    let spec = cosine(0.05, 2);
    let k = MomentumPoint::new(4.1, 1.3).unwrap();
    let sched = GrowthSchedule::explicit(vec![[1, 1], [2, 2], [3, 3]]);
    let MultiscaleOutcome::Converged(report) = run_multiscale(&spec, k, 3, &sched, &SelectionParams::default()).unwrap() else {
        panic!("resonant");
    };
    let reports: Vec<_> = report.pairs.iter().map(|p| residual_coefficients(&spec, p).unwrap()).collect();
    assert!(reports.windows(2).all(|w| w[1].coeff_l1 < w[0].coeff_l1));
    for (r, p) in reports.iter().zip(&report.pairs) {
        assert!(r.interior_l2 <= 1e-9 * (1.0 + p.lambda));
        let outside = r.coefficients.iter().filter(|(i, _)| !p.set.contains(i)).count();
        assert!(outside > 0);
    }
}

#[test]
fn rendering_is_row_major_and_deterministic() {
    let (spec, pair) = level_two_pair();
    let grid = Grid { min: [-1.0, 0.0], max: [1.0, 2.0], nx: 3, ny: 2 };
    let a = grid_render(&pair, &spec.freq, Convention::Literal, &grid, DEFAULT_GRID_CAP).unwrap();
    assert_eq!(a.len(), 6);
    assert_eq!(a[1].x, [0.0, 0.0]);
    assert_eq!(a[3].x, [-1.0, 2.0]);
    let b = grid_render(&pair, &spec.freq, Convention::Literal, &grid, DEFAULT_GRID_CAP).unwrap();
    assert_eq!(field_csv(&a, false), field_csv(&b, false));
    assert!(max_modulus_deviation(&a) <= pair.l1_distance_from_plane_wave());
    assert!(grid_render(&pair, &spec.freq, Convention::Literal, &grid, 5).is_err());
}
