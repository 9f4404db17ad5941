mod common;

use common::oracles::{box_indices, exhaustive_min_shift, shift_vector};
use quasispec::lattice::{diophantine_report, dual_vector, min_shift_norm, FrequencyKind};
use quasispec::{build_truncation, Frequency, GrowthSchedule, LatticeIndex, TruncationSet};

#[test]
fn dual_vector_examples() {
    let a = Frequency::sqrt2();
    assert_eq!(dual_vector(LatticeIndex::ZERO, &a), [0.0, 0.0]);
    assert_eq!(dual_vector(LatticeIndex::new([1, 0], [0, 0]), &a), [1.0, 0.0]);
    let b = dual_vector(LatticeIndex::new([-1, 0], [1, 0]), &a);
    assert!((b[0] - (2f64.sqrt() - 1.0)).abs() < 1e-16);
    assert_eq!(b[1], 0.0);
}

#[test]
fn dual_vector_matches_oracle_exactly() {
    for freq in [Frequency::sqrt2(), Frequency::golden(), Frequency::quadratic(1, 2, 3, 5).unwrap()] {
        for idx in box_indices(3, 3) {
            assert_eq!(dual_vector(idx, &freq), shift_vector(&freq, idx), "{idx}");
        }
    }
}

#[test]
fn truncation_sizes() {
    let g = GrowthSchedule::geometric(1, 1, 2);
    assert_eq!(build_truncation(1, &g).unwrap().len(), 81);
    assert_eq!(build_truncation(2, &g).unwrap().len(), 625);
    assert_eq!(build_truncation(1, &GrowthSchedule::geometric(2, 1, 2)).unwrap().len(), 225);
    let capped = GrowthSchedule::geometric(1, 1, 2).with_max_dim(100);
    assert!(build_truncation(2, &capped).is_err());
}

#[test]
fn truncations_nest() {
    let g = GrowthSchedule::explicit(vec![[1, 1], [2, 2], [3, 3]]);
    for n in 1..3 {
        let a = build_truncation(n, &g).unwrap();
        let b = build_truncation(n + 1, &g).unwrap();
        assert!(a.indices().iter().all(|i| b.contains(i)));
    }
}

#[test]
fn canonical_order_is_lexicographic_in_m_then_p() {
    let set = TruncationSet::from_box(1, 1, 1);
    assert_eq!(set.indices(), box_indices(1, 1).as_slice());
    assert!(set.indices().windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn min_shift_examples() {
    let a = Frequency::sqrt2();
    let (v, idx) = min_shift_norm(&TruncationSet::from_box(1, 1, 1), &a).unwrap();
    assert!((v - (2f64.sqrt() - 1.0)).abs() < 1e-15);
    let b = dual_vector(idx, &a);
    assert_eq!(b[0].hypot(b[1]), v);
    let (v, _) = min_shift_norm(&TruncationSet::from_box(1, 3, 0), &a).unwrap();
    assert_eq!(v, 1.0);
}

#[test]
fn min_shift_matches_exhaustive_scan() {
    for freq in [Frequency::sqrt2(), Frequency::golden()] {
        for r in 1..=4i64 {
            for (rp, rm) in [(r, r), (r, 0), (1, r)] {
                let lib = min_shift_norm(&TruncationSet::from_box(1, rp, rm), &freq).unwrap();
                let oracle = exhaustive_min_shift(&freq, rp, rm).unwrap();
                assert_eq!(lib.0, oracle.0, "box ({rp},{rm})");
                assert_eq!(lib.1, oracle.1, "box ({rp},{rm})");
            }
        }
    }
}

#[test]
fn min_shift_respects_a_diophantine_floor() {
    // √2 is badly approximable: |p + √2 m| ≥ c/|m| with c > 0.
    let a = Frequency::sqrt2();
    for r in 1..=4 {
        let (v, idx) = exhaustive_min_shift(&a, r, r).unwrap();
        assert!(v * idx.m_sup() as f64 > 0.3, "{v} at {idx}");
    }
}

#[test]
fn diophantine_table() {
    let a = Frequency::sqrt2();
    let rows = diophantine_report(&a, 1);
    assert_eq!(rows.len(), 1);
    assert!((rows[0].min_norm - (2f64.sqrt() - 1.0)).abs() < 1e-15);
    assert!(diophantine_report(&a, 0).is_empty());
    let rows = diophantine_report(&a, 4);
    assert!(rows.windows(2).all(|w| w[1].min_norm <= w[0].min_norm));
}

#[test]
fn rational_frequencies_rejected() {
    assert!(Frequency::quadratic(1, 1, 4, 1).is_err());
    assert!(Frequency::quadratic(1, 0, 2, 1).is_err());
    assert!(Frequency::from_kind(FrequencyKind::Quadratic { a: 0, b: 1, d: 9, den: 1 }).is_err());
}
