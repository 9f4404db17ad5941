mod common;

use std::sync::Arc;

use common::oracles::{box_indices, naive_assemble, naive_assemble_shifted};
use common::{c, cosine};
use quasispec::hamiltonian::assemble_shifted;
use quasispec::lattice::dual_vector;
use quasispec::{assemble, Frequency, LatticeIndex, MomentumPoint, PotentialSpec, TruncationSet};

fn boxed(rp: i64, rm: i64) -> Arc<TruncationSet> {
    Arc::new(TruncationSet::from_box(1, rp, rm))
}

#[test]
fn free_diagonal_example() {
    let spec = cosine(0.0, 2);
    let set = boxed(1, 1);
    let h = assemble(&spec, MomentumPoint::new(0.5, 0.0).unwrap(), &set).unwrap();
    let i = set.position(&LatticeIndex::new([1, 0], [0, 0])).unwrap();
    assert_eq!(h.entry(i, i).re, 5.0625);
    for r in 0..h.dim() {
        for col in 0..h.dim() {
            if r != col {
                assert_eq!(h.entry(r, col), c(0.0, 0.0));
            }
        }
    }
    let h0 = assemble(&spec, MomentumPoint::new(0.0, 0.0).unwrap(), &set).unwrap();
    let z = set.zero_position();
    assert_eq!(h0.entry(z, z), c(0.0, 0.0));
}

#[test]
fn coupling_entry_example() {
    let g = 0.07;
    let spec = cosine(g, 2);
    let set = boxed(1, 1);
    let h = assemble(&spec, MomentumPoint::new(0.3, 1.1).unwrap(), &set).unwrap();
    let r = set.zero_position();
    let col = set.position(&LatticeIndex::new([-1, 0], [0, 0])).unwrap();
    assert_eq!(h.entry(r, col), spec.coefficient([1, 0], [0, 0]) * g);
}

fn configs() -> Vec<(PotentialSpec, [f64; 2], (i64, i64))> {
    let two = |freq: Frequency, order: u32, g: f64| {
        PotentialSpec::new(freq, order, 2)
            .with_coupling(g)
            .with_real_pair([1, 0], [0, 0], c(0.5, 0.0))
            .with_real_pair([0, 1], [1, 0], c(0.5, 0.0))
    };
    vec![
        (cosine(0.05, 2), [1.37, 0.22], (1, 1)),
        (two(Frequency::sqrt2(), 2, 0.05), [3.1, -2.4], (2, 2)),
        (two(Frequency::golden(), 3, 0.2), [-0.7, 5.5], (2, 1)),
        (
            PotentialSpec::new(Frequency::sqrt2(), 2, 2)
                .with_coupling(1.0)
                .with_real_pair([1, 1], [0, 0], c(0.3, -0.2))
                .with_real_pair([0, 0], [0, 1], c(0.0, 0.6)),
            [0.0, 0.0],
            (1, 2),
        ),
        (cosine(0.0, 2), [2.0, 2.0], (2, 2)),
    ]
}

#[test]
fn assembly_matches_naive_builder() {
    for (spec, k, (rp, rm)) in configs() {
        let set = boxed(rp, rm);
        let h = assemble(&spec, MomentumPoint::new(k[0], k[1]).unwrap(), &set).unwrap();
        let naive = naive_assemble(&spec, k, set.indices());
        for (r, row) in naive.iter().enumerate() {
            for (col, v) in row.iter().enumerate() {
                assert_eq!(h.entry(r, col), *v, "({r},{col}) box ({rp},{rm})");
            }
        }
        assert!(h.is_hermitian());
    }
}

#[test]
fn zero_shift_is_plain_assembly() {
    let spec = cosine(0.05, 2);
    let set = boxed(1, 1);
    let k = MomentumPoint::new(1.2, -0.3).unwrap();
    let a = assemble(&spec, k, &set).unwrap();
    let b = assemble_shifted(&spec, k, LatticeIndex::ZERO, &set).unwrap();
    assert_eq!(a.entries(), b.entries());
}

#[test]
fn shifted_blocks_match_naive_builder() {
    let (spec, k, _) = configs().swap_remove(1);
    let set = boxed(1, 1);
    for j in [LatticeIndex::new([2, -1], [1, 2]), LatticeIndex::new([-2, 0], [0, -2])] {
        let h = assemble_shifted(&spec, MomentumPoint::new(k[0], k[1]).unwrap(), j, &set).unwrap();
        let naive = naive_assemble_shifted(&spec, k, j, set.indices());
        for (r, row) in naive.iter().enumerate() {
            for (col, v) in row.iter().enumerate() {
                assert_eq!(h.entry(r, col), *v);
            }
        }
    }
}

#[test]
fn translation_covariance() {
    let (spec, k, _) = configs().swap_remove(1);
    let kp = MomentumPoint::new(k[0], k[1]).unwrap();
    let small = boxed(1, 1);
    let big = boxed(3, 3);
    let full = assemble(&spec, kp, &big).unwrap();
    for j in box_indices(2, 2) {
        let block = assemble_shifted(&spec, kp, j, &small).unwrap();
        for (r, a) in small.indices().iter().enumerate() {
            for (col, b) in small.indices().iter().enumerate() {
                let rr = big.position(&(*a + j)).unwrap();
                let cc = big.position(&(*b + j)).unwrap();
                assert_eq!(block.entry(r, col), full.entry(rr, cc), "shift {j}");
            }
        }
    }
}

#[test]
fn free_shifted_spectrum() {
    let spec = cosine(0.0, 2);
    let set = boxed(1, 1);
    let k = MomentumPoint::new(0.9, 0.4).unwrap();
    let j = LatticeIndex::new([1, 1], [-1, 0]);
    let h = assemble_shifted(&spec, k, j, &set).unwrap();
    for (i, idx) in set.indices().iter().enumerate() {
        let b = dual_vector(*idx + j, &spec.freq);
        let x = k.k[0] + b[0];
        let y = k.k[1] + b[1];
        assert_eq!(h.diag()[i], (x * x + y * y).powi(2));
    }
}

#[test]
fn row_sparsity_bounded_by_coefficients() {
    for (spec, k, (rp, rm)) in configs() {
        let set = boxed(rp.min(1), rm.min(1));
        let h = assemble(&spec, MomentumPoint::new(k[0], k[1]).unwrap(), &set).unwrap();
        let terms = spec.scaled_terms().len();
        for r in 0..h.dim() {
            let nnz = (0..h.dim()).filter(|&col| col != r && h.entry(r, col) != c(0.0, 0.0)).count();
            assert!(nnz <= terms);
        }
    }
}

#[test]
fn caps_and_hermiticity_guard() {
    let spec = cosine(0.05, 2);
    let set = boxed(3, 3);
    let k = MomentumPoint::new(1.0, 1.0).unwrap();
    let opts = quasispec::hamiltonian::AssemblyOptions { max_dim: 100, ..Default::default() };
    assert!(quasispec::hamiltonian::assemble_with(&spec, k, LatticeIndex::ZERO, &set, &opts).is_err());
    let lopsided = PotentialSpec::new(Frequency::sqrt2(), 2, 2)
        .with_real_pair([1, 0], [0, 0], c(1.0, 0.0))
        .with_coefficient([1, 0], [0, 0], c(0.0, 1.0));
    assert!(assemble(&lopsided, k, &boxed(1, 1)).is_err());
}
