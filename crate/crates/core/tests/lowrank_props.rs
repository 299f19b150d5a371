mod common;

use common::{frob, jacobi_svd};
use hhmat::lowrank::{accumulate_global_norm, truncated_svd, FrobeniusAccumulator, LowRankFactors};
use ndarray::{s, Array2};
use proptest::prelude::*;

/// Random block with a decaying spectrum so that every tolerance gives a
/// non-trivial rank.
fn decaying_matrix(m: usize, n: usize, decay: f64, seed: u64) -> Array2<f64> {
    let mut state = seed | 1;
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let k = m.min(n);
    let x = Array2::from_shape_fn((m, k), |_| next());
    let y = Array2::from_shape_fn((k, n), |_| next());
    let mut xs = x;
    for j in 0..k {
        let scale = decay.powi(j as i32);
        xs.column_mut(j).mapv_inplace(|v| v * scale);
    }
    xs.dot(&y)
}

fn residual(a: &Array2<f64>, f: &LowRankFactors, p: usize) -> f64 {
    let mut us = f.u.slice(s![.., ..p]).to_owned();
    for k in 0..p {
        us.column_mut(k).mapv_inplace(|v| v * f.s[k]);
    }
    frob((a - &us.dot(&f.v.slice(s![.., ..p]).t())).view())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn tolerance_and_minimality(
        m in 1usize..40,
        n in 1usize..40,
        decay in 0.05f64..0.95,
        seed in any::<u64>(),
        k in 0usize..12,
    ) {
        let eps = 10f64.powi(-(k as i32)).max(1e-12).min(1e-1);
        let a = decaying_matrix(m, n, decay, seed);
        let norm = frob(a.view());
        let f = truncated_svd(a.view(), eps).unwrap();
        let p = f.rank();
        prop_assert!(p <= m.min(n));
        prop_assert!(f.s.windows(2).all(|w| w[0] >= w[1]) && f.s.iter().all(|&x| x > 0.0));
        // Orthonormality to working precision.
        let u = 1.11e-16;
        let gu = f.u.t().dot(&f.u) - Array2::<f64>::eye(p);
        let gv = f.v.t().dot(&f.v) - Array2::<f64>::eye(p);
        prop_assert!(frob(gu.view()) <= 100.0 * p.max(1) as f64 * u * 10.0);
        prop_assert!(frob(gv.view()) <= 100.0 * p.max(1) as f64 * u * 10.0);
        // Tolerance with a small allowance for the SVD's own backward error.
        let slack = 1e-14 * norm * (m.max(n) as f64);
        prop_assert!(residual(&a, &f, p) <= eps * norm + slack);
        if p >= 1 {
            prop_assert!(residual(&a, &f, p - 1) > eps * norm - slack);
        }
    }
}

#[test]
fn singular_values_match_jacobi_oracle() {
    for seed in 0..5 {
        let a = decaying_matrix(64, 64, 0.9, seed + 11);
        let (_, s_ref, _) = jacobi_svd(a.view());
        let f = truncated_svd(a.view(), 0.0).unwrap();
        let s0 = s_ref[0];
        for (k, &s) in f.s.iter().enumerate() {
            assert!((s - s_ref[k]).abs() <= 1e-10 * s0, "seed {seed} k {k}: {s:e} vs {:e}", s_ref[k]);
        }
    }
    // Rectangular, both orientations.
    let a = decaying_matrix(30, 50, 0.7, 3);
    let (u, s_ref, v) = jacobi_svd(a.view());
    let mut us = u.clone();
    for k in 0..s_ref.len() {
        us.column_mut(k).mapv_inplace(|x| x * s_ref[k]);
    }
    assert!(frob((&us.dot(&v.t()) - &a).view()) < 1e-12 * frob(a.view()));
    let f = truncated_svd(a.t(), 0.0).unwrap();
    for (k, &s) in f.s.iter().enumerate() {
        assert!((s - s_ref[k]).abs() <= 1e-10 * s_ref[0]);
    }
}

#[test]
fn frobenius_accumulation_matches_dense() {
    let mut acc = FrobeniusAccumulator::default();
    let mut dense_sq = 0.0;
    let mut parts = Vec::new();
    for seed in 0..40u64 {
        let a = decaying_matrix(10 + seed as usize % 17, 5 + seed as usize % 23, 0.6, seed);
        let f = truncated_svd(a.view(), 1e-8).unwrap();
        let d = f.to_dense();
        let block_sq = frob(d.view()).powi(2);
        assert!((f.retained_energy() - block_sq).abs() <= 1e-10 * block_sq);
        dense_sq += block_sq;
        acc.add_low_rank(&f);
        parts.push(f.retained_energy());
        if seed % 5 == 0 {
            acc.add_dense(a.view());
            dense_sq += frob(a.view()).powi(2);
            parts.push(frob(a.view()).powi(2));
        }
    }
    let rel = (acc.norm() - dense_sq.sqrt()).abs() / dense_sq.sqrt();
    assert!(rel <= 1e-12, "{rel:e}");
    assert_eq!(accumulate_global_norm(parts), acc.norm());
    let f = LowRankFactors { s: vec![3.0, 4.0], ..LowRankFactors::zero(0, 0) };
    assert_eq!(f.retained_energy(), 25.0);
    assert_eq!(LowRankFactors::zero(3, 3).retained_energy(), 0.0);
}
