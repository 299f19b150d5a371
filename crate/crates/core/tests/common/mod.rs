#![allow(dead_code)]

use std::collections::BTreeSet;

use hhmat::geometry::{adm_standard, BlockPartition, ClusterTree};
use hhmat::precision::FpFormat;
use ndarray::{Array1, Array2, ArrayView2};

/// Rounds by shifting the binary64 significand as an integer, independent of
/// the float-division path used by the library.
pub fn round_oracle(x: f64, f: &FpFormat) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let bits = x.to_bits();
    let neg = bits >> 63 == 1;
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (sig, e_sig) = if biased == 0 { (frac, -1074i64) } else { (frac | (1u64 << 52), biased - 1075) };
    // x = sig * 2^e_sig, top bit of sig at position 63 - lz.
    let top = 63 - sig.leading_zeros() as i64;
    let e = e_sig + top;
    let q = e.max(f.e_min as i64) - f.mantissa_bits as i64;
    let shift = q - e_sig;
    let kept: u64 = if shift <= 0 {
        return finish(x, f);
    } else if shift >= 64 {
        0
    } else {
        let k = sig >> shift;
        let rem = sig & ((1u64 << shift) - 1);
        let half = 1u64 << (shift - 1);
        if rem > half || (rem == half && k & 1 == 1) {
            k + 1
        } else {
            k
        }
    };
    let mag = kept as f64 * 2f64.powi(q as i32);
    finish(if neg { -mag } else { mag }, f)
}

fn finish(r: f64, f: &FpFormat) -> f64 {
    if r.abs() > f.x_max {
        f64::INFINITY.copysign(r)
    } else if !f.subnormals && r.abs() < f.x_min {
        0.0f64.copysign(r)
    } else {
        r
    }
}

/// One-sided Jacobi SVD: singular values in non-increasing order, with
/// `U` (`m x k`) and `V` (`n x k`), `k = min(m, n)`.
pub fn jacobi_svd(a: ArrayView2<f64>) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
    let (m, n) = a.dim();
    if m < n {
        let (u, s, v) = jacobi_svd(a.t());
        return (v, s, u);
    }
    let mut w = a.to_owned();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    alpha += w[[i, p]] * w[[i, p]];
                    beta += w[[i, q]] * w[[i, q]];
                    gamma += w[[i, p]] * w[[i, q]];
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (w[[i, p]], w[[i, q]]);
                    w[[i, p]] = c * x - s * y;
                    w[[i, q]] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[[i, p]], v[[i, q]]);
                    v[[i, p]] = c * x - s * y;
                    v[[i, q]] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|k| w.column(k).iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let mut u = Array2::zeros((m, n));
    let mut vs = Array2::zeros((n, n));
    let mut s = Array1::zeros(n);
    for (k, &j) in order.iter().enumerate() {
        s[k] = norms[j];
        for i in 0..m {
            u[[i, k]] = if norms[j] > 0.0 { w[[i, j]] / norms[j] } else { 0.0 };
        }
        for i in 0..n {
            vs[[i, k]] = v[[i, j]];
        }
    }
    (u, s, vs)
}

pub fn frob(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub type Set = BTreeSet<(usize, usize, usize, bool)>;

pub fn as_set(p: &BlockPartition) -> Set {
    p.iter().map(|(k, b)| (b.level, b.row, b.col, k.is_low_rank())).collect()
}

/// Standard partition by brute force: a block at level l is far field when
/// it is admissible and no ancestor pair was.
pub fn standard_oracle(t: &ClusterTree, eta: f64) -> Set {
    let d = t.dim();
    let ancestor = |i: usize, up: usize| i >> (d * up);
    let mut out = Set::new();
    for l in 1..=t.depth() {
        let cl = t.level(l);
        for i in 0..cl.len() {
            for j in 0..cl.len() {
                let earlier = (1..l).any(|k| {
                    let c = t.level(k);
                    adm_standard(&c[ancestor(i, l - k)], &c[ancestor(j, l - k)], eta)
                });
                if earlier {
                    continue;
                }
                if adm_standard(&cl[i], &cl[j], eta) {
                    out.insert((l, i, j, true));
                } else if l == t.depth() {
                    out.insert((l, i, j, false));
                }
            }
        }
    }
    if t.depth() == 0 {
        out.insert((0, 0, 0, false));
    }
    out
}

/// Weak partition: distinct siblings at every level plus the leaf diagonal.
pub fn weak_oracle(t: &ClusterTree) -> Set {
    let d = t.dim();
    let mut out = Set::new();
    for l in 1..=t.depth() {
        let n = t.level(l).len();
        for i in 0..n {
            for j in 0..n {
                if i != j && i >> d == j >> d {
                    out.insert((l, i, j, true));
                }
            }
        }
    }
    for i in 0..t.leaves().len() {
        out.insert((t.depth(), i, i, false));
    }
    out
}

pub fn assert_exact_cover(t: &ClusterTree, p: &BlockPartition) {
    let n = t.n_points();
    let mut hits = vec![0u8; n * n];
    for (_, b) in p.iter() {
        for &i in &t.cluster(b.level, b.row).point_ids {
            for &j in &t.cluster(b.level, b.col).point_ids {
                hits[i * n + j] += 1;
            }
        }
    }
    assert!(hits.iter().all(|&h| h == 1));
}
