//! Truncated SVD with a relative Frobenius tolerance, and the block-wise
//! accumulation of the global Frobenius norm.

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};

/// `A ~ U diag(s) V^T` with orthonormal columns in `u` (`m x p`) and `v`
/// (`n x p`) and non-increasing positive `s`. `tail_energy` is the sum of
/// the squared singular values that were dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankFactors {
    pub u: Array2<f64>,
    pub s: Vec<f64>,
    pub v: Array2<f64>,
    pub tail_energy: f64,
}

impl LowRankFactors {
    pub fn zero(m: usize, n: usize) -> Self {
        LowRankFactors { u: Array2::zeros((m, 0)), s: Vec::new(), v: Array2::zeros((n, 0)), tail_energy: 0.0 }
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    /// `||U diag(s) V^T||_F`.
    pub fn frob_norm(&self) -> f64 {
        self.retained_energy().sqrt()
    }

    pub fn retained_energy(&self) -> f64 {
        self.s.iter().map(|x| x * x).sum()
    }

    /// Squared Frobenius norm of the block the factors were computed from.
    pub fn source_energy(&self) -> f64 {
        self.retained_energy() + self.tail_energy
    }

    /// Factors of `A^T`.
    pub fn transposed(&self) -> Self {
        LowRankFactors { u: self.v.clone(), s: self.s.clone(), v: self.u.clone(), tail_energy: self.tail_energy }
    }

    /// Drops trailing terms so that the discarded part of the original block
    /// stays below `eps` times its Frobenius norm. Matches a direct
    /// truncation at `eps` as long as `eps` is not below the tolerance these
    /// factors were built with.
    pub fn truncate(&self, eps: f64) -> Self {
        let p = truncation_rank(&self.s, self.tail_energy, eps);
        let dropped: f64 = self.s[p..].iter().map(|x| x * x).sum();
        LowRankFactors {
            u: self.u.slice(s![.., ..p]).to_owned(),
            s: self.s[..p].to_vec(),
            v: self.v.slice(s![.., ..p]).to_owned(),
            tail_energy: self.tail_energy + dropped,
        }
    }

    /// `U diag(s) V^T` as a dense matrix.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut us = self.u.clone();
        for (mut col, &sk) in us.columns_mut().into_iter().zip(&self.s) {
            col *= sk;
        }
        us.dot(&self.v.t())
    }
}

/// Smallest `p` with `sum_{k >= p} s_k^2 + extra <= eps^2 (sum s_k^2 + extra)`.
fn truncation_rank(s: &[f64], extra: f64, eps: f64) -> usize {
    let total: f64 = s.iter().map(|x| x * x).sum::<f64>() + extra;
    let budget = eps * eps * total;
    let mut tail = extra;
    let mut p = s.len();
    while p > 0 {
        let t = tail + s[p - 1] * s[p - 1];
        if t > budget {
            break;
        }
        tail = t;
        p -= 1;
    }
    p
}

/// Truncated SVD of `a` keeping the fewest terms whose omission costs at most
/// `eps ||a||_F` in the Frobenius norm. Empty and zero blocks give rank 0.
pub fn truncated_svd(a: ArrayView2<f64>, eps: f64) -> Result<LowRankFactors> {
    let (m, n) = a.dim();
    if !(eps >= 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be non-negative, got {eps}")));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if m == 0 || n == 0 || a.iter().all(|&x| x == 0.0) {
        return Ok(LowRankFactors::zero(m, n));
    }
    let a = a.as_standard_layout();
    let mat = faer::MatRef::from_row_major_slice(a.as_slice().expect("standard layout"), m, n);
    let svd = mat.thin_svd().map_err(|e| Error::Svd(format!("{e:?}")))?;
    let sv: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let p = truncation_rank(&sv, 0.0, eps);
    // Exact zeros carry no information; drop them even when eps = 0.
    let p = sv[..p].iter().rposition(|&x| x > 0.0).map_or(0, |k| k + 1);
    let tail_energy = sv[p..].iter().map(|x| x * x).sum();
    let (fu, fv) = (svd.U(), svd.V());
    Ok(LowRankFactors {
        u: Array2::from_shape_fn((m, p), |(i, k)| fu[(i, k)]),
        s: sv[..p].to_vec(),
        v: Array2::from_shape_fn((n, p), |(j, k)| fv[(j, k)]),
        tail_energy,
    })
}

/// Accumulates `||H~||_F^2` block by block: singular values for compressed
/// blocks, entries for dense ones.
#[derive(Clone, Copy, Debug, Default)]
pub struct FrobeniusAccumulator {
    sum_sq: f64,
}

impl FrobeniusAccumulator {
    pub fn add_low_rank(&mut self, f: &LowRankFactors) {
        self.sum_sq += f.retained_energy();
    }

    pub fn add_dense(&mut self, a: ArrayView2<f64>) {
        self.sum_sq += a.iter().map(|x| x * x).sum::<f64>();
    }

    pub fn add_energy(&mut self, e: f64) {
        self.sum_sq += e;
    }

    pub fn norm(&self) -> f64 {
        self.sum_sq.sqrt()
    }
}

/// `sqrt(sum of squared block norms)`.
pub fn accumulate_global_norm(squared_block_norms: impl IntoIterator<Item = f64>) -> f64 {
    squared_block_norms.into_iter().sum::<f64>().sqrt()
}
