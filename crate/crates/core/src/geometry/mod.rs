//! Point sets, axis-aligned boxes, balanced `2^d`-trees, admissibility
//! conditions and the block partitions they induce.

mod admissibility;
mod partition;
mod tree;

pub use admissibility::{
    adm_hybrid, adm_standard, adm_weak, sparsity_bounds, AdmissibilityConfig, AdmissibilityMode,
    SparsityBounds,
};
pub use partition::{BlockIndex, BlockKind, BlockPartition};
pub use tree::{depth_for_capacity, Cluster, ClusterTree, TreeDepth};

use crate::error::{invalid, Error, Result};

/// Closed axis-aligned box `[lo_0, hi_0] x ... x [lo_{d-1}, hi_{d-1}]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl HyperBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return invalid("box corners must have the same nonzero dimension");
        }
        if lo.iter().chain(&hi).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return invalid("box has lo > hi along some axis");
        }
        Ok(HyperBox { lo, hi })
    }

    /// `[-1, 1]^dim`.
    pub fn unit_cube(dim: usize) -> Self {
        HyperBox { lo: vec![-1.0; dim], hi: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Euclidean length of the main diagonal.
    pub fn diam(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
    }

    /// Euclidean distance between the closest points of the two boxes.
    pub fn dist(&self, other: &HyperBox) -> f64 {
        assert_eq!(self.dim(), other.dim(), "box dimension mismatch");
        (0..self.dim())
            .map(|k| {
                let gap = (other.lo[k] - self.hi[k]).max(self.lo[k] - other.hi[k]).max(0.0);
                gap * gap
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && (0..self.dim()).all(|k| self.lo[k] <= x[k] && x[k] <= self.hi[k])
    }

    pub(crate) fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.lo[k] + self.hi[k])
    }

    /// Child box for octant `o`: bit `k` of `o` selects the upper half along
    /// axis `k`.
    pub(crate) fn child(&self, o: usize) -> HyperBox {
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        for k in 0..self.dim() {
            let mid = self.midpoint(k);
            if o >> k & 1 == 1 {
                lo[k] = mid;
            } else {
                hi[k] = mid;
            }
        }
        HyperBox { lo, hi }
    }
}

/// `N` points in `R^d`, stored row by row, together with the box the cluster
/// tree subdivides.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    bounding_box: HyperBox,
}

impl PointSet {
    /// Uses the smallest cube that contains all points and shares their
    /// bounding-box center. A degenerate point set gets a cube of side 2.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        Self::check(dim, &coords)?;
        let n = coords.len() / dim;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for i in 0..n {
            for k in 0..dim {
                lo[k] = lo[k].min(coords[i * dim + k]);
                hi[k] = hi[k].max(coords[i * dim + k]);
            }
        }
        let mut half = (0..dim).map(|k| 0.5 * (hi[k] - lo[k])).fold(0.0, f64::max);
        if half == 0.0 {
            half = 1.0;
        }
        let center: Vec<f64> = (0..dim).map(|k| 0.5 * (lo[k] + hi[k])).collect();
        // Rounding in center +- half must not cut off an extreme point.
        let bbox = HyperBox {
            lo: (0..dim).map(|k| (center[k] - half).min(lo[k])).collect(),
            hi: (0..dim).map(|k| (center[k] + half).max(hi[k])).collect(),
        };
        Ok(PointSet { dim, coords, bounding_box: bbox })
    }

    /// Uses the given box, which must contain every point.
    pub fn with_bounding_box(dim: usize, coords: Vec<f64>, bbox: HyperBox) -> Result<Self> {
        Self::check(dim, &coords)?;
        if bbox.dim() != dim {
            return invalid("bounding box dimension does not match the points");
        }
        let ps = PointSet { dim, coords, bounding_box: bbox };
        if let Some(i) = (0..ps.len()).find(|&i| !ps.bounding_box.contains(ps.point(i))) {
            return invalid(format!("point {i} lies outside the bounding box"));
        }
        Ok(ps)
    }

    fn check(dim: usize, coords: &[f64]) -> Result<()> {
        if dim == 0 {
            return invalid("dimension must be at least 1");
        }
        if coords.is_empty() {
            return invalid("point set is empty");
        }
        if coords.len() % dim != 0 {
            return invalid(format!("{} coordinates do not form {dim}-dimensional points", coords.len()));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn bounding_box(&self) -> &HyperBox {
        &self.bounding_box
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_metrics() {
        let a = HyperBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let b = HyperBox::new(vec![2.0, 3.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(a.diam(), 2f64.sqrt());
        assert_eq!(a.dist(&b), 5f64.sqrt());
        assert_eq!(b.dist(&a), a.dist(&b));
        let c = HyperBox::new(vec![1.0, 0.5], vec![2.0, 0.7]).unwrap();
        assert_eq!(a.dist(&c), 0.0);
        assert_eq!(a.child(0b01).lo(), &[0.5, 0.0]);
        assert_eq!(a.child(0b10).hi(), &[0.5, 1.0]);
        assert!(HyperBox::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn tight_cube_contains_points() {
        let ps = PointSet::new(2, vec![0.0, 0.0, 4.0, 1.0, 2.0, -1.0]).unwrap();
        let b = ps.bounding_box();
        assert_eq!(b.lo(), &[0.0, -2.0]);
        assert_eq!(b.hi(), &[4.0, 2.0]);
        let same = PointSet::new(1, vec![3.0, 3.0]).unwrap();
        assert_eq!(same.bounding_box().diam(), 2.0);
        assert!(PointSet::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(PointSet::new(1, vec![f64::NAN]).is_err());
    }
}
