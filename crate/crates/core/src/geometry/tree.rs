use super::{HyperBox, PointSet};
use crate::error::{invalid, Error, Result};

/// Largest number of clusters on a single level.
const MAX_LEVEL_CLUSTERS: u32 = 28;

/// How the depth of a [`ClusterTree`] is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TreeDepth {
    /// `L = ceil(log_{2^d}(N / n_max))`, clamped at zero.
    LeafCapacity(usize),
    Depth(usize),
}

/// Smallest `L >= 0` with `n_max * 2^(d L) >= n`.
pub fn depth_for_capacity(n: usize, n_max: usize, dim: usize) -> usize {
    assert!(n_max > 0 && dim > 0);
    let mut depth = 0;
    let mut cap = n_max as u128;
    while cap < n as u128 {
        cap <<= dim;
        depth += 1;
    }
    depth
}

/// A node of the tree. `index` is the Morton index within its level: the
/// children of cluster `i` are `(i << d) | o` for octants `o < 2^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub level: usize,
    pub index: usize,
    pub bbox: HyperBox,
    /// Indices into the point set, in increasing order.
    pub point_ids: Vec<usize>,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.point_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_ids.is_empty()
    }
}

/// Balanced `2^d`-tree: every level `l` holds all `2^(d l)` boxes of the
/// uniform subdivision of the root box, including empty ones.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterTree {
    dim: usize,
    depth: usize,
    leaf_capacity: Option<usize>,
    n_points: usize,
    levels: Vec<Vec<Cluster>>,
}

impl ClusterTree {
    /// Points lying on a splitting plane go to the lower child.
    pub fn build(points: &PointSet, depth: TreeDepth) -> Result<Self> {
        let dim = points.dim();
        let (depth, leaf_capacity) = match depth {
            TreeDepth::Depth(l) => (l, None),
            TreeDepth::LeafCapacity(0) => return invalid("leaf capacity must be positive"),
            TreeDepth::LeafCapacity(c) => (depth_for_capacity(points.len(), c, dim), Some(c)),
        };
        if dim.checked_mul(depth).map_or(true, |b| b > MAX_LEVEL_CLUSTERS as usize) {
            return Err(Error::DepthOverflow { dim, depth });
        }
        let root = Cluster {
            level: 0,
            index: 0,
            bbox: points.bounding_box().clone(),
            point_ids: (0..points.len()).collect(),
        };
        let mut levels = vec![vec![root]];
        for level in 1..=depth {
            let parents = &levels[level - 1];
            let mut next = Vec::with_capacity(parents.len() << dim);
            for parent in parents {
                let mids: Vec<f64> = (0..dim).map(|k| parent.bbox.midpoint(k)).collect();
                let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); 1 << dim];
                for &p in &parent.point_ids {
                    let x = points.point(p);
                    let o = (0..dim).fold(0, |o, k| o | (usize::from(x[k] > mids[k]) << k));
                    buckets[o].push(p);
                }
                for (o, ids) in buckets.into_iter().enumerate() {
                    next.push(Cluster {
                        level,
                        index: (parent.index << dim) | o,
                        bbox: parent.bbox.child(o),
                        point_ids: ids,
                    });
                }
            }
            levels.push(next);
        }
        Ok(ClusterTree { dim, depth, leaf_capacity, n_points: points.len(), levels })
    }

    /// Reassembles a tree from its stored levels, checking the structural
    /// invariants.
    pub(crate) fn from_levels(dim: usize, leaf_capacity: Option<usize>, levels: Vec<Vec<Cluster>>) -> Result<Self> {
        let depth = levels.len().checked_sub(1).ok_or_else(|| Error::Container("tree has no levels".into()))?;
        let n_points = levels[0].first().map_or(0, |c| c.len());
        for (l, lv) in levels.iter().enumerate() {
            if lv.len() != 1 << (dim * l) || lv.iter().enumerate().any(|(i, c)| c.index != i || c.level != l) {
                return Err(Error::Container(format!("level {l} is malformed")));
            }
            if lv.iter().map(Cluster::len).sum::<usize>() != n_points {
                return Err(Error::Container(format!("level {l} does not cover every point")));
            }
        }
        Ok(ClusterTree { dim, depth, leaf_capacity, n_points, levels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Leaf level `L`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaf_capacity(&self) -> Option<usize> {
        self.leaf_capacity
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn level(&self, l: usize) -> &[Cluster] {
        &self.levels[l]
    }

    pub fn cluster(&self, level: usize, index: usize) -> &Cluster {
        &self.levels[level][index]
    }

    pub fn leaves(&self) -> &[Cluster] {
        &self.levels[self.depth]
    }

    pub fn root(&self) -> &Cluster {
        &self.levels[0][0]
    }

    /// Morton indices of the children of cluster `index`.
    pub fn children(&self, index: usize) -> std::ops::Range<usize> {
        let first = index << self.dim;
        first..first + (1 << self.dim)
    }

    pub fn parent(&self, index: usize) -> usize {
        index >> self.dim
    }
}
