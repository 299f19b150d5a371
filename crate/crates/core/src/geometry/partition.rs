use super::{adm_hybrid, adm_standard, AdmissibilityConfig, AdmissibilityMode, ClusterTree};

/// Row and column cluster of a block, both on `level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockIndex {
    pub level: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockKind {
    /// Standard-admissible pair whose parents are not.
    FarField,
    /// Neighbor pair on the switching level, compressed under the hybrid rule.
    FinerNeighbor,
    /// Sibling pair below the switching level.
    FinerAdjacent,
    /// Neighbor pair on the leaf level, kept dense.
    LeafNeighborDense,
    LeafDiagonal,
}

impl BlockKind {
    pub const ALL: [BlockKind; 5] = [
        BlockKind::FarField,
        BlockKind::FinerNeighbor,
        BlockKind::FinerAdjacent,
        BlockKind::LeafNeighborDense,
        BlockKind::LeafDiagonal,
    ];

    pub fn is_low_rank(self) -> bool {
        matches!(self, BlockKind::FarField | BlockKind::FinerNeighbor | BlockKind::FinerAdjacent)
    }

    pub fn name(self) -> &'static str {
        match self {
            BlockKind::FarField => "far_field",
            BlockKind::FinerNeighbor => "finer_neighbor",
            BlockKind::FinerAdjacent => "finer_adjacent",
            BlockKind::LeafNeighborDense => "leaf_neighbor_dense",
            BlockKind::LeafDiagonal => "leaf_diagonal",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub(crate) fn code(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }
}

/// Disjoint block lists covering the `N x N` index set exactly once. Each
/// list is sorted by `(level, row, col)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BlockPartition {
    pub far_field: Vec<BlockIndex>,
    pub finer_neighbor: Vec<BlockIndex>,
    pub finer_adjacent: Vec<BlockIndex>,
    pub leaf_neighbor_dense: Vec<BlockIndex>,
    pub leaf_diagonal: Vec<BlockIndex>,
}

impl BlockPartition {
    pub fn build(tree: &ClusterTree, cfg: &AdmissibilityConfig) -> Self {
        assert_eq!(cfg.depth, tree.depth(), "admissibility config is for a different tree depth");
        let mut p = match cfg.mode {
            AdmissibilityMode::Standard => standard(tree, cfg.eta),
            AdmissibilityMode::Weak => weak(tree),
            AdmissibilityMode::Hybrid => hybrid(tree, cfg),
        };
        for list in [
            &mut p.far_field,
            &mut p.finer_neighbor,
            &mut p.finer_adjacent,
            &mut p.leaf_neighbor_dense,
            &mut p.leaf_diagonal,
        ] {
            list.sort();
        }
        p
    }

    pub fn list(&self, kind: BlockKind) -> &[BlockIndex] {
        match kind {
            BlockKind::FarField => &self.far_field,
            BlockKind::FinerNeighbor => &self.finer_neighbor,
            BlockKind::FinerAdjacent => &self.finer_adjacent,
            BlockKind::LeafNeighborDense => &self.leaf_neighbor_dense,
            BlockKind::LeafDiagonal => &self.leaf_diagonal,
        }
    }

    pub(crate) fn list_mut(&mut self, kind: BlockKind) -> &mut Vec<BlockIndex> {
        match kind {
            BlockKind::FarField => &mut self.far_field,
            BlockKind::FinerNeighbor => &mut self.finer_neighbor,
            BlockKind::FinerAdjacent => &mut self.finer_adjacent,
            BlockKind::LeafNeighborDense => &mut self.leaf_neighbor_dense,
            BlockKind::LeafDiagonal => &mut self.leaf_diagonal,
        }
    }

    /// All blocks in matrix-vector product order: far field, switching-level
    /// neighbors, sibling blocks, leaf neighbors, leaf diagonal.
    pub fn iter(&self) -> impl Iterator<Item = (BlockKind, BlockIndex)> + '_ {
        BlockKind::ALL.into_iter().flat_map(move |k| self.list(k).iter().map(move |&b| (k, b)))
    }

    pub fn len(&self) -> usize {
        BlockKind::ALL.iter().map(|&k| self.list(k).len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn child_pairs(tree: &ClusterTree, a: usize, b: usize) -> impl Iterator<Item = (usize, usize)> {
    let rows = tree.children(a);
    let cols = tree.children(b);
    rows.flat_map(move |i| cols.clone().map(move |j| (i, j)))
}

fn leaf_blocks(p: &mut BlockPartition, depth: usize, near: Vec<(usize, usize)>) {
    for (row, col) in near {
        let b = BlockIndex { level: depth, row, col };
        if row == col {
            p.leaf_diagonal.push(b);
        } else {
            p.leaf_neighbor_dense.push(b);
        }
    }
}

fn standard(tree: &ClusterTree, eta: f64) -> BlockPartition {
    let mut p = BlockPartition::default();
    let mut near = vec![(0, 0)];
    for level in 1..=tree.depth() {
        let clusters = tree.level(level);
        let mut next = Vec::new();
        for &(a, b) in &near {
            for (i, j) in child_pairs(tree, a, b) {
                if adm_standard(&clusters[i], &clusters[j], eta) {
                    p.far_field.push(BlockIndex { level, row: i, col: j });
                } else {
                    next.push((i, j));
                }
            }
        }
        near = next;
    }
    leaf_blocks(&mut p, tree.depth(), near);
    p
}

fn weak(tree: &ClusterTree) -> BlockPartition {
    let mut p = BlockPartition::default();
    for level in 1..=tree.depth() {
        for parent in 0..tree.level(level - 1).len() {
            for (i, j) in child_pairs(tree, parent, parent).filter(|(i, j)| i != j) {
                p.finer_adjacent.push(BlockIndex { level, row: i, col: j });
            }
        }
    }
    let leaves = (0..tree.leaves().len()).map(|i| (i, i)).collect();
    leaf_blocks(&mut p, tree.depth(), leaves);
    p
}

fn hybrid(tree: &ClusterTree, cfg: &AdmissibilityConfig) -> BlockPartition {
    let mut p = BlockPartition::default();
    let mut near = vec![(0, 0)];
    for level in 1..=tree.depth() {
        let clusters = tree.level(level);
        let mut next = Vec::new();
        for &(a, b) in &near {
            for (i, j) in child_pairs(tree, a, b) {
                let (ci, cj) = (&clusters[i], &clusters[j]);
                if !adm_hybrid(ci, cj, cfg) {
                    next.push((i, j));
                    continue;
                }
                let kind = if level > cfg.switch_level {
                    BlockKind::FinerAdjacent
                } else if level == cfg.switch_level && !adm_standard(ci, cj, cfg.eta) {
                    BlockKind::FinerNeighbor
                } else {
                    BlockKind::FarField
                };
                p.list_mut(kind).push(BlockIndex { level, row: i, col: j });
            }
        }
        near = next;
    }
    leaf_blocks(&mut p, tree.depth(), near);
    p
}

#[cfg(test)]
mod tests {
    use super::super::{HyperBox, PointSet, TreeDepth};
    use super::*;

    fn tree(dim: usize, depth: usize) -> ClusterTree {
        let ps = PointSet::with_bounding_box(dim, vec![0.0; dim], HyperBox::unit_cube(dim)).unwrap();
        ClusterTree::build(&ps, TreeDepth::Depth(depth)).unwrap()
    }

    fn covered_area(t: &ClusterTree, p: &BlockPartition) -> f64 {
        let side = |l: usize| 2f64.powi(-(l as i32) * t.dim() as i32);
        p.iter().map(|(_, b)| side(b.level) * side(b.level)).sum()
    }

    #[test]
    fn extremes_match_pure_partitions() {
        let eta = 2f64.sqrt();
        let t = tree(2, 4);
        let hs = BlockPartition::build(&t, &AdmissibilityConfig::hybrid(eta, 4, 4).unwrap());
        let std = BlockPartition::build(&t, &AdmissibilityConfig::standard(eta, 4).unwrap());
        assert_eq!(hs, std);
        let hodlr = BlockPartition::build(&t, &AdmissibilityConfig::hybrid(eta, 0, 4).unwrap());
        assert_eq!(hodlr, BlockPartition::build(&t, &AdmissibilityConfig::weak(4)));
        assert_eq!(hodlr.finer_adjacent.len(), 12 * (1 + 4 + 16 + 64));
    }

    #[test]
    fn hybrid_covers_square_once() {
        let t = tree(2, 4);
        for sw in 0..=4 {
            let p = BlockPartition::build(&t, &AdmissibilityConfig::hybrid(2f64.sqrt(), sw, 4).unwrap());
            assert!((covered_area(&t, &p) - 1.0).abs() < 1e-12, "switch level {sw}");
            assert!(p.iter().filter(|(k, _)| k.is_low_rank()).all(|(_, b)| b.row != b.col));
        }
    }

    #[test]
    fn switching_level_neighbors() {
        let t = tree(2, 4);
        let p = BlockPartition::build(&t, &AdmissibilityConfig::hybrid(2f64.sqrt(), 3, 4).unwrap());
        assert!(p.finer_neighbor.iter().all(|b| b.level == 3));
        assert!(p.finer_adjacent.iter().all(|b| b.level == 4));
        assert!(p.leaf_neighbor_dense.is_empty());
        let interior = t.level(3).iter().find(|c| c.bbox.lo() == [-0.5, -0.5]).unwrap().index;
        assert_eq!(p.finer_neighbor.iter().filter(|b| b.row == interior).count(), 8);
        assert_eq!(p.leaf_diagonal.len(), 256);
    }
}
