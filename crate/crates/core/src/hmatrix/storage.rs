use super::{HhMatrix, Payload};
use crate::geometry::{sparsity_bounds, BlockKind};

/// Largest ranks per block class: far field (`p'`), compressed neighbors
/// (`p''`) and siblings (`p'''`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MaxRanks {
    pub far: usize,
    pub near: usize,
    pub weak: usize,
}

/// Bit counts of an [`HhMatrix`]. Low-rank blocks cost `p (|I| + |J|) b`
/// bits and dense blocks `|I| |J| b`, with `b` the width of the block's
/// storage format. The total splits as `l_common + S + d_common`, where `S`
/// is [`Self::s1`] for matrices switching at the leaf level and
/// [`Self::s2`] otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct StorageReport {
    pub depth: usize,
    pub switch_level: usize,
    /// Low-rank bits per level `0..=L`, all block kinds.
    pub lr_bits_by_level: Vec<u64>,
    /// Far-field bits per level `0..=L`.
    pub far_field_bits_by_level: Vec<u64>,
    pub finer_neighbor_bits: u64,
    pub finer_adjacent_bits: u64,
    /// Leaf neighbor blocks, dense or (adaptive, when beneficial) low-rank.
    pub leaf_neighbor_bits: u64,
    pub dense_bits: u64,
    /// Far-field bits on levels `1..=switch_level`.
    pub l_common: u64,
    /// Leaf diagonal bits.
    pub d_common: u64,
    /// Fine-level storage of a matrix switching at the leaf level: far
    /// field below the switching level plus leaf neighbors.
    pub s1: Option<u64>,
    /// Fine-level storage under the hybrid rule: compressed neighbors on the
    /// switching level plus siblings below it. At the leaf level this
    /// coincides with `s1`.
    pub s2: u64,
    pub total_bits: u64,
    pub max_ranks: MaxRanks,
    /// Bits per storage format name, in format-table order.
    pub bits_by_format: Vec<(String, u64)>,
    /// `baseline.total_bits / total_bits` for each named baseline.
    pub gains: Vec<(String, f64)>,
}

impl StorageReport {
    pub fn of(h: &HhMatrix) -> Self {
        let depth = h.tree.depth();
        let sw = h.switch_level();
        let mut r = StorageReport {
            depth,
            switch_level: sw,
            lr_bits_by_level: vec![0; depth + 1],
            far_field_bits_by_level: vec![0; depth + 1],
            finer_neighbor_bits: 0,
            finer_adjacent_bits: 0,
            leaf_neighbor_bits: 0,
            dense_bits: 0,
            l_common: 0,
            d_common: 0,
            s1: None,
            s2: 0,
            total_bits: 0,
            max_ranks: MaxRanks::default(),
            bits_by_format: h.formats.iter().map(|f| (f.name.clone(), 0)).collect(),
            gains: Vec::new(),
        };
        for b in &h.blocks {
            let bits = b.bits(&h.formats);
            let l = b.index.level;
            r.total_bits += bits;
            r.bits_by_format[b.format].1 += bits;
            match &b.payload {
                Payload::LowRank { .. } => r.lr_bits_by_level[l] += bits,
                Payload::Dense(_) => r.dense_bits += bits,
            }
            let p = b.rank();
            match b.kind {
                BlockKind::FarField => {
                    r.far_field_bits_by_level[l] += bits;
                    r.max_ranks.far = r.max_ranks.far.max(p);
                }
                BlockKind::FinerNeighbor => {
                    r.finer_neighbor_bits += bits;
                    r.max_ranks.near = r.max_ranks.near.max(p);
                }
                BlockKind::FinerAdjacent => {
                    r.finer_adjacent_bits += bits;
                    r.max_ranks.weak = r.max_ranks.weak.max(p);
                }
                BlockKind::LeafNeighborDense => {
                    r.leaf_neighbor_bits += bits;
                    r.max_ranks.near = r.max_ranks.near.max(p);
                }
                BlockKind::LeafDiagonal => r.d_common += bits,
            }
        }
        r.l_common = r.far_field_bits_by_level[..=sw].iter().sum();
        if sw == depth {
            r.s1 = Some(r.leaf_neighbor_bits);
            r.s2 = r.leaf_neighbor_bits;
        } else {
            r.s2 = r.finer_neighbor_bits + r.finer_adjacent_bits;
        }
        r
    }

    /// `S1(level)` for a matrix switching at the leaf level: far-field bits
    /// on levels `level+1..=L` plus the leaf neighbor bits.
    pub fn s1_at(&self, level: usize) -> Option<u64> {
        if self.switch_level != self.depth || level > self.depth {
            return None;
        }
        Some(self.far_field_bits_by_level[level + 1..].iter().sum::<u64>() + self.leaf_neighbor_bits)
    }

    /// `S1(l)` for every `l` in `0..=L`.
    pub fn s1_profile(&self) -> Option<Vec<u64>> {
        (0..=self.depth).map(|l| self.s1_at(l)).collect()
    }

    /// The fine-level term of the total for this matrix's own switching
    /// level.
    pub fn fine_bits(&self) -> u64 {
        self.s1.unwrap_or(self.s2)
    }

    /// Records `baseline.total_bits / self.total_bits` under `name`.
    pub fn add_baseline(&mut self, name: &str, baseline: &StorageReport) -> f64 {
        let g = baseline.total_bits as f64 / self.total_bits as f64;
        self.gains.push((name.to_string(), g));
        g
    }

    pub fn total_words(&self) -> f64 {
        to_words(self.total_bits)
    }
}

/// fp64-word equivalent of a bit count.
pub fn to_words(bits: u64) -> f64 {
    bits as f64 / 64.0
}

/// Global error bound `(2 sqrt(l C' + C'' + (L - l) C''') + 1) eps` for a
/// matrix of depth `depth` switching at `switch_level`, with `C''` dropped
/// when `switch_level == 0`.
pub fn error_bound(dim: usize, eta: f64, depth: usize, switch_level: usize, eps: f64) -> f64 {
    let c = sparsity_bounds(dim, eta);
    let l = switch_level as f64;
    let near = if switch_level == 0 { 0.0 } else { c.c_near };
    (2.0 * (l * c.c_far + near + (depth - switch_level) as f64 * c.c_weak).sqrt() + 1.0) * eps
}

/// Walks the switching level up from the leaf level while the saving
/// `S1(l) - S2(l)` keeps growing strictly, and returns the level where it
/// stops. `s1[l]` must be available for `l in 0..=L`; `s2` is evaluated on
/// demand.
pub fn optimal_switch_level<E>(s1: &[f64], mut s2: impl FnMut(usize) -> Result<f64, E>) -> Result<usize, E> {
    assert!(!s1.is_empty(), "need S1 for levels 0..=L");
    let mut level = s1.len() - 1;
    let mut gain = s1[level] - s2(level)?;
    while level > 0 {
        let next = s1[level - 1] - s2(level - 1)?;
        if next <= gain {
            break;
        }
        gain = next;
        level -= 1;
    }
    Ok(level)
}
