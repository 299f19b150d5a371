//! Assembly of the compressed matrix, adaptive mixed-precision storage, the
//! storage ledger and the switching-level search.

mod container;
mod storage;

pub use container::{load, read_from, save, write_to};
pub use storage::{error_bound, optimal_switch_level, to_words, MaxRanks, StorageReport};

use std::collections::HashMap;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{AdmissibilityConfig, BlockIndex, BlockKind, BlockPartition, ClusterTree, PointSet};
use crate::kernels::{assemble_block, KernelSpec};
use crate::lowrank::{truncated_svd, FrobeniusAccumulator, LowRankFactors};
use crate::precision::{round_to_format, select_precision, FpFormat, PrecisionConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StorageMode {
    Uniform,
    Adaptive,
}

/// Stored contents of one block.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    /// `U W^T` with `W = V diag(sigma)`. `u` and `w` hold values of the
    /// block's storage format; `sigma` and `tail_energy` come from the
    /// compression and are kept for re-truncation and norms.
    LowRank { u: Array2<f64>, w: Array2<f64>, sigma: Vec<f64>, tail_energy: f64 },
    Dense(Array2<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StoredBlock {
    pub kind: BlockKind,
    pub index: BlockIndex,
    pub payload: Payload,
    /// Share of the global Frobenius norm, `||H~_block||_F / ||H~||_F`.
    pub xi: f64,
    /// Index into [`HhMatrix::formats`].
    pub format: usize,
    pub fallback: bool,
}

impl StoredBlock {
    pub fn rank(&self) -> usize {
        match &self.payload {
            Payload::LowRank { sigma, .. } => sigma.len(),
            Payload::Dense(_) => 0,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match &self.payload {
            Payload::LowRank { u, w, .. } => (u.nrows(), w.nrows()),
            Payload::Dense(a) => a.dim(),
        }
    }

    pub fn is_low_rank(&self) -> bool {
        matches!(self.payload, Payload::LowRank { .. })
    }

    /// Squared Frobenius norm of the block as compressed in working
    /// precision.
    pub fn energy(&self) -> f64 {
        match &self.payload {
            Payload::LowRank { sigma, .. } => sigma.iter().map(|s| s * s).sum(),
            Payload::Dense(a) => a.iter().map(|x| x * x).sum(),
        }
    }

    /// The stored block as a dense matrix, `U W^T` for low-rank payloads.
    pub fn to_dense(&self) -> Array2<f64> {
        match &self.payload {
            Payload::LowRank { u, w, .. } => u.dot(&w.t()),
            Payload::Dense(a) => a.clone(),
        }
    }

    /// Storage cost in bits: `p (|I| + |J|) b` or `|I| |J| b`.
    pub fn bits(&self, formats: &[FpFormat]) -> u64 {
        let b = formats[self.format].storage_bits() as u64;
        let (m, n) = self.shape();
        match &self.payload {
            Payload::LowRank { .. } => self.rank() as u64 * (m + n) as u64 * b,
            Payload::Dense(_) => m as u64 * n as u64 * b,
        }
    }
}

/// A kernel matrix in hybrid hierarchical form.
#[derive(Clone, Debug, PartialEq)]
pub struct HhMatrix {
    pub(crate) tree: ClusterTree,
    pub(crate) admissibility: AdmissibilityConfig,
    pub(crate) partition: BlockPartition,
    pub(crate) eps: f64,
    pub(crate) mode: StorageMode,
    pub(crate) formats: Vec<FpFormat>,
    pub(crate) blocks: Vec<StoredBlock>,
    pub(crate) global_frob: f64,
}

#[derive(Clone)]
enum Computed {
    Factors(LowRankFactors),
    Dense(Array2<f64>),
}

fn fold_factors(f: LowRankFactors) -> Payload {
    let mut w = f.v;
    for (mut col, &s) in w.columns_mut().into_iter().zip(&f.s) {
        col *= s;
    }
    Payload::LowRank { u: f.u, w, sigma: f.s, tail_energy: f.tail_energy }
}

/// Whether `p (m + n) b < m n 64`, i.e. the factors are smaller than the
/// dense fp64 block.
pub fn low_rank_is_beneficial(rank: usize, m: usize, n: usize, bits: u32) -> bool {
    (rank as u64) * ((m + n) as u64) * (bits as u64) < (m as u64) * (n as u64) * 64
}

impl HhMatrix {
    /// Compresses every admissible block of the kernel matrix to relative
    /// accuracy `eps` in fp64. Dense blocks are the leaf diagonal and, when
    /// the switching level is the leaf level, the leaf neighbors.
    pub fn build_uniform(
        kernel: &KernelSpec,
        points: &PointSet,
        tree: &ClusterTree,
        cfg: &AdmissibilityConfig,
        eps: f64,
    ) -> Result<Self> {
        let working = FpFormat::fp64();
        if !(eps > working.unit_roundoff) || !eps.is_finite() {
            return Err(Error::AccuracyBelowRoundoff { eps, unit_roundoff: working.unit_roundoff });
        }
        if tree.n_points() != points.len() || tree.dim() != points.dim() {
            return invalid("cluster tree was not built on this point set");
        }
        if cfg.depth != tree.depth() {
            return invalid("admissibility config is for a different tree depth");
        }
        let partition = BlockPartition::build(tree, cfg);
        let entries: Vec<(BlockKind, BlockIndex)> = partition.iter().collect();
        let position: HashMap<(BlockKind, BlockIndex), usize> =
            entries.iter().enumerate().map(|(k, &e)| (e, k)).collect();

        // The kernel is symmetric, so (j, i) reuses the factors of (i, j).
        let unique: Vec<usize> =
            (0..entries.len()).filter(|&k| !entries[k].0.is_low_rank() || entries[k].1.row < entries[k].1.col).collect();
        let computed: Vec<Result<Computed>> = unique
            .par_iter()
            .map(|&k| {
                let (kind, b) = entries[k];
                let rows = &tree.cluster(b.level, b.row).point_ids;
                let cols = &tree.cluster(b.level, b.col).point_ids;
                let a = assemble_block(kernel, points, rows, cols);
                if kind.is_low_rank() {
                    Ok(Computed::Factors(truncated_svd(a.view(), eps)?))
                } else {
                    Ok(Computed::Dense(a))
                }
            })
            .collect();
        let mut results: Vec<Option<Computed>> = vec![None; entries.len()];
        for (&k, c) in unique.iter().zip(computed) {
            results[k] = Some(c?);
        }
        for k in 0..entries.len() {
            if results[k].is_some() {
                continue;
            }
            let (kind, b) = entries[k];
            let mirror = position[&(kind, BlockIndex { level: b.level, row: b.col, col: b.row })];
            let Some(Computed::Factors(f)) = &results[mirror] else {
                unreachable!("mirror of a low-rank block is low-rank");
            };
            results[k] = Some(Computed::Factors(f.transposed()));
        }
        let payloads = results.into_iter().map(|c| match c.expect("every block computed") {
            Computed::Factors(f) => fold_factors(f),
            Computed::Dense(a) => Payload::Dense(a),
        });

        let blocks = entries
            .into_iter()
            .zip(payloads)
            .map(|((kind, index), p)| StoredBlock {
                kind,
                index,
                payload: p,
                xi: 0.0,
                format: 0,
                fallback: false,
            })
            .collect();
        let mut h = HhMatrix {
            tree: tree.clone(),
            admissibility: *cfg,
            partition,
            eps,
            mode: StorageMode::Uniform,
            formats: vec![working],
            blocks,
            global_frob: 0.0,
        };
        h.refresh_norms();
        Ok(h)
    }

    /// Recomputes `||H~||_F` from the block norms and every block's `xi`.
    fn refresh_norms(&mut self) {
        let mut acc = FrobeniusAccumulator::default();
        for b in &self.blocks {
            acc.add_energy(b.energy());
        }
        self.global_frob = acc.norm();
        let g = self.global_frob;
        for b in &mut self.blocks {
            b.xi = if g > 0.0 { (b.energy().sqrt() / g).min(1.0) } else { 0.0 };
        }
    }

    /// The uniform matrix at a looser accuracy `eps >= self.eps()`, obtained
    /// by dropping trailing singular terms. Identical ranks to a direct
    /// build at `eps`.
    pub fn retruncate(&self, eps: f64) -> Result<Self> {
        if self.mode != StorageMode::Uniform {
            return invalid("only uniform matrices can be re-truncated");
        }
        if !(eps >= self.eps) {
            return invalid(format!("cannot tighten accuracy from {:e} to {eps:e}", self.eps));
        }
        let mut h = self.clone();
        h.eps = eps;
        for b in &mut h.blocks {
            if let Payload::LowRank { u, w, sigma, tail_energy } = &mut b.payload {
                let f = LowRankFactors { u: u.clone(), s: sigma.clone(), v: w.clone(), tail_energy: *tail_energy };
                let t = f.truncate(eps);
                *u = t.u;
                *w = t.v;
                *sigma = t.s;
                *tail_energy = t.tail_energy;
            }
        }
        h.refresh_norms();
        Ok(h)
    }

    /// Stores each low-rank block in the least accurate format allowed by
    /// its level and norm share. Leaf diagonals stay in working precision.
    /// When the switching level is the leaf level, leaf neighbor blocks are
    /// compressed as well if that saves storage in the selected format.
    pub fn to_adaptive(&self, cfg: &PrecisionConfig) -> Result<Self> {
        if self.mode != StorageMode::Uniform {
            return invalid("matrix is already adaptive");
        }
        if cfg.working() != &self.formats[0] {
            return invalid(format!(
                "precision config works in {} but the matrix was built in {}",
                cfg.working(),
                self.formats[0]
            ));
        }
        let formats = cfg.candidates();
        let dim = self.tree.dim();
        let compress_neighbors = self.admissibility.switch_level == self.tree.depth();
        let mut out = self.clone();
        out.mode = StorageMode::Adaptive;
        out.formats = formats.clone();
        for b in &mut out.blocks {
            match (&b.payload, b.kind) {
                (Payload::LowRank { sigma, .. }, _) if sigma.is_empty() => {}
                (Payload::LowRank { .. }, _) => {
                    let sel = select_precision(b.xi, self.eps, dim, b.index.level, cfg);
                    b.format = sel.format;
                    b.fallback = sel.fallback;
                    round_payload(&mut b.payload, &formats[sel.format]);
                }
                (Payload::Dense(a), BlockKind::LeafNeighborDense) if compress_neighbors => {
                    let f = truncated_svd(a.view(), self.eps)?;
                    let xi = if self.global_frob > 0.0 { f.frob_norm() / self.global_frob } else { 0.0 };
                    let sel = select_precision(xi, self.eps, dim, b.index.level, cfg);
                    let (m, n) = a.dim();
                    if low_rank_is_beneficial(f.rank(), m, n, formats[sel.format].storage_bits()) {
                        b.payload = fold_factors(f);
                        b.xi = xi.min(1.0);
                        b.format = sel.format;
                        b.fallback = sel.fallback;
                        round_payload(&mut b.payload, &formats[sel.format]);
                    }
                }
                (Payload::Dense(_), _) => {}
            }
        }
        Ok(out)
    }

    pub fn tree(&self) -> &ClusterTree {
        &self.tree
    }

    pub fn admissibility(&self) -> &AdmissibilityConfig {
        &self.admissibility
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn switch_level(&self) -> usize {
        self.admissibility.switch_level
    }

    pub fn mode(&self) -> StorageMode {
        self.mode
    }

    /// Storage formats; block format ids index into this list and entry 0 is
    /// the working precision.
    pub fn formats(&self) -> &[FpFormat] {
        &self.formats
    }

    /// All blocks in partition order (far field, switching-level neighbors,
    /// siblings, leaf neighbors, leaf diagonal).
    pub fn blocks(&self) -> &[StoredBlock] {
        &self.blocks
    }

    pub fn leaf_diagonals(&self) -> impl Iterator<Item = &StoredBlock> {
        self.blocks.iter().filter(|b| b.kind == BlockKind::LeafDiagonal)
    }

    /// `||H~||_F` of the uniform compression.
    pub fn global_frob(&self) -> f64 {
        self.global_frob
    }

    pub fn n(&self) -> usize {
        self.tree.n_points()
    }

    pub fn row_ids(&self, b: &StoredBlock) -> &[usize] {
        &self.tree.cluster(b.index.level, b.index.row).point_ids
    }

    pub fn col_ids(&self, b: &StoredBlock) -> &[usize] {
        &self.tree.cluster(b.index.level, b.index.col).point_ids
    }

    pub fn storage_report(&self) -> StorageReport {
        StorageReport::of(self)
    }

    /// Assembles the full `N x N` matrix from its blocks.
    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.n();
        let mut out = Array2::zeros((n, n));
        for b in &self.blocks {
            let d = b.to_dense();
            scatter(&mut out, d.view(), self.row_ids(b), self.col_ids(b));
        }
        out
    }

    /// `||H - H^||_F / ||H||_F`, evaluated block by block against freshly
    /// assembled exact kernel blocks.
    pub fn global_error(&self, kernel: &KernelSpec, points: &PointSet) -> f64 {
        let (num, den) = self
            .blocks
            .par_iter()
            .map(|b| {
                let exact = assemble_block(kernel, points, self.row_ids(b), self.col_ids(b));
                let approx = b.to_dense();
                let num: f64 = exact.iter().zip(approx.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
                let den: f64 = exact.iter().map(|x| x * x).sum();
                (num, den)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        if den == 0.0 {
            return if num == 0.0 { 0.0 } else { f64::INFINITY };
        }
        (num / den).sqrt()
    }

    /// Blocks whose stored values overflowed to infinity.
    pub fn overflowed_blocks(&self) -> Vec<&StoredBlock> {
        self.blocks
            .iter()
            .filter(|b| match &b.payload {
                Payload::LowRank { u, w, .. } => u.iter().chain(w.iter()).any(|x| !x.is_finite()),
                Payload::Dense(a) => a.iter().any(|x| !x.is_finite()),
            })
            .collect()
    }
}

fn round_payload(p: &mut Payload, fmt: &FpFormat) {
    if fmt.is_binary64() {
        return;
    }
    match p {
        Payload::LowRank { u, w, .. } => {
            u.mapv_inplace(|x| round_to_format(x, fmt));
            w.mapv_inplace(|x| round_to_format(x, fmt));
        }
        Payload::Dense(a) => a.mapv_inplace(|x| round_to_format(x, fmt)),
    }
}

fn scatter(out: &mut Array2<f64>, block: ArrayView2<f64>, rows: &[usize], cols: &[usize]) {
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            out[[i, j]] = block[[a, b]];
        }
    }
}
