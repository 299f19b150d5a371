//! Hierarchical matrices with hybrid admissibility and adaptive
//! mixed-precision block storage for kernel matrices.
//!
//! A [`ClusterTree`] is built over a [`PointSet`]; an
//! [`AdmissibilityConfig`] turns it into a [`BlockPartition`];
//! [`HhMatrix::build_uniform`] compresses the admissible blocks of a kernel
//! matrix by truncated SVD and [`HhMatrix::to_adaptive`] stores each block
//! in the lowest precision its share of the norm allows. [`matvec()`] applies
//! the result with optional emulation of a low working precision.

pub mod error;
pub mod geometry;
pub mod hmatrix;
pub mod kernels;
pub mod lowrank;
pub mod matvec;
pub mod precision;

pub use error::{Error, Result};
pub use geometry::{
    AdmissibilityConfig, AdmissibilityMode, BlockIndex, BlockKind, BlockPartition, Cluster,
    ClusterTree, HyperBox, PointSet, TreeDepth,
};
pub use hmatrix::{HhMatrix, Payload, StorageMode, StorageReport, StoredBlock};
pub use kernels::{KernelKind, KernelSpec};
pub use lowrank::LowRankFactors;
pub use matvec::{matvec, Emulation, MatvecConfig};
pub use precision::{FpFormat, PrecisionConfig, Selection};
