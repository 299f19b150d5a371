//! Binary container for [`HhMatrix`].
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        8 bytes  "HHMATRIX"
//! version      u32      1
//! dim          u32
//! depth        u32
//! switch_level u32
//! adm_mode     u8       0 standard, 1 weak, 2 hybrid
//! storage_mode u8       0 uniform, 1 adaptive
//! leaf_cap     u64      0 when the depth was given directly
//! eta, eps, global_frob   f64
//! root box     dim x f64 lo, dim x f64 hi
//! leaves       2^(dim depth) x { count u32, count x u32 point id }
//! formats      u32 count, then per format:
//!              u16 name length, name bytes, u32 e, u32 m, i32 e_min,
//!              i32 e_max, f64 u, u8 subnormals
//! blocks       u64 count, then per block:
//!              u32 level, u64 row, u64 col, u8 kind, u8 payload (0 low-rank,
//!              1 dense), u32 rows, u32 cols, u32 rank, u16 format id,
//!              f64 xi, u8 fallback,
//!              low-rank: rank x f64 sigma, f64 tail energy,
//!                        U (rows x rank) then W (cols x rank), row-major
//!              dense:    rows x cols, row-major
//! ```
//!
//! Factor and dense entries are written at the width of the block's format,
//! `ceil((1 + e + m) / 8)` bytes, as sign, biased exponent (bias `1 - e_min`)
//! and trailing significand. An all-ones exponent encodes infinities and NaN.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use super::{HhMatrix, Payload, StorageMode, StoredBlock};
use crate::error::{Error, Result};
use crate::geometry::{
    AdmissibilityConfig, AdmissibilityMode, BlockIndex, BlockKind, BlockPartition, Cluster, ClusterTree, HyperBox,
};
use crate::precision::{exponent, pow2, FpFormat};

const MAGIC: &[u8; 8] = b"HHMATRIX";
const VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> Error {
    Error::Container(msg.into())
}

fn width(f: &FpFormat) -> usize {
    (f.storage_bits() as usize).div_ceil(8)
}

/// Bit pattern of `x`, which must be representable in `f`.
pub(crate) fn encode(x: f64, f: &FpFormat) -> Result<u64> {
    if f.is_binary64() {
        return Ok(x.to_bits());
    }
    let m = f.mantissa_bits;
    let sign = u64::from(x.is_sign_negative()) << (f.exp_bits + m);
    let all_ones = (1u64 << f.exp_bits) - 1;
    if x.is_nan() {
        return Ok((all_ones << m) | 1);
    }
    if x.is_infinite() {
        return Ok(sign | (all_ones << m));
    }
    let a = x.abs();
    if a == 0.0 {
        return Ok(sign);
    }
    let bias = 1 - f.e_min;
    let e = exponent(a);
    let (field, frac) = if e < f.e_min {
        (0, a / pow2(f.e_min - m as i32))
    } else {
        ((e + bias) as u64, (a / pow2(e) - 1.0) * pow2(m as i32))
    };
    if frac.fract() != 0.0 || frac >= pow2(m as i32) || field >= all_ones || e > f.e_max {
        return Err(bad(format!("{x:e} is not representable in {}", f.name)));
    }
    Ok(sign | (field << m) | frac as u64)
}

pub(crate) fn decode(bits: u64, f: &FpFormat) -> f64 {
    if f.is_binary64() {
        return f64::from_bits(bits);
    }
    let m = f.mantissa_bits;
    let all_ones = (1u64 << f.exp_bits) - 1;
    let negative = bits >> (f.exp_bits + m) & 1 == 1;
    let field = bits >> m & all_ones;
    let frac = (bits & ((1u64 << m) - 1)) as f64;
    let a = if field == all_ones {
        if frac == 0.0 {
            f64::INFINITY
        } else {
            return f64::NAN;
        }
    } else if field == 0 {
        frac * pow2(f.e_min - m as i32)
    } else {
        (1.0 + frac * pow2(-(m as i32))) * pow2(field as i32 - (1 - f.e_min))
    };
    if negative {
        -a
    } else {
        a
    }
}

fn write_values<W: Write>(w: &mut W, xs: impl Iterator<Item = f64>, f: &FpFormat) -> Result<()> {
    let nb = width(f);
    for x in xs {
        let bits = encode(x, f)?;
        w.write_all(&bits.to_le_bytes()[..nb])?;
    }
    Ok(())
}

fn read_matrix<R: Read>(r: &mut R, rows: usize, cols: usize, f: &FpFormat) -> Result<Array2<f64>> {
    let nb = width(f);
    let mut v = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf[..nb])?;
        v.push(decode(u64::from_le_bytes(buf), f));
    }
    Array2::from_shape_vec((rows, cols), v).map_err(|e| bad(e.to_string()))
}

pub fn write_to<W: Write>(h: &HhMatrix, w: &mut W) -> Result<()> {
    let tree = &h.tree;
    let dim = tree.dim();
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    w.write_u32::<LE>(dim as u32)?;
    w.write_u32::<LE>(tree.depth() as u32)?;
    w.write_u32::<LE>(h.admissibility.switch_level as u32)?;
    w.write_u8(match h.admissibility.mode {
        AdmissibilityMode::Standard => 0,
        AdmissibilityMode::Weak => 1,
        AdmissibilityMode::Hybrid => 2,
    })?;
    w.write_u8(match h.mode {
        StorageMode::Uniform => 0,
        StorageMode::Adaptive => 1,
    })?;
    w.write_u64::<LE>(tree.leaf_capacity().unwrap_or(0) as u64)?;
    w.write_f64::<LE>(h.admissibility.eta)?;
    w.write_f64::<LE>(h.eps)?;
    w.write_f64::<LE>(h.global_frob)?;
    let root = &tree.root().bbox;
    for &x in root.lo().iter().chain(root.hi()) {
        w.write_f64::<LE>(x)?;
    }
    for leaf in tree.leaves() {
        w.write_u32::<LE>(leaf.len() as u32)?;
        for &p in &leaf.point_ids {
            w.write_u32::<LE>(p as u32)?;
        }
    }
    w.write_u32::<LE>(h.formats.len() as u32)?;
    for f in &h.formats {
        w.write_u16::<LE>(f.name.len() as u16)?;
        w.write_all(f.name.as_bytes())?;
        w.write_u32::<LE>(f.exp_bits)?;
        w.write_u32::<LE>(f.mantissa_bits)?;
        w.write_i32::<LE>(f.e_min)?;
        w.write_i32::<LE>(f.e_max)?;
        w.write_f64::<LE>(f.unit_roundoff)?;
        w.write_u8(u8::from(f.subnormals))?;
    }
    w.write_u64::<LE>(h.blocks.len() as u64)?;
    for b in &h.blocks {
        let (rows, cols) = b.shape();
        w.write_u32::<LE>(b.index.level as u32)?;
        w.write_u64::<LE>(b.index.row as u64)?;
        w.write_u64::<LE>(b.index.col as u64)?;
        w.write_u8(b.kind.code())?;
        w.write_u8(if b.is_low_rank() { 0 } else { 1 })?;
        w.write_u32::<LE>(rows as u32)?;
        w.write_u32::<LE>(cols as u32)?;
        w.write_u32::<LE>(b.rank() as u32)?;
        w.write_u16::<LE>(b.format as u16)?;
        w.write_f64::<LE>(b.xi)?;
        w.write_u8(u8::from(b.fallback))?;
        let f = &h.formats[b.format];
        match &b.payload {
            Payload::LowRank { u, w: wf, sigma, tail_energy } => {
                for &s in sigma {
                    w.write_f64::<LE>(s)?;
                }
                w.write_f64::<LE>(*tail_energy)?;
                write_values(w, u.iter().copied(), f)?;
                write_values(w, wf.iter().copied(), f)?;
            }
            Payload::Dense(a) => write_values(w, a.iter().copied(), f)?,
        }
    }
    Ok(())
}

pub fn save(h: &HhMatrix, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_to(h, &mut w)?;
    w.flush()?;
    Ok(())
}

fn read_len<R: Read>(r: &mut R, limit: usize, what: &str) -> Result<usize> {
    let n = r.read_u32::<LE>()? as usize;
    if n > limit {
        return Err(bad(format!("{what} {n} exceeds {limit}")));
    }
    Ok(n)
}

pub fn read_from<R: Read>(r: &mut R) -> Result<HhMatrix> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not an hhmat container"));
    }
    let version = r.read_u32::<LE>()?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let dim = read_len(r, 64, "dimension")?;
    let depth = read_len(r, 64, "depth")?;
    let switch_level = read_len(r, depth, "switching level")?;
    if dim == 0 || dim * depth > 28 {
        return Err(bad("tree shape out of range"));
    }
    let adm_mode = match r.read_u8()? {
        0 => AdmissibilityMode::Standard,
        1 => AdmissibilityMode::Weak,
        2 => AdmissibilityMode::Hybrid,
        m => return Err(bad(format!("unknown admissibility mode {m}"))),
    };
    let mode = match r.read_u8()? {
        0 => StorageMode::Uniform,
        1 => StorageMode::Adaptive,
        m => return Err(bad(format!("unknown storage mode {m}"))),
    };
    let leaf_cap = r.read_u64::<LE>()? as usize;
    let eta = r.read_f64::<LE>()?;
    let eps = r.read_f64::<LE>()?;
    let global_frob = r.read_f64::<LE>()?;
    let admissibility =
        AdmissibilityConfig::new(eta, adm_mode, switch_level, depth).map_err(|e| bad(e.to_string()))?;
    if admissibility.switch_level != switch_level {
        return Err(bad("switching level inconsistent with admissibility mode"));
    }
    let mut lo = vec![0.0; dim];
    let mut hi = vec![0.0; dim];
    for x in lo.iter_mut().chain(hi.iter_mut()) {
        *x = r.read_f64::<LE>()?;
    }
    let root = HyperBox::new(lo, hi).map_err(|e| bad(e.to_string()))?;

    let n_leaves = 1usize << (dim * depth);
    let mut leaf_ids = Vec::with_capacity(n_leaves);
    let mut n_points = 0usize;
    for _ in 0..n_leaves {
        let c = read_len(r, u32::MAX as usize, "cluster size")?;
        let mut ids = Vec::with_capacity(c.min(1 << 20));
        for _ in 0..c {
            ids.push(r.read_u32::<LE>()? as usize);
        }
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("cluster point ids are not increasing"));
        }
        n_points += c;
        leaf_ids.push(ids);
    }
    let tree = rebuild_tree(dim, depth, root, leaf_ids, n_points, leaf_cap)?;

    let n_formats = read_len(r, 256, "format count")?;
    let mut formats = Vec::with_capacity(n_formats);
    for _ in 0..n_formats {
        let len = r.read_u16::<LE>()? as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| bad("format name is not UTF-8"))?;
        let e = r.read_u32::<LE>()?;
        let m = r.read_u32::<LE>()?;
        let e_min = r.read_i32::<LE>()?;
        let e_max = r.read_i32::<LE>()?;
        let u = r.read_f64::<LE>()?;
        let sub = r.read_u8()? != 0;
        formats.push(FpFormat::new(&name, e, m, e_min, e_max, Some(u)).map_err(|e| bad(e.to_string()))?.with_subnormals(sub));
    }
    if formats.is_empty() {
        return Err(bad("empty format table"));
    }

    let n_blocks = r.read_u64::<LE>()? as usize;
    let mut partition = BlockPartition::default();
    let mut blocks = Vec::with_capacity(n_blocks.min(1 << 24));
    for _ in 0..n_blocks {
        let level = read_len(r, depth, "block level")?;
        let row = r.read_u64::<LE>()? as usize;
        let col = r.read_u64::<LE>()? as usize;
        let kind = BlockKind::from_code(r.read_u8()?).ok_or_else(|| bad("unknown block kind"))?;
        let low_rank = match r.read_u8()? {
            0 => true,
            1 => false,
            p => return Err(bad(format!("unknown payload tag {p}"))),
        };
        let rows = r.read_u32::<LE>()? as usize;
        let cols = r.read_u32::<LE>()? as usize;
        let rank = r.read_u32::<LE>()? as usize;
        let format = r.read_u16::<LE>()? as usize;
        let xi = r.read_f64::<LE>()?;
        let fallback = r.read_u8()? != 0;
        let n_level = 1usize << (dim * level);
        if row >= n_level || col >= n_level {
            return Err(bad("block index out of range"));
        }
        if tree.cluster(level, row).len() != rows || tree.cluster(level, col).len() != cols {
            return Err(bad("block shape does not match its clusters"));
        }
        if rank > rows.min(cols) {
            return Err(bad("block rank exceeds its dimensions"));
        }
        let f = formats.get(format).ok_or_else(|| bad("format id out of range"))?;
        let payload = if low_rank {
            let mut sigma = Vec::with_capacity(rank);
            for _ in 0..rank {
                sigma.push(r.read_f64::<LE>()?);
            }
            let tail_energy = r.read_f64::<LE>()?;
            let u = read_matrix(r, rows, rank, f)?;
            let w = read_matrix(r, cols, rank, f)?;
            Payload::LowRank { u, w, sigma, tail_energy }
        } else {
            Payload::Dense(read_matrix(r, rows, cols, f)?)
        };
        let index = BlockIndex { level, row, col };
        partition.list_mut(kind).push(index);
        blocks.push(StoredBlock { kind, index, payload, xi, format, fallback });
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(bad("trailing bytes after the last block"));
    }
    let expected = BlockPartition::build(&tree, &admissibility);
    if partition != expected {
        return Err(bad("stored blocks do not form the matrix's block partition"));
    }
    Ok(HhMatrix { tree, admissibility, partition, eps, mode, formats, blocks, global_frob })
}

fn rebuild_tree(
    dim: usize,
    depth: usize,
    root: HyperBox,
    leaves: Vec<Vec<usize>>,
    n_points: usize,
    leaf_cap: usize,
) -> Result<ClusterTree> {
    let mut ids_by_level = vec![leaves];
    for _ in 0..depth {
        let below = ids_by_level.last().unwrap();
        let above: Vec<Vec<usize>> = below
            .chunks(1 << dim)
            .map(|ch| {
                let mut v: Vec<usize> = ch.iter().flatten().copied().collect();
                v.sort_unstable();
                v
            })
            .collect();
        ids_by_level.push(above);
    }
    ids_by_level.reverse();
    if ids_by_level[0][0] != (0..n_points).collect::<Vec<_>>() {
        return Err(bad("leaves do not partition the point indices"));
    }
    let mut levels: Vec<Vec<Cluster>> = Vec::with_capacity(depth + 1);
    levels.push(vec![Cluster { level: 0, index: 0, bbox: root, point_ids: ids_by_level[0][0].clone() }]);
    for l in 1..=depth {
        let parents = &levels[l - 1];
        let lv: Vec<Cluster> = ids_by_level[l]
            .iter()
            .enumerate()
            .map(|(i, ids)| Cluster {
                level: l,
                index: i,
                bbox: parents[i >> dim].bbox.child(i & ((1 << dim) - 1)),
                point_ids: ids.clone(),
            })
            .collect();
        levels.push(lv);
    }
    ClusterTree::from_levels(dim, (leaf_cap > 0).then_some(leaf_cap), levels)
}

pub fn load(path: &Path) -> Result<HhMatrix> {
    read_from(&mut BufReader::new(File::open(path)?))
}
