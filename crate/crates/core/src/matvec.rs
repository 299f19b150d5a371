//! Matrix-vector products with the compressed matrix under an emulated
//! working precision, and the backward error against the dense kernel.
//!
//! With per-operation emulation every scalar product and every scalar sum is
//! rounded to the working format, accumulating sequentially from the lowest
//! index. Blocks are applied in partition order.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::PointSet;
use crate::hmatrix::{HhMatrix, Payload};
use crate::kernels::KernelSpec;
use crate::precision::{round_to_format, FpFormat};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Emulation {
    /// Host `f64` arithmetic; only valid for an fp64 working format.
    Native,
    /// Round after every multiply and every add.
    PerOp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatvecConfig {
    pub working: FpFormat,
    pub emulation: Emulation,
}

impl MatvecConfig {
    pub fn new(working: FpFormat, emulation: Emulation) -> Result<Self> {
        if emulation == Emulation::Native && !working.is_binary64() {
            return invalid(format!("{} arithmetic must be emulated per operation", working.name));
        }
        Ok(MatvecConfig { working, emulation })
    }

    /// fp64 in host arithmetic.
    pub fn native() -> Self {
        MatvecConfig { working: FpFormat::fp64(), emulation: Emulation::Native }
    }

    /// Per-operation emulation of `working`.
    pub fn emulated(working: FpFormat) -> Self {
        MatvecConfig { working, emulation: Emulation::PerOp }
    }
}

/// `b = H^ x`. Each low-rank block adds `U (W^T x_J)` to `b_I`, forming
/// `W^T x_J` first. Overflow in a low working precision shows up as
/// infinities in `b`.
pub fn matvec(h: &HhMatrix, x: &[f64], cfg: &MatvecConfig) -> Result<Vec<f64>> {
    if x.len() != h.n() {
        return invalid(format!("vector has length {}, matrix has size {}", x.len(), h.n()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let fmt = &cfg.working;
    let emulate = cfg.emulation == Emulation::PerOp && !fmt.is_binary64();
    let rnd = |v: f64| if emulate { round_to_format(v, fmt) } else { v };
    let x: Vec<f64> = x.iter().map(|&v| rnd(v)).collect();
    let mut b = vec![0.0; x.len()];
    let mut xj = Vec::new();
    let mut t = Vec::new();
    for blk in h.blocks() {
        let rows = h.row_ids(blk);
        let cols = h.col_ids(blk);
        xj.clear();
        xj.extend(cols.iter().map(|&j| x[j]));
        match &blk.payload {
            Payload::LowRank { u, w, .. } => {
                let p = blk.rank();
                if p == 0 {
                    continue;
                }
                t.clear();
                t.resize(p, 0.0);
                for (j, row) in w.rows().into_iter().enumerate() {
                    let xv = xj[j];
                    for (tk, &wv) in t.iter_mut().zip(row.iter()) {
                        *tk = rnd(*tk + rnd(rnd(wv) * xv));
                    }
                }
                for (a, row) in u.rows().into_iter().enumerate() {
                    let mut y = 0.0;
                    for (&uv, &tk) in row.iter().zip(&t) {
                        y = rnd(y + rnd(rnd(uv) * tk));
                    }
                    let i = rows[a];
                    b[i] = rnd(b[i] + y);
                }
            }
            Payload::Dense(d) => {
                for (a, row) in d.rows().into_iter().enumerate() {
                    let mut y = 0.0;
                    for (&dv, &xv) in row.iter().zip(&xj) {
                        y = rnd(y + rnd(rnd(dv) * xv));
                    }
                    let i = rows[a];
                    b[i] = rnd(b[i] + y);
                }
            }
        }
    }
    Ok(b)
}

/// Dense product `H x` and `||H||_F` in host precision, without storing `H`.
pub fn dense_reference(kernel: &KernelSpec, points: &PointSet, x: &[f64]) -> (Vec<f64>, f64) {
    let rows: Vec<(f64, f64)> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            let mut e = 0.0;
            for (j, &xj) in x.iter().enumerate() {
                let k = kernel.entry(points, i, j);
                s += k * xj;
                e += k * k;
            }
            (s, e)
        })
        .collect();
    let frob = rows.iter().map(|r| r.1).sum::<f64>().sqrt();
    (rows.into_iter().map(|r| r.0).collect(), frob)
}

/// `||H x - b|| / (||H||_F ||x||)` from a precomputed dense reference.
pub fn backward_error_from(hx: &[f64], frob: f64, x: &[f64], b: &[f64]) -> f64 {
    let num = hx.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if num == 0.0 {
        return 0.0;
    }
    num / (frob * xn)
}

/// `||H x - b||_2 / (||H||_F ||x||_2)` with `H x` formed densely.
pub fn backward_error(kernel: &KernelSpec, points: &PointSet, x: &[f64], b: &[f64]) -> f64 {
    let (hx, frob) = dense_reference(kernel, points, x);
    backward_error_from(&hx, frob, x, b)
}

/// Writes a vector as a single CSV column with the given header.
pub fn write_vector_csv(path: &Path, header: &str, v: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([header])?;
    for x in v {
        w.write_record([x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the first column of a CSV file with a header row.
pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut v = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = rec.get(0).unwrap_or("");
        v.push(f.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("{f:?} is not a number")))?);
    }
    Ok(v)
}
