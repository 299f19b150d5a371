//! Kernel functions, point samplers and block assembly.
//!
//! Points are drawn from `Xoshiro256PlusPlus` seeded through
//! `seed_from_u64` (SplitMix64 expansion). A uniform variate is
//! `(next_u64() >> 11) * 2^-53`; normal variates use the Box-Muller
//! transform, producing pairs consumed in order.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::Array2;
use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{invalid, Error, Result};
use crate::geometry::{HyperBox, PointSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// `log r`
    LogR,
    /// `1 / r`
    InvR,
    /// `1 / r^2`
    InvR2,
    /// `exp(-r^2 / 2)`
    Gaussian,
    /// `exp(-r)`
    Matern,
}

impl KernelKind {
    pub const ALL: [KernelKind; 5] =
        [KernelKind::LogR, KernelKind::InvR, KernelKind::InvR2, KernelKind::Gaussian, KernelKind::Matern];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::LogR => "log_r",
            KernelKind::InvR => "inv_r",
            KernelKind::InvR2 => "inv_r2",
            KernelKind::Gaussian => "gaussian",
            KernelKind::Matern => "matern",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// A radial kernel. Singular kernels have a zero diagonal: the entry for a
/// point paired with itself (same index) is 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct KernelSpec {
    pub kind: KernelKind,
}

impl KernelSpec {
    pub fn new(kind: KernelKind) -> Self {
        KernelSpec { kind }
    }

    pub fn singular(&self) -> bool {
        matches!(self.kind, KernelKind::LogR | KernelKind::InvR | KernelKind::InvR2)
    }

    /// Kernel profile as a function of distance.
    pub fn eval(&self, r: f64) -> f64 {
        match self.kind {
            KernelKind::LogR => r.ln(),
            KernelKind::InvR => 1.0 / r,
            KernelKind::InvR2 => 1.0 / (r * r),
            KernelKind::Gaussian => (-0.5 * r * r).exp(),
            KernelKind::Matern => (-r).exp(),
        }
    }

    /// Entry `(i, j)` of the kernel matrix.
    pub fn entry(&self, points: &PointSet, i: usize, j: usize) -> f64 {
        if i == j && self.singular() {
            return 0.0;
        }
        self.eval(distance(points.point(i), points.point(j)))
    }
}

/// Kernel value for a pair of points; `same_index` marks a diagonal entry.
pub fn kernel_entry(spec: &KernelSpec, x: &[f64], y: &[f64], same_index: bool) -> f64 {
    if same_index && spec.singular() {
        return 0.0;
    }
    spec.eval(distance(x, y))
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// The `|rows| x |cols|` block `K(x_i, x_j)` for `i` in `rows`, `j` in `cols`.
pub fn assemble_block(spec: &KernelSpec, points: &PointSet, rows: &[usize], cols: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), cols.len()), |(a, b)| spec.entry(points, rows[a], cols[b]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointDistribution {
    /// Uniform in `[-1, 1]^d`.
    CubeUniform,
    /// Uniform on the unit sphere `S^{d-1}`, via normalized Gaussian vectors.
    SphereSurface,
}

impl PointDistribution {
    pub fn name(self) -> &'static str {
        match self {
            PointDistribution::CubeUniform => "cube_uniform",
            PointDistribution::SphereSurface => "sphere_surface",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [PointDistribution::CubeUniform, PointDistribution::SphereSurface].into_iter().find(|d| d.name() == s)
    }
}

/// Uniform variates and Box-Muller normals from one seeded stream.
pub struct Sampler {
    rng: Xoshiro256PlusPlus,
    spare: Option<f64>,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler { rng: Xoshiro256PlusPlus::seed_from_u64(seed), spare: None }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

/// Draws `n` points. Both distributions use `[-1, 1]^d` as the tree root box.
pub fn sample_points(dist: PointDistribution, n: usize, dim: usize, seed: u64) -> Result<PointSet> {
    if n == 0 || dim == 0 {
        return invalid("need at least one point in at least one dimension");
    }
    let mut s = Sampler::new(seed);
    let mut coords = Vec::with_capacity(n * dim);
    match dist {
        PointDistribution::CubeUniform => {
            for _ in 0..n * dim {
                coords.push(2.0 * s.uniform() - 1.0);
            }
        }
        PointDistribution::SphereSurface => {
            if dim < 2 {
                return invalid("sphere sampling needs at least two dimensions");
            }
            let mut x = vec![0.0; dim];
            for _ in 0..n {
                loop {
                    x.iter_mut().for_each(|v| *v = s.normal());
                    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        coords.extend(x.iter().map(|v| (v / norm).clamp(-1.0, 1.0)));
                        break;
                    }
                }
            }
        }
    }
    PointSet::with_bounding_box(dim, coords, HyperBox::unit_cube(dim))
}

/// Writes one point per row with header `x0,x1,...`, using shortest
/// round-trip decimals.
pub fn write_points_csv(path: &Path, points: &PointSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..points.dim()).map(|k| format!("x{k}")))?;
    for i in 0..points.len() {
        w.write_record(points.point(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_points_csv`]. The root box is the tight
/// bounding cube of the points.
pub fn read_points_csv(path: &Path) -> Result<PointSet> {
    let mut r = csv::Reader::from_path(path)?;
    let dim = r.headers()?.len();
    let mut coords = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != dim {
            return invalid(format!("row with {} fields, expected {dim}", rec.len()));
        }
        for f in rec.iter() {
            coords.push(f.trim().parse::<f64>().map_err(|_| Error::InvalidInput(format!("{f:?} is not a number")))?);
        }
    }
    PointSet::new(dim, coords)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_diagonal_is_zero() {
        let ps = PointSet::new(2, vec![0.0, 0.0, 3.0, 4.0, 0.0, 0.0]).unwrap();
        let k = KernelSpec::new(KernelKind::InvR);
        assert_eq!(k.entry(&ps, 0, 0), 0.0);
        assert_eq!(k.entry(&ps, 0, 1), 0.2);
        assert!(k.entry(&ps, 0, 2).is_infinite());
        let g = KernelSpec::new(KernelKind::Gaussian);
        assert_eq!(g.entry(&ps, 1, 1), 1.0);
        assert_eq!(KernelSpec::new(KernelKind::LogR).entry(&ps, 0, 1), 5f64.ln());
        assert_eq!(KernelSpec::new(KernelKind::InvR2).eval(2.0), 0.25);
        assert_eq!(KernelSpec::new(KernelKind::Matern).eval(0.0), 1.0);
        assert!(!KernelSpec::new(KernelKind::Matern).singular());
    }

    #[test]
    fn block_is_symmetric() {
        let ps = sample_points(PointDistribution::CubeUniform, 20, 3, 1).unwrap();
        let ids: Vec<usize> = (0..20).collect();
        let a = assemble_block(&KernelSpec::new(KernelKind::LogR), &ps, &ids, &ids);
        assert_eq!(a, a.t());
        assert!((0..20).all(|i| a[[i, i]] == 0.0));
    }

    #[test]
    fn samplers() {
        let a = sample_points(PointDistribution::SphereSurface, 100, 3, 7).unwrap();
        assert_eq!(a, sample_points(PointDistribution::SphereSurface, 100, 3, 7).unwrap());
        for i in 0..100 {
            let r: f64 = a.point(i).iter().map(|v| v * v).sum();
            assert!((r - 1.0).abs() < 1e-14);
        }
        let c = sample_points(PointDistribution::CubeUniform, 1000, 2, 7).unwrap();
        assert!(c.coords().iter().all(|v| (-1.0..1.0).contains(v)));
        let mean = c.coords().iter().sum::<f64>() / 2000.0;
        assert!(mean.abs() < 0.05);
        assert!(sample_points(PointDistribution::SphereSurface, 3, 1, 0).is_err());
    }

    #[test]
    fn normals_have_unit_variance() {
        let mut s = Sampler::new(3);
        let z: Vec<f64> = (0..20000).map(|_| s.normal()).collect();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / z.len() as f64;
        assert!(mean.abs() < 0.03 && (var - 1.0).abs() < 0.05);
    }

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("hhmat-points-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("p.csv");
        let a = sample_points(PointDistribution::CubeUniform, 50, 3, 11).unwrap();
        write_points_csv(&path, &a).unwrap();
        let b = read_points_csv(&path).unwrap();
        assert_eq!(a.coords(), b.coords());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
