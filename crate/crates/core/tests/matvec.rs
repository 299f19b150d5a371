mod common;

use common::round_oracle;
use hhmat::geometry::{AdmissibilityConfig, ClusterTree, TreeDepth};
use hhmat::kernels::{assemble_block, sample_points, KernelKind, KernelSpec, PointDistribution};
use hhmat::matvec::{backward_error, dense_reference, Emulation};
use hhmat::precision::{FpFormat, PrecisionConfig};
use hhmat::{matvec, HhMatrix, MatvecConfig, PointSet};

fn problem(kind: KernelKind, dim: usize, n: usize, n_max: usize, switch: usize, eps: f64) -> (KernelSpec, PointSet, HhMatrix) {
    let points = sample_points(PointDistribution::CubeUniform, n, dim, 21).unwrap();
    let tree = ClusterTree::build(&points, TreeDepth::LeafCapacity(n_max)).unwrap();
    let cfg = AdmissibilityConfig::hybrid((dim as f64).sqrt(), switch.min(tree.depth()), tree.depth()).unwrap();
    let kernel = KernelSpec::new(kind);
    let h = HhMatrix::build_uniform(&kernel, &points, &tree, &cfg, eps).unwrap();
    (kernel, points, h)
}

fn test_vector(n: usize) -> Vec<f64> {
    (0..n).map(|i| ((i * 7919) % 1000) as f64 / 1000.0).collect()
}

#[test]
fn native_product_matches_dense_assembly() {
    let (_, _, h) = problem(KernelKind::InvR, 3, 700, 20, 1, 1e-8);
    let x = test_vector(h.n());
    let b = matvec(&h, &x, &MatvecConfig::native()).unwrap();
    let d = h.to_dense().dot(&ndarray::Array1::from(x.clone()));
    let scale: f64 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff: f64 = b.iter().zip(d.iter()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    assert!(diff <= 1e-13 * scale, "{diff:e}");
}

#[test]
fn emulated_binary64_equals_native() {
    let (_, _, h) = problem(KernelKind::LogR, 2, 500, 16, 1, 1e-6);
    let x = test_vector(h.n());
    let a = matvec(&h, &x, &MatvecConfig::native()).unwrap();
    let b = matvec(&h, &x, &MatvecConfig::emulated(FpFormat::fp64())).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_vector_gives_zero() {
    let (_, _, h) = problem(KernelKind::Gaussian, 2, 300, 16, 1, 1e-6);
    for cfg in [MatvecConfig::native(), MatvecConfig::emulated(FpFormat::fp16()), MatvecConfig::emulated(FpFormat::q43())] {
        assert!(matvec(&h, &vec![0.0; h.n()], &cfg).unwrap().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn per_op_rounding_matches_sequential_oracle() {
    // Depth zero: a single dense block, so the product is a plain sequential
    // dot product per row.
    let points = sample_points(PointDistribution::CubeUniform, 40, 2, 4).unwrap();
    let tree = ClusterTree::build(&points, TreeDepth::Depth(0)).unwrap();
    let kernel = KernelSpec::new(KernelKind::Matern);
    let cfg = AdmissibilityConfig::hybrid(1.0, 0, 0).unwrap();
    let h = HhMatrix::build_uniform(&kernel, &points, &tree, &cfg, 1e-8).unwrap();
    let ids: Vec<usize> = (0..40).collect();
    let a = assemble_block(&kernel, &points, &ids, &ids);
    let x = test_vector(40);
    for f in [FpFormat::fp32(), FpFormat::fp16(), FpFormat::bf16()] {
        let b = matvec(&h, &x, &MatvecConfig::emulated(f.clone())).unwrap();
        for i in 0..40 {
            let mut y = 0.0;
            for j in 0..40 {
                let p = round_oracle(round_oracle(a[[i, j]], &f) * round_oracle(x[j], &f), &f);
                y = round_oracle(y + p, &f);
            }
            assert_eq!(b[i].to_bits(), y.to_bits(), "{} row {i}", f.name);
        }
    }
}

#[test]
fn low_precision_error_grows() {
    let (kernel, points, h) = problem(KernelKind::InvR, 3, 800, 20, 1, 1e-10);
    let x = test_vector(h.n());
    let (hx, frob) = dense_reference(&kernel, &points, &x);
    let err = |f: FpFormat| {
        let cfg = MatvecConfig::emulated(f);
        hhmat::matvec::backward_error_from(&hx, frob, &x, &matvec(&h, &x, &cfg).unwrap())
    };
    let e64 = err(FpFormat::fp64());
    let e32 = err(FpFormat::fp32());
    let e16 = err(FpFormat::fp16());
    assert!(e64 < 1e-9 && e64 < e32 && e32 < e16, "{e64:e} {e32:e} {e16:e}");
    assert!(e16 > 1e-4 && e16 < 1e-1);
    let direct = backward_error(&kernel, &points, &x, &matvec(&h, &x, &MatvecConfig::native()).unwrap());
    assert_eq!(direct, e64);
}

#[test]
fn adaptive_storage_in_native_arithmetic() {
    let (kernel, points, h) = problem(KernelKind::LogR, 2, 600, 16, 2, 1e-4);
    let a = h.to_adaptive(&PrecisionConfig::standard()).unwrap();
    let x = test_vector(h.n());
    let e = backward_error(&kernel, &points, &x, &matvec(&a, &x, &MatvecConfig::native()).unwrap());
    assert!(e <= 1e-3, "{e:e}");
}

#[test]
fn rejects_bad_inputs() {
    let (_, _, h) = problem(KernelKind::LogR, 2, 100, 16, 1, 1e-6);
    assert!(matvec(&h, &[1.0; 3], &MatvecConfig::native()).is_err());
    let mut x = vec![0.0; h.n()];
    x[5] = f64::NAN;
    assert!(matvec(&h, &x, &MatvecConfig::native()).is_err());
    assert!(MatvecConfig::new(FpFormat::fp32(), Emulation::Native).is_err());
    assert!(MatvecConfig::new(FpFormat::fp64(), Emulation::Native).is_ok());
}

#[test]
fn overflow_surfaces_as_infinity() {
    let points = sample_points(PointDistribution::CubeUniform, 64, 2, 9).unwrap();
    let tree = ClusterTree::build(&points, TreeDepth::Depth(1)).unwrap();
    let kernel = KernelSpec::new(KernelKind::InvR);
    let cfg = AdmissibilityConfig::hybrid(1.0, 0, 1).unwrap();
    let h = HhMatrix::build_uniform(&kernel, &points, &tree, &cfg, 1e-6).unwrap();
    let x = vec![200.0; 64];
    let b = matvec(&h, &x, &MatvecConfig::emulated(FpFormat::q43())).unwrap();
    assert!(b.iter().any(|v| !v.is_finite()));
}
