mod common;

use common::round_oracle;
use hhmat::precision::{builtin_formats, round_to_format, FpFormat};
use proptest::prelude::*;
use proptest::strategy::ValueTree;

fn formats() -> Vec<FpFormat> {
    let mut v = builtin_formats();
    v.push(FpFormat::fp16().with_subnormals(false));
    v.push(FpFormat::bf16().with_subnormals(false));
    v
}

fn value_in_range(f: &FpFormat) -> impl Strategy<Value = f64> {
    let lo = f.e_min - f.mantissa_bits as i32 - 3;
    let hi = f.e_max + 2;
    (any::<bool>(), lo..=hi, 0.0f64..1.0).prop_map(|(neg, e, t)| {
        let x = (1.0 + t) * 2f64.powi(e);
        if neg {
            -x
        } else {
            x
        }
    })
}

/// Midpoint between `r` and the next representable value away from zero.
fn tie_above(r: f64, f: &FpFormat) -> f64 {
    let a = r.abs();
    let e = a.log2().floor() as i32;
    let q = 2f64.powi(e.max(f.e_min) - f.mantissa_bits as i32);
    (a + q / 2.0).copysign(r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn library_matches_integer_oracle(x in any::<f64>()) {
        for f in formats() {
            let a = round_to_format(x, &f);
            let b = round_oracle(x, &f);
            prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()), "{} {x:e}: {a:e} vs {b:e}", f.name);
        }
    }

    #[test]
    fn rounding_is_idempotent_odd_and_monotone(x in -1e6f64..1e6, y in -1e6f64..1e6) {
        for f in formats() {
            let r = round_to_format(x, &f);
            prop_assert_eq!(round_to_format(r, &f).to_bits(), r.to_bits());
            prop_assert_eq!(round_to_format(-x, &f).to_bits(), (-r).to_bits());
            if x <= y {
                prop_assert!(r <= round_to_format(y, &f));
            }
        }
    }

    #[test]
    fn relative_error_within_unit_roundoff(x in 1e-4f64..6e4) {
        for f in [FpFormat::fp32(), FpFormat::fp16(), FpFormat::bf16()] {
            let r = round_to_format(x, &f);
            prop_assert!(((r - x) / x).abs() <= f.unit_roundoff);
        }
    }
}

#[test]
fn single_precision_agrees_with_host_cast() {
    let f = FpFormat::fp32();
    let mut state = 0x9e3779b97f4a7c15u64;
    for _ in 0..100_000 {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let x = f64::from_bits(state);
        if !x.is_finite() {
            continue;
        }
        let host = x as f32 as f64;
        assert_eq!(round_to_format(x, &f).to_bits(), host.to_bits(), "{x:e}");
    }
}

#[test]
fn ties_and_range_edges() {
    for f in formats() {
        let runner = value_in_range(&f);
        let mut rng = proptest::test_runner::TestRunner::deterministic();
        for _ in 0..5000 {
            let x = runner.new_tree(&mut rng).unwrap().current();
            let r = round_to_format(x, &f);
            if r.is_finite() && r != 0.0 && r.abs() < f.x_max {
                let t = tie_above(r, &f);
                assert_eq!(round_to_format(t, &f).to_bits(), round_oracle(t, &f).to_bits(), "{} tie {t:e}", f.name);
            }
        }
        assert_eq!(round_to_format(f.x_max, &f), f.x_max);
        assert_eq!(round_to_format(f.x_max * 2.0, &f), f64::INFINITY);
        assert_eq!(round_to_format(f.x_min, &f), f.x_min);
    }
    assert_eq!(round_to_format(70000.0, &FpFormat::fp16()), f64::INFINITY);
    // 65520 is the midpoint between 65504 and 65536; ties to even overflow.
    assert_eq!(round_to_format(65519.0, &FpFormat::fp16()), 65504.0);
    assert_eq!(round_to_format(65520.0, &FpFormat::fp16()), f64::INFINITY);
}
