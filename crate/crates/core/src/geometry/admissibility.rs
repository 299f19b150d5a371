use super::Cluster;
use crate::error::{invalid, Result};

/// Relative slack when comparing `min(diam) <= eta * dist`, so that pairs
/// meeting the condition with equality are not split by rounding.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdmissibilityMode {
    Standard,
    Weak,
    Hybrid,
}

/// Admissibility parameters for a tree of depth `depth`. The switching level
/// `switch_level` lies in `0..=depth`; `Standard` fixes it at `depth` and
/// `Weak` at zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmissibilityConfig {
    pub eta: f64,
    pub mode: AdmissibilityMode,
    pub switch_level: usize,
    pub depth: usize,
}

impl AdmissibilityConfig {
    pub fn new(eta: f64, mode: AdmissibilityMode, switch_level: usize, depth: usize) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return invalid(format!("eta must be positive and finite, got {eta}"));
        }
        if switch_level > depth {
            return invalid(format!("switching level {switch_level} exceeds tree depth {depth}"));
        }
        let switch_level = match mode {
            AdmissibilityMode::Standard => depth,
            AdmissibilityMode::Weak => 0,
            AdmissibilityMode::Hybrid => switch_level,
        };
        Ok(AdmissibilityConfig { eta, mode, switch_level, depth })
    }

    pub fn standard(eta: f64, depth: usize) -> Result<Self> {
        Self::new(eta, AdmissibilityMode::Standard, depth, depth)
    }

    pub fn weak(depth: usize) -> Self {
        AdmissibilityConfig { eta: 1.0, mode: AdmissibilityMode::Weak, switch_level: 0, depth }
    }

    pub fn hybrid(eta: f64, switch_level: usize, depth: usize) -> Result<Self> {
        Self::new(eta, AdmissibilityMode::Hybrid, switch_level, depth)
    }
}

fn same_level(a: &Cluster, b: &Cluster) {
    assert_eq!(a.level, b.level, "admissibility is only defined for clusters on one level");
}

/// `min(diam(a), diam(b)) <= eta * dist(a, b)` on the cluster boxes.
pub fn adm_standard(a: &Cluster, b: &Cluster, eta: f64) -> bool {
    same_level(a, b);
    let d = a.bbox.diam().min(b.bbox.diam());
    d <= eta * a.bbox.dist(&b.bbox) * (1.0 + TIE_TOLERANCE)
}

/// Every pair of distinct clusters is admissible.
pub fn adm_weak(a: &Cluster, b: &Cluster) -> bool {
    same_level(a, b);
    a.index != b.index
}

/// Standard admissibility above the switching level, weak below it. On the
/// switching level itself neighbors also become admissible, unless it is the
/// leaf level, where the standard condition is kept.
pub fn adm_hybrid(a: &Cluster, b: &Cluster, cfg: &AdmissibilityConfig) -> bool {
    same_level(a, b);
    let l = a.level;
    let sw = cfg.switch_level;
    if l < sw || (l == sw && sw == cfg.depth) {
        adm_standard(a, b, cfg.eta)
    } else if l == sw {
        a.index != b.index
    } else {
        adm_weak(a, b)
    }
}

/// Upper bounds on the interaction, neighbor and sibling list sizes:
/// `c_far = (2^d - 1)(1 + 2 sqrt(d)/eta)^d`, `c_near = (1 + 2 sqrt(d)/eta)^d - 1`
/// and `c_weak = 2^d - 1`. They hold for `eta <= sqrt(d)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparsityBounds {
    pub c_far: f64,
    pub c_near: f64,
    pub c_weak: f64,
}

pub fn sparsity_bounds(dim: usize, eta: f64) -> SparsityBounds {
    let d = dim as f64;
    let base = (1.0 + 2.0 * d.sqrt() / eta).powi(dim as i32);
    let c_weak = (2f64).powi(dim as i32) - 1.0;
    SparsityBounds { c_far: c_weak * base, c_near: base - 1.0, c_weak }
}
