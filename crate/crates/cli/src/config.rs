//! Flat `key = value` experiment configuration.
//!
//! One entry per line; `#` starts a comment; blank lines are ignored. Lists
//! are comma separated. Keys not listed in [`KEYS`] are rejected, as are
//! repeated keys within one file. Command-line `--set key=value` overrides
//! are applied on top of the file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hhmat::geometry::{AdmissibilityMode, TreeDepth};
use hhmat::kernels::{KernelKind, PointDistribution};
use hhmat::StorageMode;

pub const KEYS: &[&str] = &[
    "kernel",
    "distribution",
    "points_csv",
    "dim",
    "n",
    "seed",
    "n_max",
    "depth",
    "eta",
    "mode",
    "switch_level",
    "eps",
    "storage",
    "precisions",
    "matvec_working",
    "format_table",
    "subnormals",
    "vector",
    "vector_seed",
    "out",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwitchLevel {
    Auto,
    Fixed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorKind {
    Uniform,
    Zero,
}

#[derive(Clone, Debug)]
pub struct Config {
    pub kernel: KernelKind,
    pub distribution: PointDistribution,
    pub points_csv: Option<PathBuf>,
    pub dim: usize,
    pub n: usize,
    pub seed: u64,
    pub depth: TreeDepth,
    pub eta: Option<f64>,
    pub mode: AdmissibilityMode,
    pub switch_level: SwitchLevel,
    /// Ascending, deduplicated.
    pub eps: Vec<f64>,
    pub storage: StorageMode,
    pub precisions: Vec<String>,
    pub matvec_working: Vec<String>,
    pub format_table: Option<PathBuf>,
    pub subnormals: bool,
    pub vector: VectorKind,
    pub vector_seed: u64,
    pub out: PathBuf,
}

pub fn parse_text(text: &str, origin: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = split_entry(line).map_err(|e| format!("{origin}:{}: {e}", no + 1))?;
        if map.insert(k.clone(), v).is_some() {
            return Err(format!("{origin}:{}: key {k} given twice", no + 1));
        }
    }
    Ok(map)
}

pub fn split_entry(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key = value, got {s:?}"))?;
    let k = k.trim();
    if !KEYS.contains(&k) {
        return Err(format!("unknown key {k:?}"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

impl Config {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, String> {
        let mut map = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                parse_text(&text, &p.display().to_string())?
            }
            None => BTreeMap::new(),
        };
        for o in overrides {
            let (k, v) = split_entry(o)?;
            map.insert(k, v);
        }
        Self::from_map(&map)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, String> {
        let get = |k: &str| map.get(k).map(String::as_str);
        let kernel = match get("kernel") {
            Some(v) => KernelKind::from_name(v).ok_or_else(|| format!("kernel: unknown kernel {v:?}"))?,
            None => KernelKind::LogR,
        };
        let distribution = match get("distribution") {
            Some(v) => PointDistribution::from_name(v).ok_or_else(|| format!("distribution: unknown distribution {v:?}"))?,
            None => PointDistribution::CubeUniform,
        };
        let dim = get("dim").map(|v| num("dim", v)).transpose()?.unwrap_or(2);
        if dim == 0 {
            return Err("dim must be positive".into());
        }
        let n = get("n").map(|v| num("n", v)).transpose()?.unwrap_or(1024);
        let seed: u64 = get("seed").map(|v| num("seed", v)).transpose()?.unwrap_or(0);
        let depth = match (get("n_max"), get("depth")) {
            (Some(_), Some(_)) => return Err("give n_max or depth, not both".into()),
            (None, Some(v)) => TreeDepth::Depth(num("depth", v)?),
            (Some(v), None) => TreeDepth::LeafCapacity(num("n_max", v)?),
            (None, None) => TreeDepth::LeafCapacity(32),
        };
        if depth == TreeDepth::LeafCapacity(0) {
            return Err("n_max must be positive".into());
        }
        let eta = get("eta").map(|v| num::<f64>("eta", v)).transpose()?;
        if eta.is_some_and(|e| !(e > 0.0 && e.is_finite())) {
            return Err("eta must be positive".into());
        }
        let mode = match get("mode").unwrap_or("hybrid") {
            "hybrid" => AdmissibilityMode::Hybrid,
            "standard" => AdmissibilityMode::Standard,
            "weak" => AdmissibilityMode::Weak,
            v => return Err(format!("mode: expected hybrid, standard or weak, got {v:?}")),
        };
        let switch_level = match get("switch_level").unwrap_or("auto") {
            "auto" => SwitchLevel::Auto,
            v => SwitchLevel::Fixed(num("switch_level", v)?),
        };
        let mut eps = match get("eps") {
            Some(v) => list(v).iter().map(|e| num::<f64>("eps", e)).collect::<Result<Vec<_>, _>>()?,
            None => vec![1e-6],
        };
        if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return Err("eps: need one or more values in (0, 1)".into());
        }
        eps.sort_by(f64::total_cmp);
        eps.dedup();
        let storage = match get("storage").unwrap_or("adaptive") {
            "adaptive" => StorageMode::Adaptive,
            "uniform" => StorageMode::Uniform,
            v => return Err(format!("storage: expected adaptive or uniform, got {v:?}")),
        };
        let precisions = list(get("precisions").unwrap_or("fp64,fp32,fp16,bf16,q43"));
        let matvec_working = list(get("matvec_working").unwrap_or("fp64,fp32,fp16,bf16"));
        if precisions.is_empty() || matvec_working.is_empty() {
            return Err("precisions and matvec_working must not be empty".into());
        }
        let subnormals = match get("subnormals").unwrap_or("true") {
            "true" => true,
            "false" => false,
            v => return Err(format!("subnormals: expected true or false, got {v:?}")),
        };
        let vector = match get("vector").unwrap_or("uniform") {
            "uniform" => VectorKind::Uniform,
            "zero" => VectorKind::Zero,
            v => return Err(format!("vector: expected uniform or zero, got {v:?}")),
        };
        let vector_seed = get("vector_seed").map(|v| num("vector_seed", v)).transpose()?.unwrap_or(seed.wrapping_add(1));
        Ok(Config {
            kernel,
            distribution,
            points_csv: get("points_csv").map(PathBuf::from),
            dim,
            n,
            seed,
            depth,
            eta,
            mode,
            switch_level,
            eps,
            storage,
            precisions,
            matvec_working,
            format_table: get("format_table").map(PathBuf::from),
            subnormals,
            vector,
            vector_seed,
            out: PathBuf::from(get("out").unwrap_or("out")),
        })
    }

    /// The resolved configuration in the input grammar, with every default
    /// spelled out.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        put("kernel", self.kernel.name().into());
        put("distribution", self.distribution.name().into());
        if let Some(p) = &self.points_csv {
            put("points_csv", p.display().to_string());
        }
        put("dim", self.dim.to_string());
        put("n", self.n.to_string());
        put("seed", self.seed.to_string());
        match self.depth {
            TreeDepth::LeafCapacity(c) => put("n_max", c.to_string()),
            TreeDepth::Depth(d) => put("depth", d.to_string()),
        }
        put("eta", crate::output::num(self.eta_for(self.dim)));
        put(
            "mode",
            match self.mode {
                AdmissibilityMode::Hybrid => "hybrid",
                AdmissibilityMode::Standard => "standard",
                AdmissibilityMode::Weak => "weak",
            }
            .into(),
        );
        put(
            "switch_level",
            match self.switch_level {
                SwitchLevel::Auto => "auto".into(),
                SwitchLevel::Fixed(l) => l.to_string(),
            },
        );
        put("eps", self.eps.iter().map(|e| crate::output::num(*e)).collect::<Vec<_>>().join(","));
        put("storage", if self.storage == StorageMode::Adaptive { "adaptive" } else { "uniform" }.into());
        put("precisions", self.precisions.join(","));
        put("matvec_working", self.matvec_working.join(","));
        if let Some(p) = &self.format_table {
            put("format_table", p.display().to_string());
        }
        put("subnormals", self.subnormals.to_string());
        put("vector", if self.vector == VectorKind::Zero { "zero" } else { "uniform" }.into());
        put("vector_seed", self.vector_seed.to_string());
        put("out", self.out.display().to_string());
        s
    }

    /// `eta`, defaulting to `sqrt(d)` for the point dimension in use.
    pub fn eta_for(&self, dim: usize) -> f64 {
        self.eta.unwrap_or((dim as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = Config::load(None, &["eps = 1e-2, 1e-6,1e-2".into(), "dim=3".into()]).unwrap();
        assert_eq!(c.eps, vec![1e-6, 1e-2]);
        assert_eq!(c.dim, 3);
        assert_eq!(c.switch_level, SwitchLevel::Auto);
        assert_eq!(c.vector_seed, 1);
        assert!((c.eta_for(3) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn echo_reparses_to_the_same_config() {
        let c = Config::load(None, &["kernel=inv_r".into(), "depth=2".into(), "switch_level=1".into()]).unwrap();
        let again = Config::from_map(&parse_text(&c.echo(), "echo").unwrap()).unwrap();
        assert_eq!(again.echo(), c.echo());
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(parse_text("kernel = log_r\nkernel = inv_r\n", "t").is_err());
        assert!(parse_text("colour = red\n", "t").is_err());
        assert!(parse_text("just words\n", "t").is_err());
        for bad in ["eps=0", "eps=2", "mode=strong", "kernel=sinc", "dim=0", "n_max=0", "eta=-1", "subnormals=yes"] {
            assert!(Config::load(None, &[bad.into()]).is_err(), "{bad}");
        }
        assert!(Config::load(None, &["n_max=4".into(), "depth=2".into()]).is_err());
    }
}
