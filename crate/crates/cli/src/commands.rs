use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use hhmat::geometry::{AdmissibilityConfig, AdmissibilityMode};
use hhmat::hmatrix::{error_bound, optimal_switch_level, save, to_words, StorageReport};
use hhmat::kernels::{read_points_csv, sample_points, Sampler};
use hhmat::matvec::{backward_error_from, dense_reference};
use hhmat::precision::{builtin_formats, load_format_table, FpFormat, PrecisionConfig};
use hhmat::{matvec, ClusterTree, HhMatrix, KernelSpec, MatvecConfig, PointSet, StorageMode};

use crate::config::{Config, SwitchLevel, VectorKind};
use crate::output::{num, write_manifest, Table};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    /// Overflow to infinity in stored blocks. Outputs are still written.
    Numerical(String),
    Lib(hhmat::Error),
    Csv(csv::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use hhmat::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Lib(E::InvalidInput(_) | E::DepthOverflow { .. } | E::AccuracyBelowRoundoff { .. } | E::FormatTable(_)) => 2,
            CliError::Numerical(_) => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Csv(e) => write!(f, "csv: {e}"),
            CliError::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl From<hhmat::Error> for CliError {
    fn from(e: hhmat::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Csv(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub struct Setup {
    pub cfg: Config,
    pub kernel: KernelSpec,
    pub points: PointSet,
    pub tree: ClusterTree,
    pub eta: f64,
    pub precision: PrecisionConfig,
    pub working: Vec<FpFormat>,
}

fn registry(cfg: &Config) -> CliResult<Vec<FpFormat>> {
    let mut formats = builtin_formats();
    if let Some(p) = &cfg.format_table {
        for f in load_format_table(p)? {
            if formats.iter().any(|g| g.name == f.name) {
                return Err(CliError::Config(format!("format table redefines {}", f.name)));
            }
            formats.push(f);
        }
    }
    Ok(formats.into_iter().map(|f| f.with_subnormals(cfg.subnormals)).collect())
}

fn lookup(reg: &[FpFormat], names: &[String], key: &str) -> CliResult<Vec<FpFormat>> {
    names
        .iter()
        .map(|n| reg.iter().find(|f| &f.name == n).cloned().ok_or_else(|| CliError::Config(format!("{key}: unknown format {n}"))))
        .collect()
}

impl Setup {
    pub fn new(cfg: Config) -> CliResult<Self> {
        let points = match &cfg.points_csv {
            Some(p) => read_points_csv(p)?,
            None => sample_points(cfg.distribution, cfg.n, cfg.dim, cfg.seed)?,
        };
        let tree = ClusterTree::build(&points, cfg.depth)?;
        let reg = registry(&cfg)?;
        let fp64 = reg.iter().find(|f| f.name == "fp64").cloned().unwrap();
        let precision = PrecisionConfig::new(fp64, lookup(&reg, &cfg.precisions, "precisions")?)?;
        let working = lookup(&reg, &cfg.matvec_working, "matvec_working")?;
        let eta = cfg.eta_for(points.dim());
        Ok(Setup { kernel: KernelSpec::new(cfg.kernel), points, tree, eta, precision, working, cfg })
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    fn admissibility(&self, switch: usize) -> CliResult<AdmissibilityConfig> {
        Ok(match self.cfg.mode {
            AdmissibilityMode::Standard => AdmissibilityConfig::standard(self.eta, self.depth())?,
            AdmissibilityMode::Weak => AdmissibilityConfig::weak(self.depth()),
            AdmissibilityMode::Hybrid => AdmissibilityConfig::hybrid(self.eta, switch, self.depth())?,
        })
    }

    fn hybrid(&self, switch: usize) -> CliResult<AdmissibilityConfig> {
        Ok(AdmissibilityConfig::hybrid(self.eta, switch, self.depth())?)
    }

    /// Uniform matrices for every configured `eps`, built once at the
    /// smallest and re-truncated.
    fn uniform_sweep(&self, adm: &AdmissibilityConfig) -> CliResult<Vec<HhMatrix>> {
        let fine = HhMatrix::build_uniform(&self.kernel, &self.points, &self.tree, adm, self.cfg.eps[0])?;
        let mut out = Vec::with_capacity(self.cfg.eps.len());
        for &e in &self.cfg.eps[1..] {
            out.push(fine.retruncate(e)?);
        }
        out.insert(0, fine);
        Ok(out)
    }

    fn store(&self, h: &HhMatrix) -> CliResult<HhMatrix> {
        Ok(match self.cfg.storage {
            StorageMode::Adaptive => h.to_adaptive(&self.precision)?,
            StorageMode::Uniform => h.clone(),
        })
    }

    fn bound(&self, switch: usize, eps: f64) -> f64 {
        error_bound(self.points.dim(), self.eta, self.depth(), switch, eps)
    }

    /// Switching level for the configured mode, searching when it is `auto`.
    fn switch_level(&self, search: &mut Option<Table>) -> CliResult<usize> {
        let depth = self.depth();
        match (self.cfg.mode, self.cfg.switch_level) {
            (AdmissibilityMode::Standard, _) => Ok(depth),
            (AdmissibilityMode::Weak, _) => Ok(0),
            (AdmissibilityMode::Hybrid, SwitchLevel::Fixed(l)) if l > depth => {
                Err(CliError::Config(format!("switch_level {l} exceeds tree depth {depth}")))
            }
            (AdmissibilityMode::Hybrid, SwitchLevel::Fixed(l)) => Ok(l),
            (AdmissibilityMode::Hybrid, SwitchLevel::Auto) => {
                let (l, table) = self.search()?;
                *search = Some(table);
                Ok(l)
            }
        }
    }

    /// Switching-level search on uniform fp64 storage at the smallest
    /// configured `eps`. `S2(l)` is only assembled for the levels the search
    /// visits.
    pub fn search(&self) -> CliResult<(usize, Table)> {
        let depth = self.depth();
        let eps = self.cfg.eps[0];
        let build = |l: usize| -> CliResult<StorageReport> {
            Ok(HhMatrix::build_uniform(&self.kernel, &self.points, &self.tree, &self.hybrid(l)?, eps)?.storage_report())
        };
        let s1 = build(depth)?.s1_profile().expect("leaf-level switch has S1");
        let s1f: Vec<f64> = s1.iter().map(|&b| b as f64).collect();
        let mut s2 = BTreeMap::new();
        let best = optimal_switch_level(&s1f, |l| -> CliResult<f64> {
            let bits = if l == depth { s1[depth] } else { build(l)?.s2 };
            s2.insert(l, bits);
            Ok(bits as f64)
        })?;
        let mut t = Table::new("switch_level.csv");
        for (l, &a) in s1.iter().enumerate() {
            let (b, saving) = match s2.get(&l) {
                Some(&b) => (b.to_string(), (a as i128 - b as i128).to_string()),
                None => (String::new(), String::new()),
            };
            t.row(vec![l.to_string(), a.to_string(), b, saving, u8::from(l == best).to_string()]);
        }
        Ok((best, t))
    }
}

fn prepare_out(cfg: &Config) -> CliResult<()> {
    std::fs::create_dir_all(&cfg.out)?;
    std::fs::write(cfg.out.join("config.txt"), cfg.echo())?;
    Ok(())
}

fn finish(dir: &Path, files: &[&str], overflowed: usize) -> CliResult<()> {
    let mut all = vec!["config.txt"];
    all.extend_from_slice(files);
    write_manifest(dir, &all)?;
    if overflowed > 0 {
        return Err(CliError::Numerical(format!("{overflowed} stored blocks overflowed to infinity")));
    }
    Ok(())
}

pub fn build(s: &Setup) -> CliResult<()> {
    if s.cfg.eps.len() != 1 {
        return Err(CliError::Config("build takes a single eps".into()));
    }
    prepare_out(&s.cfg)?;
    let mut search = None;
    let sw = s.switch_level(&mut search)?;
    let eps = s.cfg.eps[0];
    let uniform = HhMatrix::build_uniform(&s.kernel, &s.points, &s.tree, &s.admissibility(sw)?, eps)?;
    let h = s.store(&uniform)?;
    let dir = &s.cfg.out;
    save(&h, &dir.join("matrix.hhm"))?;

    let mut blocks = Table::new("blocks.csv");
    for b in h.blocks() {
        blocks.row(vec![
            b.index.level.to_string(),
            b.index.row.to_string(),
            b.index.col.to_string(),
            b.kind.name().into(),
            b.rank().to_string(),
            h.formats()[b.format].name.clone(),
            num(b.xi),
            b.bits(h.formats()).to_string(),
        ]);
    }
    blocks.write(dir)?;

    let r = h.storage_report();
    let mut st = Table::new("storage.csv");
    let mut put = |q: String, bits: u64| st.row(vec![q, bits.to_string(), num(to_words(bits))]);
    put("total".into(), r.total_bits);
    put("l_common".into(), r.l_common);
    if let Some(s1) = r.s1 {
        put("s1".into(), s1);
    }
    put("s2".into(), r.s2);
    put("d_common".into(), r.d_common);
    put("dense".into(), r.dense_bits);
    put("finer_neighbor".into(), r.finer_neighbor_bits);
    put("finer_adjacent".into(), r.finer_adjacent_bits);
    put("leaf_neighbor".into(), r.leaf_neighbor_bits);
    for (l, &b) in r.far_field_bits_by_level.iter().enumerate() {
        put(format!("far_field_level_{l}"), b);
    }
    for (name, b) in &r.bits_by_format {
        put(format!("format_{name}"), *b);
    }
    st.write(dir)?;

    let mut files = vec!["matrix.hhm", "blocks.csv", "storage.csv"];
    if let Some(t) = search {
        t.write(dir)?;
        files.push("switch_level.csv");
    }
    println!(
        "build: n={} depth={} switch_level={sw} eps={} blocks={} total_bits={}",
        h.n(),
        s.depth(),
        num(eps),
        h.blocks().len(),
        r.total_bits
    );
    finish(dir, &files, h.overflowed_blocks().len())
}

pub fn error_sweep(s: &Setup) -> CliResult<()> {
    let depth = s.depth();
    if depth == 0 {
        return Err(CliError::Config("error sweep needs a tree of depth at least 1".into()));
    }
    prepare_out(&s.cfg)?;
    let mut t = Table::new("error_sweep.csv");
    let mut overflowed = 0;
    for (label, sw) in [("hh", depth - 1), ("hs", depth)] {
        let mats = s.uniform_sweep(&s.hybrid(sw)?)?;
        for (u, &eps) in mats.iter().zip(&s.cfg.eps) {
            let (eb1, eb2) = (s.bound(depth - 1, eps), s.bound(depth, eps));
            let a = u.to_adaptive(&s.precision)?;
            overflowed += a.overflowed_blocks().len();
            for (storage, h, bound) in [("uniform", u, eps), ("adaptive", &a, s.bound(sw, eps))] {
                let err = h.global_error(&s.kernel, &s.points);
                t.row(vec![num(eps), label.into(), sw.to_string(), storage.into(), num(err), num(bound), num(eb1), num(eb2)]);
            }
        }
    }
    t.write(&s.cfg.out)?;
    println!("error-sweep: {} eps values, depth={depth}", s.cfg.eps.len());
    finish(&s.cfg.out, &["error_sweep.csv"], overflowed)
}

pub fn storage_gains(s: &Setup) -> CliResult<()> {
    prepare_out(&s.cfg)?;
    let depth = s.depth();
    let mut search = None;
    let sw = match s.cfg.mode {
        AdmissibilityMode::Hybrid => s.switch_level(&mut search)?,
        _ => return Err(CliError::Config("storage gains compare hybrid storage; set mode = hybrid".into())),
    };
    let hh = s.uniform_sweep(&s.hybrid(sw)?)?;
    let hs = s.uniform_sweep(&s.hybrid(depth)?)?;
    let mut t = Table::new("storage_gains.csv");
    let mut overflowed = 0;
    for ((u, full), &eps) in hh.iter().zip(&hs).zip(&s.cfg.eps) {
        let a = u.to_adaptive(&s.precision)?;
        overflowed += a.overflowed_blocks().len();
        let amp = a.storage_report().total_bits;
        let ru = u.storage_report();
        let rs = full.storage_report();
        let s1 = rs.s1_at(sw).expect("leaf-level switch has S1");
        t.row(vec![
            num(eps),
            num(ru.total_bits as f64 / amp as f64),
            num(rs.total_bits as f64 / amp as f64),
            s1.to_string(),
            ru.s2.to_string(),
            num(s1 as f64 / ru.s2 as f64),
            amp.to_string(),
            ru.total_bits.to_string(),
            rs.total_bits.to_string(),
        ]);
    }
    t.write(&s.cfg.out)?;
    let mut files = vec!["storage_gains.csv"];
    if let Some(st) = search {
        st.write(&s.cfg.out)?;
        files.push("switch_level.csv");
    }
    println!("storage-gains: switch_level={sw} depth={depth}");
    finish(&s.cfg.out, &files, overflowed)
}

pub fn matvec_error(s: &Setup) -> CliResult<()> {
    prepare_out(&s.cfg)?;
    let mut search = None;
    let sw = s.switch_level(&mut search)?;
    let n = s.points.len();
    let x: Vec<f64> = match s.cfg.vector {
        VectorKind::Zero => vec![0.0; n],
        VectorKind::Uniform => {
            let mut rng = Sampler::new(s.cfg.vector_seed);
            (0..n).map(|_| rng.uniform()).collect()
        }
    };
    let (hx, frob) = dense_reference(&s.kernel, &s.points, &x);
    let mats = s.uniform_sweep(&s.admissibility(sw)?)?;
    let mut t = Table::new("matvec_error.csv");
    let mut overflowed = 0;
    let storage = if s.cfg.storage == StorageMode::Adaptive { "adaptive" } else { "uniform" };
    for (u, &eps) in mats.iter().zip(&s.cfg.eps) {
        let h = s.store(u)?;
        overflowed += h.overflowed_blocks().len();
        for w in &s.working {
            let mc = if w.is_binary64() { MatvecConfig::native() } else { MatvecConfig::emulated(w.clone()) };
            let b = matvec(&h, &x, &mc)?;
            let err = backward_error_from(&hx, frob, &x, &b);
            t.row(vec![num(eps), w.name.clone(), storage.into(), num(err), num(s.bound(sw, eps))]);
        }
    }
    t.write(&s.cfg.out)?;
    let mut files = vec!["matvec_error.csv"];
    if let Some(st) = search {
        st.write(&s.cfg.out)?;
        files.push("switch_level.csv");
    }
    println!("matvec-error: switch_level={sw} rows={}", s.cfg.eps.len() * s.working.len());
    finish(&s.cfg.out, &files, overflowed)
}

pub fn switch_level(s: &Setup) -> CliResult<()> {
    prepare_out(&s.cfg)?;
    let (best, t) = s.search()?;
    t.write(&s.cfg.out)?;
    println!("switch-level: depth={} switch_level={best}", s.depth());
    finish(&s.cfg.out, &["switch_level.csv"], 0)
}
