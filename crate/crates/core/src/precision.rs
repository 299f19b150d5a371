//! Floating-point storage formats, emulated rounding and per-block precision
//! selection.
//!
//! Rounding is performed in `f64` arithmetic: a value is scaled by the
//! spacing of its binade in the target format, rounded to an integer with
//! ties to even and scaled back. Values beyond the largest finite number of
//! the target become signed infinities so that range violations are visible.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// A binary floating-point format with `1 + exp_bits + mantissa_bits` bits.
#[derive(Clone, Debug, PartialEq)]
pub struct FpFormat {
    pub name: String,
    pub exp_bits: u32,
    pub mantissa_bits: u32,
    pub e_min: i32,
    pub e_max: i32,
    pub unit_roundoff: f64,
    /// Smallest positive normal number.
    pub x_min: f64,
    /// Largest finite number.
    pub x_max: f64,
    pub subnormals: bool,
}

impl FpFormat {
    /// Builds a format from its field widths and exponent range. The unit
    /// roundoff defaults to `2^-(m+1)`.
    pub fn new(
        name: &str,
        exp_bits: u32,
        mantissa_bits: u32,
        e_min: i32,
        e_max: i32,
        unit_roundoff: Option<f64>,
    ) -> Result<Self> {
        if name.is_empty() || name.contains(|c: char| c.is_whitespace() || c == ',') {
            return Err(Error::FormatTable(format!("invalid format name {name:?}")));
        }
        if exp_bits == 0 || exp_bits > 11 || mantissa_bits > 52 {
            return Err(Error::FormatTable(format!(
                "{name}: field widths e={exp_bits}, m={mantissa_bits} exceed binary64"
            )));
        }
        if e_min < -1022 || e_max > 1023 || e_min >= e_max {
            return Err(Error::FormatTable(format!(
                "{name}: exponent range [{e_min}, {e_max}] is not inside binary64"
            )));
        }
        if (e_max - e_min + 1) as i64 > (1i64 << exp_bits) - 2 {
            return Err(Error::FormatTable(format!(
                "{name}: exponent range [{e_min}, {e_max}] does not fit {exp_bits} exponent bits"
            )));
        }
        let u = unit_roundoff.unwrap_or_else(|| pow2(-(mantissa_bits as i32) - 1));
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::FormatTable(format!("{name}: unit roundoff {u} out of range")));
        }
        Ok(FpFormat {
            name: name.to_string(),
            exp_bits,
            mantissa_bits,
            e_min,
            e_max,
            unit_roundoff: u,
            x_min: pow2(e_min),
            x_max: (2.0 - pow2(-(mantissa_bits as i32))) * pow2(e_max),
            subnormals: true,
        })
    }

    pub fn fp64() -> Self {
        Self::new("fp64", 11, 52, -1022, 1023, None).unwrap()
    }
    pub fn fp32() -> Self {
        Self::new("fp32", 8, 23, -126, 127, None).unwrap()
    }
    pub fn fp16() -> Self {
        Self::new("fp16", 5, 10, -14, 15, None).unwrap()
    }
    pub fn bf16() -> Self {
        Self::new("bf16", 8, 7, -126, 127, None).unwrap()
    }
    /// 8-bit format with 4 exponent and 3 mantissa bits. Its unit roundoff
    /// is taken as 0.25 rather than `2^-4`, matching the reference table for
    /// this format.
    pub fn q43() -> Self {
        Self::new("q43", 4, 3, -6, 7, Some(0.25)).unwrap()
    }

    pub fn with_subnormals(mut self, on: bool) -> Self {
        self.subnormals = on;
        self
    }

    pub fn storage_bits(&self) -> u32 {
        1 + self.exp_bits + self.mantissa_bits
    }

    /// True when rounding to this format is the identity on `f64`.
    pub fn is_binary64(&self) -> bool {
        self.mantissa_bits == 52 && self.e_min == -1022 && self.e_max == 1023 && self.subnormals
    }

    /// Smallest positive subnormal number (equal to `x_min` when subnormals
    /// are disabled).
    pub fn smallest_subnormal(&self) -> f64 {
        if self.subnormals {
            pow2(self.e_min - self.mantissa_bits as i32)
        } else {
            self.x_min
        }
    }
}

impl fmt::Display for FpFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// fp64, fp32, fp16, bf16 and q43.
pub fn builtin_formats() -> Vec<FpFormat> {
    vec![
        FpFormat::fp64(),
        FpFormat::fp32(),
        FpFormat::fp16(),
        FpFormat::bf16(),
        FpFormat::q43(),
    ]
}

/// Looks up a built-in format by name.
pub fn builtin_format(name: &str) -> Option<FpFormat> {
    builtin_formats().into_iter().find(|f| f.name == name)
}

/// Parses a format table. Each non-empty line not starting with `#` holds
/// `name e m e_min e_max [u]`, separated by whitespace or commas.
pub fn parse_format_table(text: &str) -> Result<Vec<FpFormat>> {
    let mut out: Vec<FpFormat> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let bad = |what: &str| Error::FormatTable(format!("line {}: {what}", lineno + 1));
        if fields.len() != 5 && fields.len() != 6 {
            return Err(bad("expected `name e m e_min e_max [u]`"));
        }
        let int = |s: &str| s.parse::<i64>().map_err(|_| bad(&format!("{s:?} is not an integer")));
        let name = fields[0];
        let e = int(fields[1])?;
        let m = int(fields[2])?;
        let e_min = int(fields[3])?;
        let e_max = int(fields[4])?;
        let u = match fields.get(5) {
            Some(s) => Some(s.parse::<f64>().map_err(|_| bad(&format!("{s:?} is not a number")))?),
            None => None,
        };
        if e < 0 || m < 0 || e_min.abs() > 2048 || e_max.abs() > 2048 {
            return Err(bad("field out of range"));
        }
        let f = FpFormat::new(name, e as u32, m as u32, e_min as i32, e_max as i32, u)?;
        if out.iter().any(|g| g.name == f.name) {
            return Err(bad(&format!("duplicate format {}", f.name)));
        }
        out.push(f);
    }
    if out.is_empty() {
        return Err(Error::FormatTable("table is empty".into()));
    }
    Ok(out)
}

pub fn load_format_table(path: &Path) -> Result<Vec<FpFormat>> {
    parse_format_table(&std::fs::read_to_string(path)?)
}

/// `2^k` for any `k` whose result is a finite nonzero `f64`.
pub(crate) fn pow2(k: i32) -> f64 {
    debug_assert!((-1074..=1023).contains(&k));
    if k >= -1022 {
        f64::from_bits(((k + 1023) as u64) << 52)
    } else {
        f64::from_bits(1u64 << (k + 1074))
    }
}

/// `floor(log2(a))` for finite positive `a`, exact for subnormals.
pub(crate) fn exponent(a: f64) -> i32 {
    let bits = a.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    if biased == 0 {
        let frac = bits & ((1u64 << 52) - 1);
        -1011 - frac.leading_zeros() as i32
    } else {
        biased - 1023
    }
}

/// Rounds `x` to the nearest value representable in `fmt`, ties to even.
pub fn round_to_format(x: f64, fmt: &FpFormat) -> f64 {
    if fmt.is_binary64() || x == 0.0 || !x.is_finite() {
        return x;
    }
    let e = exponent(x.abs()).max(fmt.e_min);
    let quantum = pow2(e - fmt.mantissa_bits as i32);
    let r = (x / quantum).round_ties_even() * quantum;
    let a = r.abs();
    if a > fmt.x_max {
        f64::INFINITY.copysign(x)
    } else if !fmt.subnormals && a < fmt.x_min {
        0.0f64.copysign(x)
    } else {
        r
    }
}

pub fn round_slice(xs: &mut [f64], fmt: &FpFormat) {
    if fmt.is_binary64() {
        return;
    }
    for x in xs {
        *x = round_to_format(*x, fmt);
    }
}

/// Working format plus the lower-precision formats a block may be stored in.
#[derive(Clone, Debug)]
pub struct PrecisionConfig {
    working: FpFormat,
    available: Vec<FpFormat>,
}

impl PrecisionConfig {
    /// `available` is sorted by increasing unit roundoff; formats at least as
    /// accurate as the working format are dropped.
    pub fn new(working: FpFormat, available: Vec<FpFormat>) -> Result<Self> {
        let mut avail: Vec<FpFormat> = Vec::new();
        for f in available {
            if f.name == working.name {
                continue;
            }
            if f.unit_roundoff <= working.unit_roundoff {
                return Err(Error::FormatTable(format!(
                    "{} is not less accurate than the working format {}",
                    f.name, working.name
                )));
            }
            if avail.iter().any(|g| g.name == f.name) {
                return Err(Error::FormatTable(format!("duplicate format {}", f.name)));
            }
            avail.push(f);
        }
        avail.sort_by(|a, b| a.unit_roundoff.total_cmp(&b.unit_roundoff));
        Ok(PrecisionConfig { working, available: avail })
    }

    /// fp64 working precision, all other built-in formats available.
    pub fn standard() -> Self {
        Self::new(FpFormat::fp64(), builtin_formats()).unwrap()
    }

    /// Only the working format.
    pub fn uniform(working: FpFormat) -> Self {
        PrecisionConfig { working, available: Vec::new() }
    }

    pub fn working(&self) -> &FpFormat {
        &self.working
    }

    pub fn available(&self) -> &[FpFormat] {
        &self.available
    }

    /// Working format first, then the available ones by increasing unit
    /// roundoff. Block format ids index into this list.
    pub fn candidates(&self) -> Vec<FpFormat> {
        let mut v = Vec::with_capacity(1 + self.available.len());
        v.push(self.working.clone());
        v.extend(self.available.iter().cloned());
        v
    }
}

/// Result of [`select_precision`]: an index into
/// [`PrecisionConfig::candidates`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Selection {
    pub format: usize,
    /// Set when no candidate met the threshold and the working format was
    /// used anyway.
    pub fallback: bool,
}

/// Largest admissible unit roundoff for a block at `level` carrying the
/// fraction `xi` of the global Frobenius norm.
pub fn precision_threshold(xi: f64, eps: f64, dim: usize, level: usize) -> f64 {
    let scale = 2f64.powf((dim * level) as f64 / 2.0);
    eps / (scale * xi)
}

/// Picks the least accurate format whose unit roundoff does not exceed
/// `eps / (2^(d*level/2) * xi)`.
pub fn select_precision(
    xi: f64,
    eps: f64,
    dim: usize,
    level: usize,
    cfg: &PrecisionConfig,
) -> Selection {
    let threshold = precision_threshold(xi, eps, dim, level);
    if let Some(k) = cfg.available.iter().rposition(|f| f.unit_roundoff <= threshold) {
        return Selection { format: k + 1, fallback: false };
    }
    Selection { format: 0, fallback: cfg.working.unit_roundoff > threshold }
}
