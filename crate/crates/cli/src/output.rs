//! CSV output with versioned schemas.

use std::path::Path;

/// Every CSV the CLI writes: file name, schema name, version, columns.
pub const SCHEMAS: &[(&str, &str, u32, &[&str])] = &[
    ("blocks.csv", "blocks", 1, &["level", "i", "j", "kind", "rank", "format", "xi", "bits"]),
    ("storage.csv", "storage", 1, &["quantity", "bits", "words"]),
    ("switch_level.csv", "switch_level", 1, &["level", "s1_bits", "s2_bits", "saving_bits", "selected"]),
    (
        "error_sweep.csv",
        "error_sweep",
        1,
        &["eps", "format", "switch_level", "storage", "error", "bound", "eb1", "eb2"],
    ),
    (
        "storage_gains.csv",
        "storage_gains",
        1,
        &["eps", "gain_hh", "gain_hs", "s1_bits", "s2_bits", "s1_over_s2", "amp_bits", "hh_fp64_bits", "hs_fp64_bits"],
    ),
    ("matvec_error.csv", "matvec_error", 1, &["eps", "working", "storage", "backward_error", "bound"]),
    ("manifest.csv", "manifest", 1, &["file", "schema", "version"]),
];

/// Shortest decimal that reads back to the same `f64`; scientific notation
/// outside `[1e-4, 1e16)`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else if x == 0.0 || (1e-4..1e16).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub struct Table {
    file: &'static str,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &'static str) -> Self {
        assert!(SCHEMAS.iter().any(|s| s.0 == file), "no schema for {file}");
        Table { file, rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn write(&self, dir: &Path) -> Result<(), csv::Error> {
        let schema = SCHEMAS.iter().find(|s| s.0 == self.file).unwrap();
        let mut w = csv::Writer::from_path(dir.join(self.file))?;
        w.write_record(schema.3)?;
        for r in &self.rows {
            debug_assert_eq!(r.len(), schema.3.len(), "{}", self.file);
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Lists the files written by a command together with their schemas.
pub fn write_manifest(dir: &Path, files: &[&str]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(dir.join("manifest.csv"))?;
    w.write_record(["file", "schema", "version"])?;
    for f in files {
        match SCHEMAS.iter().find(|s| s.0 == *f) {
            Some(s) => w.write_record([s.0, s.1, &s.2.to_string()])?,
            None => w.write_record([*f, "-", "-"])?,
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::num;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.0, 0.1, 1e-10, 6.02e23, -3.5e-7, 1.0 / 3.0, 12345.678, f64::MIN_POSITIVE, 5e-324] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x, "{}", num(x));
        }
        assert_eq!(num(1e-10), "1e-10");
        assert_eq!(num(0.25), "0.25");
        assert_eq!(num(f64::INFINITY), "inf");
    }
}
