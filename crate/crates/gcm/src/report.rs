//! Output files: a hierarchical JSON report plus delimited tables. Every
//! file carries the provenance block; nothing time-dependent is written.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_sha256: Option<String>,
}

impl Provenance {
    pub fn new(seed: u64, config_sha256: String, input_sha256: Option<String>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config_sha256,
            input_sha256,
        }
    }

    /// `# key=value` lines placed above a table's header.
    pub fn comment_header(&self) -> String {
        let mut s = format!(
            "# tool={} version={}\n# seed={}\n# config_sha256={}\n",
            self.tool, self.version, self.seed, self.config_sha256
        );
        if let Some(h) = &self.input_sha256 {
            let _ = writeln!(s, "# input_sha256={h}");
        }
        s
    }
}

/// 17 significant digits, enough to recover the exact double.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Square matrix as CSV with a label column.
pub fn matrix_csv(provenance: &Provenance, labels: &[String], m: &DMatrix<f64>) -> String {
    let mut table = Table::new(provenance, std::iter::once("").chain(labels.iter().map(String::as_str)));
    for (i, label) in labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(m.row(i).iter().map(|&v| num(v)));
        table.push(row);
    }
    table.finish()
}

/// CSV text builder with quoting handled by the `csv` crate.
pub struct Table {
    head: String,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new<'a>(provenance: &Provenance, header: impl IntoIterator<Item = &'a str>) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self {
            head: provenance.comment_header(),
            writer,
        }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(row).expect("in-memory write");
    }

    pub fn finish(self) -> String {
        let body = String::from_utf8(self.writer.into_inner().expect("in-memory flush")).expect("utf-8 cells");
        self.head + &body
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Writes every file into `dir`. If any write fails the files written so
/// far are removed, so a failed run leaves no partial output.
pub fn write_outputs(dir: &Path, files: &[(String, String)]) -> AppResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        if let Err(e) = std::fs::write(&path, contents) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(AppError::io(path, e));
        }
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(f64::NAN), "NaN");
    }

    #[test]
    fn tables_carry_provenance() {
        let p = Provenance::new(7, "ab".into(), None);
        let mut t = Table::new(&p, ["a", "b"]);
        t.push(["1", "x,y"]);
        let s = t.finish();
        assert!(s.starts_with("# tool=gcm"));
        assert!(s.contains("# seed=7\n"));
        assert!(s.ends_with("a,b\n1,\"x,y\"\n"));
    }
}
