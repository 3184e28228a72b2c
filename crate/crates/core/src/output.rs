//! CSV artifacts and companion plot scripts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{GeoError, Result};

/// 17 significant digits, enough to round-trip any `f64`. Negative zero is
/// written as zero.
pub fn num(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.push(row.iter().map(|v| num(*v)).collect());
    }

    /// Full file text: `#`-prefixed echo of `config`, header, rows.
    pub fn render(&self, config: &str) -> String {
        let mut out = String::new();
        for line in config.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses text produced by [`CsvTable::render`], skipping comment lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| GeoError::Parameter("CSV has no header".into()))?;
        let mut t = CsvTable::new(header.split(','));
        for l in lines {
            let row: Vec<String> = l.split(',').map(str::to_string).collect();
            if row.len() != t.columns.len() {
                return Err(GeoError::Shape { expected: t.columns.len(), got: row.len() });
            }
            t.rows.push(row);
        }
        Ok(t)
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| GeoError::Parameter(format!("no column `{name}`")))?;
        self.rows
            .iter()
            .map(|r| r[i].parse::<f64>().map_err(|e| GeoError::Parameter(format!("bad number `{}`: {e}", r[i]))))
            .collect()
    }
}

/// Writes `contents` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// A gnuplot script plotting every column against the first.
pub fn plot_script(csv: &Path, table: &CsvTable) -> String {
    let file = csv.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set datafile commentschars '#'\n");
    s.push_str("set key autotitle columnhead\n");
    if let Some(x) = table.columns.first() {
        s.push_str(&format!("set xlabel '{x}'\n"));
    }
    let numeric: Vec<usize> = (1..table.columns.len())
        .filter(|&i| table.rows.iter().all(|r| r[i].parse::<f64>().is_ok()))
        .collect();
    let parts: Vec<String> = numeric.iter().map(|i| format!("'{file}' using 1:{} with linespoints", i + 1)).collect();
    if !parts.is_empty() {
        s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    }
    s
}

pub fn plot_path(csv: &Path) -> PathBuf {
    csv.with_extension("gp")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 9.33363970588235, f64::MAX] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn render_and_parse() {
        let mut t = CsvTable::new(["x2", "tangential"]);
        t.push_numbers(&[0.5, 0.947610294117647]);
        let text = t.render("command = stretch slice\nmodel = davis-skodje");
        assert!(text.starts_with("# command = stretch slice\n# model = davis-skodje\nx2,tangential\n"));
        let back = CsvTable::parse(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("tangential").unwrap(), vec![0.947610294117647]);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_atomic(&p, "one\n").unwrap();
        write_atomic(&p, "two\n").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        let t = CsvTable::parse("x,y,label\n1,2,a\n").unwrap();
        let s = plot_script(&p, &t);
        assert!(s.contains("'a.csv' using 1:2"));
        assert!(!s.contains("1:3"));
    }
}
