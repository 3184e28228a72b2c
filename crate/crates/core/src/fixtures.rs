//! Reference data tables shipped with the crate.
//!
//! Every table is checksummed; a table whose contents do not hash to the
//! recorded digest is rejected.

use sha2::{Digest, Sha256};

use crate::error::{GeoError, Result};

pub const FIG4: &str = "fig4_davis_skodje_slice";
pub const FIG5: &str = "fig5_chiavazzo_methods";

struct Entry {
    name: &'static str,
    text: &'static str,
    sha256: &'static str,
}

const ENTRIES: [Entry; 2] = [
    Entry {
        name: FIG4,
        text: include_str!("../fixtures/fig4_davis_skodje_slice.csv"),
        sha256: "79d0bb7fdfb2c05a474b6a14b3af17796cad63c6fdd9eb343b6b995613f2c92e",
    },
    Entry {
        name: FIG5,
        text: include_str!("../fixtures/fig5_chiavazzo_methods.csv"),
        sha256: "e3165c25413f48bab8c086f9aaf2f2ccfd9bf8f83ee6799d782294fb9bfd12ee",
    },
];

pub fn names() -> impl Iterator<Item = &'static str> {
    ENTRIES.iter().map(|e| e.name)
}

/// A parsed CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl FixtureTable {
    pub fn column_index(&self, column: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == column)
            .ok_or_else(|| GeoError::Parameter(format!("fixture {} has no column `{column}`", self.name)))
    }

    /// Numeric values of `column`, optionally restricted to rows whose
    /// `filter.0` column equals `filter.1`.
    pub fn numeric(&self, column: &str, filter: Option<(&str, &str)>) -> Result<Vec<f64>> {
        let c = self.column_index(column)?;
        let f = match filter {
            Some((col, val)) => Some((self.column_index(col)?, val)),
            None => None,
        };
        self.rows
            .iter()
            .filter(|r| f.map_or(true, |(i, v)| r[i] == v))
            .map(|r| {
                r[c].parse::<f64>()
                    .map_err(|e| GeoError::Parameter(format!("fixture {}: bad number `{}`: {e}", self.name, r[c])))
            })
            .collect()
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Parses `text` as the named fixture after checking its digest.
pub fn parse_checked(name: &str, text: &str) -> Result<FixtureTable> {
    let entry = ENTRIES
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| GeoError::Parameter(format!("unknown fixture `{name}`")))?;
    let digest = sha256_hex(text);
    if digest != entry.sha256 {
        return Err(GeoError::Numerical(format!(
            "fixture {name} failed its checksum (expected {}, got {digest})",
            entry.sha256
        )));
    }
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| GeoError::Parameter(format!("fixture {name} is empty")))?;
    let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let rows = lines
        .map(|l| {
            let r: Vec<String> = l.split(',').map(|s| s.trim().to_string()).collect();
            if r.len() != columns.len() {
                return Err(GeoError::Shape { expected: columns.len(), got: r.len() });
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FixtureTable { name: name.to_string(), columns, rows })
}

pub fn load(name: &str) -> Result<FixtureTable> {
    let entry = ENTRIES
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| GeoError::Parameter(format!("unknown fixture `{name}`")))?;
    parse_checked(name, entry.text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig4Row {
    pub x2: f64,
    pub tangential: f64,
    pub orthogonal: f64,
}

pub fn fig4_rows() -> Result<Vec<Fig4Row>> {
    let t = load(FIG4)?;
    let x2 = t.numeric("x2", None)?;
    let tan = t.numeric("tangential", None)?;
    let orth = t.numeric("orthogonal", None)?;
    Ok(x2
        .into_iter()
        .zip(tan)
        .zip(orth)
        .map(|((x2, tangential), orthogonal)| Fig4Row { x2, tangential, orthogonal })
        .collect())
}

/// `(c3, c1)` pairs of one method's curve.
pub fn fig5_curve(method: &str) -> Result<Vec<(f64, f64)>> {
    let t = load(FIG5)?;
    let c3 = t.numeric("c3", Some(("method", method)))?;
    let c1 = t.numeric("c1", Some(("method", method)))?;
    if c3.is_empty() {
        return Err(GeoError::Parameter(format!("no rows for method `{method}`")));
    }
    Ok(c3.into_iter().zip(c1).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_load_with_expected_sizes() {
        assert_eq!(fig4_rows().unwrap().len(), 21);
        assert_eq!(fig5_curve("GSM").unwrap().len(), 16);
        assert_eq!(fig5_curve("QEM").unwrap().len(), 21);
        assert!(fig5_curve("ILDM").is_err());
        let r = fig4_rows().unwrap();
        assert_eq!(r[10].x2, 0.5);
        assert_eq!(r[10].tangential, 0.947610294117647);
    }

    #[test]
    fn edited_table_is_rejected() {
        let text = ENTRIES[0].text.replacen("0.948147536662798", "0.948147536662799", 1);
        assert!(matches!(parse_checked(FIG4, &text), Err(GeoError::Numerical(_))));
        assert!(parse_checked(FIG4, ENTRIES[0].text).is_ok());
    }
}
