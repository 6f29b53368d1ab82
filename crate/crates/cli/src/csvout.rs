//! Deterministic CSV artifacts (RFC-4180 subset, LF endings, '.' decimal,
//! 17 significant digits) with provenance footer comments.

use std::fs;
use std::io::Write;
use std::path::Path;

pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub footer: Vec<(String, String)>,
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            footer: Vec::new(),
        }
    }

    pub fn push_f64(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|&v| fmt_f64(v)).collect());
    }

    pub fn push_raw(&mut self, values: &[String]) {
        self.rows.push(values.to_vec());
    }

    pub fn footer_entry(&mut self, key: &str, value: impl Into<String>) {
        self.footer.push((key.to_string(), value.into()));
    }

    pub fn provenance(&mut self, config_hash: u64, scheme: &str, grid: &str) {
        self.footer_entry("config_hash", format!("{config_hash:016x}"));
        self.footer_entry("scheme", scheme);
        self.footer_entry("grid", grid);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        for (k, v) in &self.footer {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut f = fs::File::create(path)?;
        f.write_all(self.render().as_bytes())
    }
}

/// Read a two-column (x, value) CSV written by this tool or compatible;
/// footer comments are skipped. Returns (x, v, config_hash if present).
pub fn read_series(path: &Path) -> std::io::Result<(Vec<f64>, Vec<f64>, Option<String>)> {
    let text = fs::read_to_string(path)?;
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    let mut hash = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                if k.trim() == "config_hash" {
                    hash = Some(v.trim().to_string());
                }
            }
            continue;
        }
        if i == 0 && line.parse::<f64>().is_err() && !line.contains("e") {
            continue; // header
        }
        let mut parts = line.split(',');
        let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
            continue;
        };
        match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            (Ok(x), Ok(v)) => {
                xs.push(x);
                vs.push(v);
            }
            _ => continue, // header or malformed line
        }
    }
    Ok((xs, vs, hash))
}

/// Extract the config_hash footer of an artifact, if any.
pub fn artifact_hash(path: &Path) -> std::io::Result<Option<String>> {
    let text = fs::read_to_string(path)?;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                if k.trim() == "config_hash" {
                    return Ok(Some(v.trim().to_string()));
                }
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_series() {
        let mut t = CsvTable::new(&["x", "value"]);
        t.push_f64(&[1.0, -2.5e-7]);
        t.push_f64(&[2.0, 3.25]);
        t.provenance(0xabcd, "leapfrog", "test-grid");
        let dir = std::env::temp_dir().join("pricelab-csv-test");
        let path = dir.join("series.csv");
        t.write(&path).unwrap();
        let (xs, vs, hash) = read_series(&path).unwrap();
        assert_eq!(xs, vec![1.0, 2.0]);
        assert!((vs[0] + 2.5e-7).abs() < 1e-20);
        assert_eq!(hash.unwrap(), "000000000000abcd");
        std::fs::remove_dir_all(&dir).ok();
    }
}
