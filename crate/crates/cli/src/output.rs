//! CSV and manifest writing. Reals use 17 significant digits, `.` as the
//! decimal separator and LF line endings.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::Value;

pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Column-oriented CSV builder.
pub struct Csv {
    header: Vec<String>,
    body: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            body: String::new(),
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.header.len());
        let cells: Vec<String> = values.iter().map(|&v| real(v)).collect();
        self.body.push_str(&cells.join(","));
        self.body.push('\n');
    }

    /// Row whose first cells are preformatted text.
    pub fn mixed_row(&mut self, text: &[&str], values: &[f64]) {
        let mut cells: Vec<String> = text.iter().map(|s| s.to_string()).collect();
        cells.extend(values.iter().map(|&v| real(v)));
        self.body.push_str(&cells.join(","));
        self.body.push('\n');
    }

    pub fn contents(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        s.push_str(&self.body);
        s
    }
}

/// Writes via a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f =
            fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
        .with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))?;
    Ok(())
}

/// Output directory of one run; records written files in order.
pub struct RunDir {
    pub path: PathBuf,
    pub files: Vec<String>,
}

impl RunDir {
    pub fn create(path: PathBuf) -> Result<Self> {
        fs::create_dir_all(&path)
            .with_context(|| format!("creating output directory {}", path.display()))?;
        // a stale manifest would mark partial results as valid
        let manifest = path.join("manifest.json");
        if manifest.exists() {
            fs::remove_file(&manifest)?;
        }
        Ok(Self {
            path,
            files: Vec::new(),
        })
    }

    pub fn write_csv(&mut self, name: &str, csv: &Csv) -> Result<()> {
        write_atomic(&self.path.join(name), csv.contents().as_bytes())?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json(&self, name: &str, value: &Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        write_atomic(&self.path.join(name), s.as_bytes())
    }
}

/// Parsed CSV: header and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn parse_csv(text: &str) -> Result<Table> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .context("empty CSV")?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("row {}", i + 2))?;
        if row.len() != header.len() {
            bail!(
                "row {} has {} columns, header has {}",
                i + 2,
                row.len(),
                header.len()
            );
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn read_csv(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_csv(&text).with_context(|| format!("parsing {}", path.display()))
}
