use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{CliResult, Fail};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "both" => Ok(Format::Both),
            other => Err(format!("unknown format {other:?} (json, csv, both)")),
        }
    }
}

impl Format {
    pub fn json(self) -> bool {
        self != Format::Csv
    }

    pub fn csv(self) -> bool {
        self != Format::Json
    }
}

/// Writes result files into one directory and remembers what it wrote.
#[derive(Debug)]
pub struct Output {
    pub dir: PathBuf,
    pub format: Format,
}

impl Output {
    pub fn new(dir: PathBuf, format: Format) -> CliResult<Self> {
        std::fs::create_dir_all(&dir).map_err(|e| Fail::internal(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Output { dir, format })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> CliResult<PathBuf> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| Fail::internal(format!("cannot write {}: {e}", p.display())))?;
        eprintln!("wrote {}", p.display());
        Ok(p)
    }

    /// Pretty JSON with a trailing newline, when JSON output is enabled.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        if self.format.json() {
            let mut s = serde_json::to_string_pretty(value).map_err(Fail::internal)?;
            s.push('\n');
            self.write_text(name, &s)?;
        }
        Ok(())
    }

    /// CSV table, when CSV output is enabled.
    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        if self.format.csv() {
            self.write_text(name, &render_csv(header, rows)?)?;
        }
        Ok(())
    }
}

pub fn render_csv(header: &[&str], rows: &[Vec<String>]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(Fail::internal)?;
    for r in rows {
        w.write_record(r).map_err(Fail::internal)?;
    }
    let bytes = w.into_inner().map_err(Fail::internal)?;
    String::from_utf8(bytes).map_err(Fail::internal)
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| Fail::invalid(format!("cannot read {}: {e}", path.display())))
}
