//! CSV files with a reproducible header block, written atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::{Command, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits, enough to round-trip any `f64`.
pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) => float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// One output table. `notes` become extra `# ` lines after the config echo.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// A two-column `quantity,value` table.
    pub fn summary(name: &str) -> Self {
        Table::new(name, &["quantity", "value"])
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn put(&mut self, quantity: &str, value: impl Into<Cell>) {
        self.push(vec![Cell::from(quantity), value.into()]);
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    pub fn get(&self, quantity: &str) -> Option<&Cell> {
        self.rows
            .iter()
            .find(|r| matches!(&r[0], Cell::Text(q) if q == quantity))
            .map(|r| &r[1])
    }

    pub fn body(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::render).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn render(&self, cmd: Command, config: &RunConfig) -> String {
        let mut s = String::new();
        for line in header(cmd, config) {
            s.push_str(&line);
            s.push('\n');
        }
        for n in &self.notes {
            s.push_str("# ");
            s.push_str(n);
            s.push('\n');
        }
        s.push_str(&self.body());
        s
    }
}

/// Version, command, master seed, then every config key.
pub fn header(cmd: Command, config: &RunConfig) -> Vec<String> {
    let mut lines = vec![
        format!("# subac {VERSION}"),
        format!("# command: {}", cmd.name()),
        format!("# master seed: {}", config.seed),
    ];
    lines.extend(config.echo().into_iter().map(|l| format!("# {l}")));
    lines
}

/// Writes every table into `dir` as `<name>.csv`. Each file goes to a
/// temporary sibling first and is renamed into place, so an interrupted run
/// never leaves a truncated CSV behind.
pub fn write_all(dir: &Path, cmd: Command, config: &RunConfig, tables: &[Table]) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for t in tables {
        let path = dir.join(format!("{}.csv", t.name));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(t.render(cmd, config).as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| e.error)?;
        written.push(path);
    }
    Ok(written)
}

/// Lines of a CSV file after the leading `#` block.
pub fn strip_header(text: &str) -> String {
    text.lines()
        .skip_while(|l| l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, 0.0] {
            let s = float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(float(1.0), "1.0000000000000000e0");
        assert_eq!(float(f64::NAN), "NaN");
    }

    #[test]
    fn rendering_and_atomic_write() {
        let mut t = Table::new("demo", &["t", "x"]);
        t.push(vec![0.5.into(), 3usize.into()]);
        t.note("columns: x -> count");
        let cfg = RunConfig::defaults(Command::Simulate);
        let text = t.render(Command::Simulate, &cfg);
        assert!(text.starts_with("# subac "));
        assert_eq!(strip_header(&text), "t,x\n5.0000000000000000e-1,3\n");
        let dir = tempfile::tempdir().unwrap();
        let paths = write_all(dir.path(), Command::Simulate, &cfg, &[t]).unwrap();
        assert_eq!(std::fs::read_to_string(&paths[0]).unwrap(), text);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn summary_lookup() {
        let mut t = Table::summary("s");
        t.put("mean", 2.0);
        assert_eq!(t.get("mean"), Some(&Cell::Float(2.0)));
        assert_eq!(t.get("other"), None);
    }
}
