//! CSV and JSON artifacts, each with a `<file>.config.json` sidecar holding
//! the resolved configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::config::Config;
use super::CliError;

/// One cell of a CSV row.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // 17 significant digits round-trip every f64
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Artifact produced by a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Csv { name: String, table: Table },
    Json { name: String, value: serde_json::Value },
}

#[derive(Serialize)]
struct Sidecar<'a> {
    artifact: &'a str,
    seed: u64,
    version: &'static str,
    config: &'a Config,
}

pub struct Writer {
    dir: PathBuf,
    stamp: bool,
}

impl Writer {
    pub fn new(dir: &Path, stamp: bool) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), stamp })
    }

    pub fn write(&self, artifact: &Artifact, config: &Config) -> Result<PathBuf, CliError> {
        let (name, bytes) = match artifact {
            Artifact::Csv { name, table } => (name, self.render_csv(table)?),
            Artifact::Json { name, value } => {
                let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
                s.push('\n');
                (name, s.into_bytes())
            }
        };
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let sidecar = Sidecar { artifact: name, seed: config.run.seed, version: env!("CARGO_PKG_VERSION"), config };
        let side_path = self.dir.join(format!("{name}.config.json"));
        let mut text = serde_json::to_string_pretty(&sidecar).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        fs::write(&side_path, text).map_err(|e| CliError::Io(format!("{}: {e}", side_path.display())))?;
        Ok(path)
    }

    fn render_csv(&self, table: &Table) -> Result<Vec<u8>, CliError> {
        let mut out = Vec::new();
        if self.stamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            out.extend_from_slice(format!("# stamp: {secs}\n").as_bytes());
        }
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&table.header).map_err(io)?;
        for row in &table.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = Cell::Num(v).render();
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = Config::parse("[run]\nkind = \"suspension_certify\"\nseed = 3\n").unwrap();
        let mut t = Table::new(vec!["a", "b"]);
        t.push(vec![1.5.into(), "x".into()]);
        let w = Writer::new(dir.path(), false).unwrap();
        let p = w.write(&Artifact::Csv { name: "t.csv".into(), table: t }, &cfg).unwrap();
        let body = std::fs::read_to_string(p).unwrap();
        assert_eq!(body, "a,b\n1.5000000000000000e0,x\n");
        let side: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("t.csv.config.json")).unwrap()).unwrap();
        assert_eq!(side["seed"], 3);
        assert_eq!(side["config"]["run"]["kind"], "suspension_certify");
    }
}
