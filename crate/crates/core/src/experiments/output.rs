use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
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

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
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

/// Comma-separated table with one header row; floats carry 17 significant
/// digits.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::Num(v) => write!(out, "{v:.16e}"),
                    Cell::Int(v) => write!(out, "{v}"),
                    Cell::Text(s) => write!(out, "{}", s.replace([',', '\n'], ";")),
                }
                .expect("string write");
            }
            out.push('\n');
        }
        out
    }

    /// Numeric column by header name; text cells read as NaN.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[i] {
                    Cell::Num(v) => *v,
                    Cell::Int(v) => *v as f64,
                    Cell::Text(_) => f64::NAN,
                })
                .collect(),
        )
    }
}

/// Parses a table written by [`Table::to_csv`]; every cell is read as f64,
/// text cells become NaN.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    Ok((header, rows))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

/// Record of one run: the resolved config, tool version, stage timings and
/// a checksum for every emitted file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub timings: Vec<Timing>,
    pub outputs: Vec<OutputFile>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad manifest: {e}")))
    }

    /// Recomputes every listed checksum; errors on the first mismatch.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for f in &self.outputs {
            let bytes = std::fs::read(dir.join(&f.file))?;
            if sha256_hex(&bytes) != f.sha256 || bytes.len() as u64 != f.bytes {
                return Err(Error::Config(format!("checksum mismatch for {}", f.file)));
            }
        }
        Ok(())
    }

    pub fn output(&self, file: &str) -> Option<&OutputFile> {
        self.outputs.iter().find(|f| f.file == file)
    }
}

/// Output directory of a run: writes files and collects their checksums and
/// the stage timings.
pub struct RunWriter {
    root: PathBuf,
    outputs: Vec<OutputFile>,
    timings: Vec<Timing>,
}

impl RunWriter {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            outputs: Vec::new(),
            timings: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, file: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.root.join(file), bytes)?;
        self.outputs.retain(|f| f.file != file);
        self.outputs.push(OutputFile {
            file: file.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn csv(&mut self, file: &str, table: &Table) -> Result<()> {
        self.write(file, table.to_csv().as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Numeric(e.to_string()))?;
        self.write(file, text.as_bytes())
    }

    pub fn plot(&mut self, file: &str, plot: &Plot) -> Result<()> {
        self.write(file, plot.script().as_bytes())
    }

    /// Runs `f` and records its wall time under `stage`.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.timings.push(Timing {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    pub fn finish(self, config: &RunConfig) -> Result<RunManifest> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            timings: self.timings,
            outputs: self.outputs,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Numeric(e.to_string()))?;
        std::fs::write(self.root.join(MANIFEST_FILE), text)?;
        Ok(manifest)
    }
}

/// One curve of a gnuplot script: 1-based columns of a CSV file.
#[derive(Clone, Debug)]
pub struct Series {
    pub file: String,
    pub x: usize,
    pub y: usize,
    pub title: String,
    pub style: &'static str,
}

impl Series {
    pub fn lines(file: &str, x: usize, y: usize, title: &str) -> Self {
        Self {
            file: file.to_string(),
            x,
            y,
            title: title.to_string(),
            style: "lines",
        }
    }

    pub fn points(file: &str, x: usize, y: usize, title: &str) -> Self {
        Self {
            style: "linespoints",
            ..Self::lines(file, x, y, title)
        }
    }
}

/// Gnuplot script rendering CSV columns to a PNG.
#[derive(Clone, Debug)]
pub struct Plot {
    pub output: String,
    pub xlabel: String,
    pub ylabel: String,
    pub logscale_y: bool,
    pub series: Vec<Series>,
    pub extra: Vec<String>,
}

impl Plot {
    pub fn new(output: &str, xlabel: &str, ylabel: &str) -> Self {
        Self {
            output: output.to_string(),
            xlabel: xlabel.to_string(),
            ylabel: ylabel.to_string(),
            logscale_y: false,
            series: Vec::new(),
            extra: Vec::new(),
        }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    pub fn script(&self) -> String {
        let mut s = String::new();
        s.push_str("set datafile separator ','\n");
        s.push_str("set terminal pngcairo size 900,600\n");
        writeln!(s, "set output '{}'", self.output).unwrap();
        writeln!(s, "set xlabel '{}'", self.xlabel).unwrap();
        writeln!(s, "set ylabel '{}'", self.ylabel).unwrap();
        s.push_str("set key left top\nset grid\n");
        if self.logscale_y {
            s.push_str("set logscale y\n");
        }
        for line in &self.extra {
            writeln!(s, "{line}").unwrap();
        }
        let curves: Vec<String> = self
            .series
            .iter()
            .map(|c| format!("'{}' skip 1 using {}:{} with {} title '{}'", c.file, c.x, c.y, c.style, c.title))
            .collect();
        writeln!(s, "plot {}", curves.join(", \\\n     ")).unwrap();
        s
    }
}
