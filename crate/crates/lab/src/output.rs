//! Output files. Everything is written to a temporary file in the target
//! directory and renamed into place, so readers never see partial files.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{LabError, LabResult};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> LabResult<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| LabError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| LabError::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| LabError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| LabError::io(path, e.error))?;
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub enum Cell {
    Int(usize),
    Float(f64),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Self::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Self::Float(v)
    }
}

/// A CSV table built in memory.
#[derive(Debug, Clone)]
pub struct Csv {
    header: Vec<&'static str>,
    body: String,
}

impl Csv {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            body: String::new(),
        }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        debug_assert_eq!(cells.len(), self.header.len());
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.body.push(',');
            }
            match c {
                Cell::Int(v) => write!(self.body, "{v}").expect("write to string"),
                Cell::Float(v) => self.body.push_str(&fmt_f64(*v)),
            }
        }
        self.body.push('\n');
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        s.push_str(&self.body);
        s
    }

    pub fn write(&self, path: &Path) -> LabResult<()> {
        write_atomic(path, self.render().as_bytes())
    }
}

/// Outcome of one quantitative check with its margin. A positive margin
/// means the check passed with room to spare.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckResult {
    /// Passes when `value <= threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    /// Passes when `value >= threshold`.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            passed: value >= threshold,
        }
    }

    pub fn margin(&self) -> f64 {
        if self.passed {
            (self.threshold - self.value).abs()
        } else {
            -(self.threshold - self.value).abs()
        }
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "name": self.name,
            "value": json_f64(self.value),
            "threshold": json_f64(self.threshold),
            "margin": json_f64(self.margin()),
            "passed": self.passed,
        })
    }
}

/// JSON has no infinities or NaN; those are written as strings.
pub fn json_f64(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::Value::from(x)
    } else {
        serde_json::Value::from(x.to_string())
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone)]
pub struct Summary {
    pub command: &'static str,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub files: Vec<PathBuf>,
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl Summary {
    pub fn new(command: &'static str, seed: u64) -> Self {
        Self {
            command,
            seed,
            checks: Vec::new(),
            files: Vec::new(),
            extra: serde_json::Map::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let files: Vec<String> = self
            .files
            .iter()
            .map(|p| p.file_name().map_or_else(|| p.display().to_string(), |f| f.to_string_lossy().into_owned()))
            .collect();
        serde_json::json!({
            "command": self.command,
            "seed": self.seed,
            "passed": self.passed(),
            "checks": self.checks.iter().map(CheckResult::to_json).collect::<Vec<_>>(),
            "files": files,
            "results": serde_json::Value::Object(self.extra.clone()),
        })
    }

    pub fn write(&self, dir: &Path) -> LabResult<PathBuf> {
        let path = dir.join("summary.json");
        let mut text = serde_json::to_string_pretty(&self.to_json()).expect("summary serializes");
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    /// One line for scripts reading standard output.
    pub fn line(&self) -> String {
        serde_json::json!({
            "command": self.command,
            "passed": self.passed(),
            "checks": self.checks.len(),
            "failed": self.failed().map(|c| c.name.clone()).collect::<Vec<_>>(),
        })
        .to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let mut csv = Csv::new(&["x", "v"]);
        csv.row(&[3usize.into(), 0.5.into()]);
        csv.write(&path).unwrap();
        write_atomic(&path, b"new\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "new\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert_eq!(csv.render(), "x,v\n3,5.0000000000000000e-1\n");
    }
}
