use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::config::{is_lower_bound, ScenarioConfig};

/// Name of the manifest written at the end of every run.
pub const MANIFEST_FILE: &str = "manifest.toml";
/// Present while a run is in progress; a leftover sentinel marks a crash.
pub const SENTINEL_FILE: &str = "RUNNING";

#[derive(Clone, Debug, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckRecord {
    pub fn evaluate(name: &str, value: Option<f64>, tolerance: f64) -> Self {
        let value = value.unwrap_or(f64::NAN);
        let passed = if is_lower_bound(name) { value >= tolerance } else { value <= tolerance };
        Self { name: name.to_string(), value, tolerance, passed }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Pass,
    /// A declared check failed.
    Fail,
    /// The scenario stopped on a module error.
    Error,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Error => "error",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunManifest {
    pub config: ScenarioConfig,
    pub version: String,
    pub wall_time: f64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub warnings: Vec<String>,
    /// Every figure of merit the scenario computed.
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<CheckRecord>,
    pub files: Vec<FileRecord>,
    pub out_dir: PathBuf,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.status == RunStatus::Pass
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn to_toml(&self) -> String {
        let mut run = Table::new();
        run.insert("name".into(), self.config.name.clone().into());
        run.insert("scenario".into(), self.config.scenario.as_str().into());
        run.insert("version".into(), self.version.clone().into());
        run.insert("seed".into(), Value::Integer(self.config.seed as i64));
        run.insert("wall_time_s".into(), Value::Float(self.wall_time));
        run.insert("status".into(), self.status.as_str().into());
        if let Some(e) = &self.error {
            run.insert("error".into(), e.clone().into());
        }
        run.insert("warnings".into(), Value::Array(self.warnings.iter().map(|w| w.clone().into()).collect()));
        let mut root = Table::new();
        root.insert("run".into(), Value::Table(run));
        let metrics: Table = self.metrics.iter().map(|(k, v)| (k.clone(), Value::Float(*v))).collect();
        root.insert("metrics".into(), Value::Table(metrics));
        let checks = self
            .checks
            .iter()
            .map(|c| {
                let mut t = Table::new();
                t.insert("name".into(), c.name.clone().into());
                t.insert("value".into(), Value::Float(c.value));
                t.insert("tolerance".into(), Value::Float(c.tolerance));
                t.insert("passed".into(), Value::Boolean(c.passed));
                Value::Table(t)
            })
            .collect();
        root.insert("check".into(), Value::Array(checks));
        let files = self
            .files
            .iter()
            .map(|f| {
                let mut t = Table::new();
                t.insert("path".into(), f.path.clone().into());
                t.insert("sha256".into(), f.sha256.clone().into());
                t.insert("bytes".into(), Value::Integer(f.bytes as i64));
                Value::Table(t)
            })
            .collect();
        root.insert("file".into(), Value::Array(files));
        root.insert("config".into(), Value::Table(self.config.to_table()));
        toml::to_string(&root).expect("manifest tables serialize")
    }

    /// Writes the manifest through a temporary file and a rename.
    pub fn write_atomic(&self) -> io::Result<PathBuf> {
        let path = self.out_dir.join(MANIFEST_FILE);
        let tmp = self.out_dir.join(format!("{MANIFEST_FILE}.tmp"));
        fs::write(&tmp, self.to_toml())?;
        fs::rename(&tmp, &path)?;
        Ok(path)
    }
}

/// Files emitted by a run, indexed with their checksums.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    files: Vec<FileRecord>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> io::Result<()> {
        fs::write(self.dir.join(rel), bytes)?;
        self.files.retain(|f| f.path != rel);
        self.files.push(FileRecord {
            path: rel.to_string(),
            sha256: format!("{:x}", Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Renders with `f` into memory, then writes and indexes the file.
    pub fn emit(&mut self, rel: &str, f: impl FnOnce(&mut Vec<u8>) -> hvq_core::Result<()>) -> hvq_core::Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(rel, &buf)?;
        Ok(())
    }

    pub fn into_records(self) -> Vec<FileRecord> {
        self.files
    }
}
