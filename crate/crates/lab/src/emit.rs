//! Atomic file output with content hashes.

use std::io::Write;
use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Format;
use crate::error::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FileRecord {
    /// Relative to the output directory.
    pub path: String,
    pub format: Format,
    pub sha256: String,
    pub bytes: u64,
    /// Data rows, for tables.
    pub rows: Option<u64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Fixed-width float with 17 significant digits.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Writes files below one directory, recording each one.
pub struct Emitter {
    root: PathBuf,
    subdir: String,
    formats: Vec<Format>,
    pub files: Vec<FileRecord>,
}

impl Emitter {
    pub fn new(root: &Path, subdir: &str, formats: &[Format]) -> Result<Self, LabError> {
        std::fs::create_dir_all(root.join(subdir))?;
        Ok(Self {
            root: root.to_path_buf(),
            subdir: subdir.to_string(),
            formats: formats.to_vec(),
            files: Vec::new(),
        })
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    fn put(&mut self, name: &str, format: Format, bytes: &[u8], rows: Option<u64>) -> Result<(), LabError> {
        let rel = if self.subdir.is_empty() {
            name.to_string()
        } else {
            format!("{}/{name}", self.subdir)
        };
        if bytes.is_empty() {
            return Err(LabError::EmptyOutput(rel));
        }
        write_atomic(&self.root.join(&rel), bytes)?;
        self.files.push(FileRecord {
            path: rel,
            format,
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
            rows,
        });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), LabError> {
        if !self.wants(Format::Json) {
            return Ok(());
        }
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.put(name, Format::Json, &bytes, None)
    }

    /// CSV table; an empty table is an error rather than a header-only file.
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), LabError> {
        self.table_as(Format::Csv, name, header, rows)
    }

    /// Plot-ready table (`t,value` plus bound columns).
    pub fn plot(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), LabError> {
        self.table_as(Format::Plot, name, header, rows)
    }

    fn table_as(&mut self, format: Format, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), LabError> {
        if !self.wants(format) {
            return Ok(());
        }
        if rows.is_empty() {
            return Err(LabError::EmptyOutput(name.to_string()));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            if r.len() != header.len() {
                return Err(LabError::Io(format!("{name}: row width {} != {}", r.len(), header.len())));
            }
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::Io(e.to_string()))?;
        self.put(name, format, &bytes, Some(rows.len() as u64))
    }
}

/// Write to a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), LabError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| LabError::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}
