//! Result emission: metadata headers, CSV text, atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
}

impl Metadata {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        let canonical = serde_json::to_vec(config).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        let config_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        Self {
            tool: "superrep",
            version: VERSION,
            command: command.to_string(),
            seed: config.seed,
            config_sha256,
        }
    }

    pub fn csv_header(&self) -> String {
        format!(
            "# {} {} command={} seed={} config_sha256={}\n",
            self.tool, self.version, self.command, self.seed, self.config_sha256
        )
    }

    pub fn svg_comment(&self) -> String {
        format!(
            "<!-- {} {} command={} seed={} config_sha256={} -->\n",
            self.tool, self.version, self.command, self.seed, self.config_sha256
        )
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// CSV body with a metadata comment line on top. Cells are written as given.
pub fn csv_text(meta: &Metadata, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = meta.csv_header();
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// JSON document `{"metadata": ..., <body fields>}`.
pub fn json_text<T: Serialize>(meta: &Metadata, body: &T) -> Result<String, CliError> {
    let mut value = serde_json::to_value(body).map_err(|e| CliError::Runtime(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| CliError::Runtime("report body must be a JSON object".into()))?;
    obj.insert(
        "metadata".into(),
        serde_json::to_value(meta).map_err(|e| CliError::Runtime(e.to_string()))?,
    );
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Files collected during a run and written together at the end.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, relative: impl Into<PathBuf>, contents: impl Into<Vec<u8>>) {
        self.files.push((relative.into(), contents.into()));
    }

    /// Writes every file below `dir` through a temporary sibling and a rename.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::with_capacity(self.files.len());
        for (rel, data) in self.files {
            let path = dir.join(&rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| {
                    CliError::Runtime(format!("cannot create directory {}: {e}", parent.display()))
                })?;
            }
            write_atomic(&path, &data)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn write_atomic(path: &Path, data: &[u8]) -> Result<(), CliError> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let fail = |e: std::io::Error| CliError::Runtime(format!("cannot write {}: {e}", path.display()));
    let mut f = fs::File::create(&tmp).map_err(fail)?;
    f.write_all(data).map_err(fail)?;
    f.sync_all().map_err(fail)?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        fail(e)
    })
}
