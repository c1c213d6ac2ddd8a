// SPDX-License-Identifier: Apache-2.0

//! Input digests, buffered outputs, atomic writes and the per-directory run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub command: String,
    pub command_line: String,
    pub config: BTreeMap<String, Value>,
    /// Input path to `sha256:<hex>`.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub version: String,
    pub timestamp: String,
}

/// One manifest per output directory, with one entry per primary output file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub runs: BTreeMap<String, RunEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> anyhow::Result<Option<Manifest>> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let manifest =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(Some(manifest))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write via a sibling temp file and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = parent_dir(path);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path
        .file_name()
        .with_context(|| format!("{} has no file name", path.display()))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("writing {}", path.display()))
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// `out` with its extension replaced.
pub fn sibling(out: &Path, ext: &str) -> PathBuf {
    out.with_extension(ext)
}

/// `out` with `_suffix` appended to its stem and the given extension.
pub fn companion(out: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

pub fn json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn jsonl_bytes<T: Serialize>(items: &[T]) -> anyhow::Result<Vec<u8>> {
    let mut bytes = Vec::new();
    curveprobe_core::io::write_jsonl(&mut bytes, items)?;
    Ok(bytes)
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    Ok(w.into_inner()?)
}

fn command_line() -> String {
    std::env::args()
        .map(|a| {
            if a.is_empty() || a.contains(|c: char| c.is_whitespace() || c == '"') {
                format!("{a:?}")
            } else {
                a
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Inputs read and outputs produced by one invocation. Nothing touches the
/// disk until [`Run::commit`], so a failing validation leaves no files behind.
pub struct Run {
    command: &'static str,
    inputs: BTreeMap<String, String>,
    outputs: Vec<(PathBuf, Vec<u8>)>,
}

impl Run {
    pub fn new(command: &'static str) -> Run {
        Run {
            command,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn read(&mut self, path: &Path) -> anyhow::Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.insert(
            path.display().to_string(),
            format!("sha256:{}", sha256_hex(&bytes)),
        );
        Ok(bytes)
    }

    pub fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.outputs.push((path, bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, path: PathBuf, value: &T) -> anyhow::Result<()> {
        self.add(path, json_bytes(value)?);
        Ok(())
    }

    pub fn add_jsonl<T: Serialize>(&mut self, path: PathBuf, items: &[T]) -> anyhow::Result<()> {
        self.add(path, jsonl_bytes(items)?);
        Ok(())
    }

    pub fn add_csv<T: Serialize>(&mut self, path: PathBuf, rows: &[T]) -> anyhow::Result<()> {
        self.add(path, csv_bytes(rows)?);
        Ok(())
    }

    /// Write every output, then record the run in each output directory's
    /// manifest under the name of the first output placed there.
    pub fn commit(self, config: BTreeMap<String, Value>) -> anyhow::Result<()> {
        let mut by_dir: BTreeMap<PathBuf, Vec<String>> = BTreeMap::new();
        for (path, _) in &self.outputs {
            let name = path
                .file_name()
                .with_context(|| format!("{} has no file name", path.display()))?
                .to_string_lossy()
                .into_owned();
            if name == MANIFEST {
                bail!("output {} would overwrite the run manifest", path.display());
            }
            by_dir.entry(parent_dir(path)).or_default().push(name);
        }
        // Read existing manifests up front so a corrupt one aborts before any write.
        let mut manifests = BTreeMap::new();
        for dir in by_dir.keys() {
            manifests.insert(dir.clone(), Manifest::load(dir)?.unwrap_or_default());
        }

        for (path, bytes) in &self.outputs {
            write_atomic(path, bytes)?;
        }

        let timestamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        let command_line = command_line();
        for (dir, names) in by_dir {
            let mut manifest = manifests.remove(&dir).unwrap_or_default();
            let entry = RunEntry {
                command: self.command.to_owned(),
                command_line: command_line.clone(),
                config: config.clone(),
                inputs: self.inputs.clone(),
                outputs: names.clone(),
                version: env!("CARGO_PKG_VERSION").to_owned(),
                timestamp: timestamp.clone(),
            };
            manifest.runs.insert(names[0].clone(), entry);
            write_atomic(&dir.join(MANIFEST), &json_bytes(&manifest)?)?;
        }
        Ok(())
    }
}
