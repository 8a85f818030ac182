//! Run manifests written next to every command's outputs.

use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const RUN_MANIFEST_FORMAT: &str = "cfaug-run/1";
pub const MANIFEST_FILE: &str = "manifest.json";

/// How a command was invoked: the exact command line and where relative
/// output paths are anchored.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub command_line: String,
    pub out_root: Option<PathBuf>,
}

impl Invocation {
    pub fn new(command_line: impl Into<String>) -> Self {
        Self { command_line: command_line.into(), out_root: None }
    }

    pub fn from_args(args: &[std::ffi::OsString]) -> Self {
        Self::new(args.iter().map(|a| quote(&a.to_string_lossy())).collect::<Vec<_>>().join(" "))
    }

    pub fn resolve(&self, out: &Path) -> PathBuf {
        match &self.out_root {
            Some(root) if out.is_relative() => root.join(out),
            _ => out.to_path_buf(),
        }
    }
}

fn quote(arg: &str) -> String {
    if !arg.is_empty() && arg.chars().all(|c| c.is_ascii_alphanumeric() || "-_./=,:+@".contains(c)) {
        arg.to_string()
    } else {
        format!("'{}'", arg.replace('\'', r"'\''"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub schema: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub tool_version: String,
    pub command: String,
    pub command_line: String,
    pub seeds: Vec<u64>,
    pub parameters: serde_json::Value,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn new(command: &str, inv: &Invocation, seeds: &[u64], parameters: serde_json::Value) -> Self {
        Self {
            format: RUN_MANIFEST_FORMAT.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            command_line: inv.command_line.clone(),
            seeds: seeds.to_vec(),
            parameters,
            outputs: Vec::new(),
        }
    }

    /// Record a file already written under `dir`.
    pub fn add_output(&mut self, dir: &Path, name: &str, schema: &str) -> Result<()> {
        let sha256 = sha256_file(&dir.join(name))?;
        self.outputs.push(OutputFile { path: name.into(), schema: schema.into(), sha256 });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}
