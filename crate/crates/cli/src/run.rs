//! Output locations and the resolved configuration written by every run.
//!
//! Outputs are write-once: a run refuses an `--out` directory that already
//! has content, and every file it writes is created fresh. The resolved
//! configuration is written last, so its presence marks a finished run.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use taxel_pipeline::{Error, Result};

pub const RUN_VERSION: &str = "taxel-run/1";
pub const RESOLVED_FILE: &str = "config.resolved.json";

/// Everything needed to replay a run: command, seed, inputs and the full
/// configuration with defaults filled in. The output location is left out
/// so two identical runs into different directories produce identical trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedRun {
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, String>,
    pub config: Value,
}

impl ResolvedRun {
    pub fn new(command: &str, seed: Option<u64>, config: &impl Serialize) -> Result<Self> {
        let config = serde_json::to_value(config).map_err(|e| Error::config(format!("config: {e}")))?;
        Ok(Self { version: RUN_VERSION.into(), command: command.into(), seed, inputs: BTreeMap::new(), config })
    }

    pub fn input(mut self, key: &str, value: impl ToString) -> Self {
        self.inputs.insert(key.into(), value.to_string());
        self
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(RESOLVED_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let run: ResolvedRun = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
        if run.version != RUN_VERSION {
            return Err(Error::format(&path, format!("unsupported run version {}", run.version)));
        }
        Ok(run)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_once(&dir.join(RESOLVED_FILE), to_json(self)?.as_bytes())
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json(value: &impl Serialize) -> Result<String> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| Error::config(e.to_string()))
}

/// Loads a command configuration, or the configuration of a replayed run.
/// Returns the configuration and the replayed seed, if any.
pub fn load_config<C: DeserializeOwned + Default>(path: Option<&Path>, command: &str) -> Result<(C, Option<u64>)> {
    let Some(path) = path else {
        return Ok((C::default(), None));
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let is_run = value.get("version").and_then(Value::as_str).is_some_and(|v| v.starts_with("taxel-run/"));
    let bad = |e: serde_json::Error| Error::format(path, e.to_string());
    if !is_run {
        return Ok((serde_json::from_value(value).map_err(bad)?, None));
    }
    let run: ResolvedRun = serde_json::from_value(value).map_err(bad)?;
    if run.command != command {
        return Err(Error::config(format!("{} replays a `{}` run, not `{command}`", path.display(), run.command)));
    }
    Ok((serde_json::from_value(run.config).map_err(bad)?, run.seed))
}

/// Creates `dir`, which must be absent or an empty directory.
pub fn fresh_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(Error::config(format!("output {} exists and is not a directory", dir.display())));
        }
        let mut entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        if entries.next().is_some() {
            return Err(Error::config(format!(
                "output directory {} is not empty; outputs are write-once, choose a new --out",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes a new file; an existing one is an error.
pub fn write_once(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::OpenOptions::new().write(true).create_new(true).open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            Error::config(format!("{} already exists; outputs are write-once", path.display()))
        } else {
            Error::io(path, e)
        }
    })?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Fails with a usage error naming `flag` when `path` does not exist.
pub fn require(path: &Path, flag: &str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path.to_path_buf())
    } else {
        Err(Error::config(format!("{flag} {}: no such file or directory", path.display())))
    }
}
