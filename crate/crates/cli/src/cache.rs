//! Content-addressed result records under `<out>/cache`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Artifact file name to contents: JSON values for `.json`, strings for everything else.
pub type Outputs = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config_hash: String,
    pub command: String,
    pub tool_version: String,
    /// Unix seconds.
    pub started: u64,
    pub finished: u64,
    pub outputs: Outputs,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// SHA-256 of the command, tool version and resolved config; the output directory is excluded.
pub fn config_hash(command: &str, cfg: &ExperimentConfig) -> String {
    let mut cfg = cfg.clone();
    cfg.out = None;
    let key = serde_json::json!({
        "command": command,
        "config": cfg,
        "tool_version": TOOL_VERSION,
    });
    // serde_json::Value keeps object keys sorted, so the text is canonical
    let text = serde_json::to_string(&key).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(out: &Path) -> Self {
        Self { dir: out.join("cache") }
    }

    fn path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    /// A record that is missing, unreadable or inconsistent with `hash` is a miss.
    pub fn lookup(&self, hash: &str, command: &str) -> Option<ResultRecord> {
        let path = self.path(hash);
        let text = std::fs::read_to_string(&path).ok()?;
        match serde_json::from_str::<ResultRecord>(&text) {
            Ok(r) if r.config_hash == hash && r.command == command && r.tool_version == TOOL_VERSION => Some(r),
            Ok(_) => {
                eprintln!("warning: cache record {} does not match its key; recomputing", path.display());
                None
            }
            Err(e) => {
                eprintln!("warning: corrupt cache record {} ({e}); recomputing", path.display());
                None
            }
        }
    }

    pub fn store(&self, record: &ResultRecord) -> Result<(), CliError> {
        let path = self.path(&record.config_hash);
        let io = |source| CliError::Output {
            path: path.display().to_string(),
            source,
        };
        std::fs::create_dir_all(&self.dir).map_err(io)?;
        let text = serde_json::to_string_pretty(record).expect("record serializes");
        // write-then-rename so an interrupted run never leaves a half record behind
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(io)?;
        std::fs::rename(&tmp, &path).map_err(io)
    }
}

/// Artifact bytes: pretty JSON with a trailing newline, or the stored text.
pub fn render(name: &str, value: &Value) -> String {
    match value {
        Value::String(s) if !name.ends_with(".json") => s.clone(),
        v => serde_json::to_string_pretty(v).expect("value serializes") + "\n",
    }
}

pub fn write_outputs(out: &Path, outputs: &Outputs) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(out).map_err(|source| CliError::Output {
        path: out.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();
    for (name, value) in outputs {
        let path = out.join(name);
        std::fs::write(&path, render(name, value)).map_err(|source| CliError::Output {
            path: path.display().to_string(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}
