use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Record of one command run, appended as a JSON line to
/// `<out>/manifest.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: PathBuf,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: u64,
    pub version: String,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn append(&self, out_dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
        let path = out_dir.join(MANIFEST_FILE);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .with_context(|| format!("cannot open {}", path.display()))?;
        let mut line = serde_json::to_string(self)?;
        line.push('\n');
        f.write_all(line.as_bytes()).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

/// Every declared output exists and is nonempty; JSON outputs also parse.
pub fn validate_outputs(outputs: &[PathBuf]) -> Result<()> {
    for p in outputs {
        let meta = fs::metadata(p).with_context(|| format!("declared output {} was not written", p.display()))?;
        if meta.is_file() && meta.len() == 0 {
            bail!("declared output {} is empty", p.display());
        }
        if p.extension().is_some_and(|e| e == "json") {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            serde_json::from_str::<serde_json::Value>(&text)
                .with_context(|| format!("output {} is not valid JSON", p.display()))?;
        }
    }
    Ok(())
}
