//! Output-directory bookkeeping: every file a command writes is
//! recorded, inputs are digested, stages are timed, and a manifest is
//! written last so its presence marks a completed run.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use chansynth_core::{Error, Result};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Emitter {
    out_dir: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    stages: Vec<(String, f64)>,
}

impl Emitter {
    pub fn new(out_dir: &Path) -> Result<Self> {
        fs::create_dir_all(out_dir)?;
        Ok(Emitter {
            out_dir: out_dir.to_path_buf(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            stages: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path)?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }

    /// Registers a file some other writer just produced under `name`.
    pub fn add_output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, text)?;
        self.add_output(name);
        Ok(path)
    }

    /// Runs one pipeline stage and records its wall-clock seconds.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let value = f()?;
        self.stages.push((name.to_string(), start.elapsed().as_secs_f64()));
        Ok(value)
    }

    /// Writes the manifest (always the final write of a run) and returns
    /// the list of produced files, manifest included.
    pub fn finish(
        mut self,
        command: &str,
        config: BTreeMap<String, String>,
    ) -> Result<Vec<String>> {
        for name in &self.outputs {
            let path = self.out_dir.join(name);
            if !path.is_file() {
                return Err(Error::validation(format!(
                    "output {name:?} was recorded but never written"
                )));
            }
        }
        let stage_seconds: serde_json::Map<String, serde_json::Value> = self
            .stages
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::json!(v)))
            .collect();
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.outputs.push(MANIFEST_NAME.to_string());
        let doc = serde_json::json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "stage_seconds": stage_seconds,
            "timestamp_unix_seconds": timestamp,
        });
        let text = serde_json::to_string_pretty(&doc).expect("manifest serializes");
        let path = self.path(MANIFEST_NAME);
        fs::write(&path, text)?;
        Ok(self.outputs)
    }
}
