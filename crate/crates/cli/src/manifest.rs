//! Output directory bookkeeping: artifacts, stage timings and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub params: BTreeMap<String, Value>,
    pub outputs: Vec<String>,
    pub timings: BTreeMap<String, f64>,
    pub version: String,
}

impl RunManifest {
    pub fn read(dir: &Path) -> std::io::Result<RunManifest> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// Collects the artifacts of one run under `dir`.
pub struct Run {
    dir: PathBuf,
    command: String,
    outputs: Vec<String>,
    timings: BTreeMap<String, f64>,
}

impl Run {
    /// Creates `dir`, dropping the artifacts of an earlier run recorded there.
    pub fn start(dir: &Path, command: &str) -> std::io::Result<Run> {
        fs::create_dir_all(dir)?;
        if let Ok(old) = RunManifest::read(dir) {
            for f in old.outputs {
                let _ = fs::remove_file(dir.join(f));
            }
            let _ = fs::remove_file(dir.join(MANIFEST));
        }
        Ok(Run { dir: dir.to_path_buf(), command: command.into(), outputs: Vec::new(), timings: BTreeMap::new() })
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        *self.timings.entry(name.into()).or_insert(0.0) += t.elapsed().as_secs_f64();
        out
    }

    pub fn write(&mut self, name: &str, content: &str) -> std::io::Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, content)?;
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.into());
        }
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, v: &impl Serialize) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(v).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn finish(self, params: BTreeMap<String, Value>) -> std::io::Result<RunManifest> {
        let m = RunManifest {
            command: self.command,
            params,
            outputs: self.outputs,
            timings: self.timings,
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let mut text = serde_json::to_string_pretty(&m).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        text.push('\n');
        fs::write(self.dir.join(MANIFEST), text)?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_names_every_artifact_and_replaces_old_runs() {
        let tmp = tempfile::tempdir().unwrap();
        let mut run = Run::start(tmp.path(), "first").unwrap();
        run.write("a.csv", "x\n").unwrap();
        run.write("sub/b.csv", "y\n").unwrap();
        run.finish(BTreeMap::new()).unwrap();
        let m = RunManifest::read(tmp.path()).unwrap();
        assert_eq!(m.outputs, vec!["a.csv", "sub/b.csv"]);
        let mut run = Run::start(tmp.path(), "second").unwrap();
        run.write("c.csv", "z\n").unwrap();
        run.finish(BTreeMap::new()).unwrap();
        assert!(!tmp.path().join("a.csv").exists());
        assert_eq!(RunManifest::read(tmp.path()).unwrap().command, "second");
    }
}
