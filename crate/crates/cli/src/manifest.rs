use std::path::{Path, PathBuf};

use balancegauge::{Error, Result};
use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;

use crate::{logging, GlobalArgs};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub version: &'static str,
    pub started: String,
    pub finished: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub struct Run {
    command: &'static str,
    global: GlobalArgs,
    started: DateTime<Utc>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl Run {
    pub fn start(command: &'static str, global: &GlobalArgs) -> Result<Self> {
        std::fs::create_dir_all(&global.out).map_err(|e| Error::io(&global.out, e))?;
        Ok(Self {
            command,
            global: global.clone(),
            started: Utc::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn out(&self) -> &Path {
        &self.global.out
    }

    pub fn path(&mut self, name: impl AsRef<Path>) -> PathBuf {
        let p = self.global.out.join(name);
        self.outputs.push(p.clone());
        p
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    pub fn finish(self, config: serde_json::Value) -> Result<()> {
        let stamp = |t: DateTime<Utc>| t.to_rfc3339_opts(SecondsFormat::Millis, true);
        let manifest = RunManifest {
            command: self.command.to_string(),
            argv: std::env::args().collect(),
            config,
            seed: self.global.seed,
            jobs: self.global.jobs,
            version: env!("CARGO_PKG_VERSION"),
            started: stamp(self.started),
            finished: stamp(Utc::now()),
            inputs: self.inputs,
            outputs: self.outputs,
            warnings: logging::warnings(),
        };
        let path = self.global.out.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}

pub fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
