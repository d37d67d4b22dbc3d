//! Atomic output files and the run manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::CliError;

/// Writes into a sibling temp file, then renames over `path`.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    let name = path
        .file_name()
        .ok_or_else(|| CliError::io(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        fill(&mut w)?;
        let file = w.into_inner().map_err(|e| e.into_error())?;
        file.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::io(e.to_string()))?;
        writeln!(w)?;
        Ok(())
    })
}

/// Collects output paths and timings for one command.
pub struct Run {
    pub out_dir: PathBuf,
    command: &'static str,
    started: Instant,
    outputs: Vec<String>,
    timings: Vec<(String, f64)>,
    resolved: serde_json::Map<String, Value>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    threads: usize,
    config: &'a RunConfig,
    resolved: &'a serde_json::Map<String, Value>,
    outputs: &'a [String],
    timings_seconds: serde_json::Map<String, Value>,
}

impl Run {
    pub fn start(out_dir: &Path, command: &'static str) -> Result<Self, CliError> {
        fs::create_dir_all(out_dir)
            .map_err(|e| CliError::io(format!("cannot create output directory {}: {e}", out_dir.display())))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            command,
            started: Instant::now(),
            outputs: Vec::new(),
            timings: Vec::new(),
            resolved: Default::default(),
        })
    }

    pub fn resolve<T: Serialize>(&mut self, key: &str, value: &T) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.resolved.insert(key.to_string(), v);
    }

    pub fn time(&mut self, stage: &str, since: Instant) {
        self.timings.push((stage.to_string(), since.elapsed().as_secs_f64()));
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out_dir.join(name)
    }

    pub fn finish(mut self, config: &RunConfig) -> Result<PathBuf, CliError> {
        self.timings.push(("total".into(), self.started.elapsed().as_secs_f64()));
        let path = self.out_dir.join("run_manifest.json");
        let manifest = Manifest {
            tool: "paultrap",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            threads: rayon::current_num_threads(),
            config,
            resolved: &self.resolved,
            outputs: &self.outputs,
            timings_seconds: self.timings.iter().map(|(k, v)| (k.clone(), Value::from(*v))).collect(),
        };
        write_json(&path, &manifest)?;
        Ok(path)
    }
}
