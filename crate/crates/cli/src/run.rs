//! Output staging and the `run.json` provenance record.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use morphrom::Error;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Common;

/// Artifacts are written into a sibling staging directory that is renamed
/// onto the output path on success and removed otherwise.
pub struct Staging {
    target: PathBuf,
    dir: PathBuf,
    force: bool,
    done: bool,
}

impl Staging {
    pub fn new(common: &Common) -> Result<Self> {
        let target = common.out.clone();
        if target.exists() {
            let empty = fs::read_dir(&target)
                .with_context(|| format!("reading {}", target.display()))?
                .next()
                .is_none();
            if !empty && !common.force {
                return Err(Error::InvalidArgument(format!(
                    "output directory {} is not empty (use --force to replace it)",
                    target.display()
                ))
                .into());
            }
        }
        let name = target
            .file_name()
            .ok_or_else(|| Error::InvalidArgument(format!("bad output path {}", target.display())))?
            .to_string_lossy()
            .into_owned();
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
        let dir = parent.join(format!(".{name}.staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Staging {
            target,
            dir,
            force: common.force,
            done: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn commit(mut self) -> Result<()> {
        if self.target.exists() {
            if self.force {
                fs::remove_dir_all(&self.target)
                    .with_context(|| format!("removing {}", self.target.display()))?;
            } else {
                fs::remove_dir(&self.target).with_context(|| format!("removing {}", self.target.display()))?;
            }
        }
        fs::rename(&self.dir, &self.target)
            .with_context(|| format!("moving results to {}", self.target.display()))?;
        self.done = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.done {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

/// Loads the command configuration from `--config`, or its default.
pub fn load_config<T: DeserializeOwned + Default>(common: &Common) -> Result<T> {
    match &common.config {
        None => Ok(T::default()),
        Some(p) => Ok(morphrom::io::read_json(p)?),
    }
}

pub fn require<T: Clone>(v: &Option<T>, what: &str) -> Result<T> {
    v.clone()
        .ok_or_else(|| Error::InvalidArgument(format!("missing {what} (flag or config)")).into())
}

/// Wall-clock phases of one run, in insertion order.
#[derive(Default)]
pub struct Timer {
    phases: Vec<(String, f64)>,
}

impl Timer {
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.add(phase, t.elapsed().as_secs_f64());
        out
    }

    pub fn add(&mut self, phase: &str, secs: f64) {
        self.phases.push((phase.to_string(), secs));
    }
}

#[derive(Serialize)]
struct RunRecord<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_hash: String,
    config: &'a C,
    threads: usize,
    timings: BTreeMap<String, f64>,
}

pub fn config_hash<C: Serialize>(config: &C) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn write_run_record<C: Serialize>(dir: &Path, command: &str, config: &C, threads: usize, timer: &Timer) -> Result<()> {
    let record = RunRecord {
        tool: "morphrom",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_hash: config_hash(config)?,
        config,
        threads,
        timings: timer.phases.iter().cloned().collect(),
    };
    morphrom::io::write_json(&dir.join("run.json"), &record)?;
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
