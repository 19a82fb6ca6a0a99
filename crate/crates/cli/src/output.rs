use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Serialize)]
struct OutputEntry {
    file: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct InputEntry {
    path: String,
    bytes: Option<u64>,
    sha256: Option<String>,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    subcommand: &'a str,
    tool: &'static str,
    version: &'static str,
    seed: Option<u64>,
    config: &'a C,
    inputs: Vec<InputEntry>,
    outputs: Vec<OutputEntry>,
}

/// Output directory of one run. Refuses to replace existing files unless forced and
/// records every file written for the manifest.
pub struct RunDir {
    dir: PathBuf,
    force: bool,
    written: Vec<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunDir {
    pub fn open(dir: &Path, force: bool) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(RunDir { dir: dir.to_owned(), force, written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    /// Fails before any computation if one of `names` would be overwritten.
    pub fn claim(&self, names: &[String]) -> Result<(), CliError> {
        if self.force {
            return Ok(());
        }
        for name in names {
            let path = self.dir.join(name);
            if path.exists() {
                return Err(CliError::validation(
                    "output_exists",
                    format!("{} already exists; pass --force to overwrite", path.display()),
                ));
            }
        }
        Ok(())
    }

    pub fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        self.claim(&[name.to_string()])?;
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut out = BufWriter::new(file);
        body(&mut out).and_then(|_| out.flush()).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<S: Serialize + ?Sized>(&mut self, name: &str, value: &S) -> Result<(), CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, |w| w.write_all(text.as_bytes()))
    }

    /// Writes `manifest.<stem>.json` listing the files of this run.
    pub fn finish<C: Serialize>(
        mut self,
        stem: &str,
        subcommand: &str,
        seed: Option<u64>,
        config: &C,
        inputs: &[&Path],
    ) -> Result<(), CliError> {
        let mut outputs = Vec::new();
        for name in &self.written {
            let path = self.dir.join(name);
            let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            outputs.push(OutputEntry { file: name.clone(), bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) });
        }
        let inputs = inputs
            .iter()
            .map(|p| {
                let bytes = std::fs::read(p).ok();
                InputEntry {
                    path: p.display().to_string(),
                    bytes: bytes.as_ref().map(|b| b.len() as u64),
                    sha256: bytes.as_deref().map(sha256_hex),
                }
            })
            .collect();
        let manifest = Manifest {
            subcommand,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config,
            inputs,
            outputs,
        };
        let name = format!("manifest.{stem}.json");
        self.write_json(&name, &manifest)
    }
}
