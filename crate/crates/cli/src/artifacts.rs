use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use telesynth::dataio::RunConfig;
use telesynth::Error;

use crate::CliError;

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e).into());
    }
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e).into())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Plain `key = value` record of one command: the effective configuration
/// and the digests of what it read and wrote.
pub struct Manifest {
    command: String,
    inputs: Vec<(String, String)>,
    outputs: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let d = file_digest(path)?;
        self.inputs.push((label(path), d));
        Ok(())
    }

    pub fn output(&mut self, path: &Path, bytes: &[u8]) {
        self.outputs.push((label(path), sha256_hex(bytes)));
    }

    pub fn render(&self, cfg: &RunConfig) -> String {
        let mut s = String::from("# telesynth manifest\n");
        s.push_str(&format!("command = {}\n", self.command));
        s.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
        s.push_str(&format!("core_version = {}\n", telesynth::VERSION));
        for line in cfg.to_text().lines() {
            s.push_str("config.");
            s.push_str(line);
            s.push('\n');
        }
        for (name, d) in &self.inputs {
            s.push_str(&format!("input.{name} = sha256:{d}\n"));
        }
        for (name, d) in &self.outputs {
            s.push_str(&format!("output.{name} = sha256:{d}\n"));
        }
        s
    }

    pub fn write(&self, out_dir: &Path, cfg: &RunConfig) -> Result<(), CliError> {
        let path = out_dir.join(format!("manifest-{}.txt", self.command));
        write_atomic(&path, self.render(cfg).as_bytes())
    }
}
