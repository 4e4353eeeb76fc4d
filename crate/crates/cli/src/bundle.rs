use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use phaselab::Error;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cannot write outputs: {0}")]
    Output(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Core(e) => match e {
                Error::Structural(_) | Error::Parameter(_) | Error::Domain(_) | Error::Mode(_) | Error::Json(_) => 2,
                Error::Aliasing { .. } | Error::Quadrature { .. } => 3,
                Error::NonContraction { .. } | Error::NotConverged { .. } => 4,
                Error::Diagnostic(_) | Error::Invariant(_) | Error::Io(_) => 1,
            },
            Self::Output(_) => 1,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    /// Directory that relative paths in the config resolve against.
    pub base_dir: PathBuf,
    pub config: Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// A config document ready for a subcommand.
pub struct Loaded {
    pub config: Value,
    pub seed: u64,
    pub base: PathBuf,
    pub inputs: BTreeMap<String, String>,
}

impl Loaded {
    pub fn read(path: &Path, subcommand: &str, seed: Option<u64>) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?;
        let value: Value = phaselab::config::parse(text)?;
        let mut inputs = BTreeMap::new();
        inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let dir = if dir.as_os_str().is_empty() { PathBuf::from(".") } else { dir };

        let is_manifest = value.get("subcommand").is_some() && value.get("config").is_some() && value.get("outputs").is_some();
        if is_manifest {
            let m: RunManifest = serde_json::from_value(value).map_err(Error::from)?;
            if m.subcommand != subcommand {
                return Err(CliError::Config(format!("manifest was written by `{}`, not `{subcommand}`", m.subcommand)));
            }
            return Ok(Self { config: m.config, seed: seed.unwrap_or(m.seed), base: m.base_dir, inputs });
        }
        let base = fs::canonicalize(&dir).unwrap_or(dir);
        Ok(Self { config: value, seed: seed.unwrap_or(0), base, inputs })
    }

    /// Deserializes the config into the subcommand's schema.
    pub fn typed<T: for<'de> Deserialize<'de>>(&self) -> Result<T, CliError> {
        // Round-trip through text so schema errors keep serde's line and column.
        let text = serde_json::to_string_pretty(&self.config).map_err(Error::from)?;
        Ok(phaselab::config::parse(&text)?)
    }
}

/// Outputs staged in memory; nothing touches the disk until the run succeeds.
#[derive(Default)]
pub struct Bundle {
    pub files: Vec<(String, Vec<u8>)>,
    pub resolved: Value,
    pub extra_inputs: Vec<(String, Vec<u8>)>,
    pub warnings: Vec<String>,
}

impl Bundle {
    pub fn new(resolved: &impl Serialize) -> Result<Self, CliError> {
        Ok(Self { resolved: serde_json::to_value(resolved).map_err(Error::from)?, ..Self::default() })
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn add_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(Error::from)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn finish(&mut self, subcommand: &str, loaded: &Loaded, threads: usize, seconds: f64, dir: &Path) -> Result<(), CliError> {
        let mut inputs = loaded.inputs.clone();
        for (name, bytes) in &self.extra_inputs {
            inputs.insert(name.clone(), sha256_hex(bytes));
        }
        let outputs = self.files.iter().map(|(n, b)| (n.clone(), sha256_hex(b))).collect();
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: loaded.seed,
            threads,
            wall_clock_seconds: seconds,
            base_dir: loaded.base.clone(),
            config: self.resolved.clone(),
            inputs,
            outputs,
        };
        fs::create_dir_all(dir).map_err(CliError::Output)?;
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes).map_err(CliError::Output)?;
        }
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(Error::from)?;
        bytes.push(b'\n');
        fs::write(dir.join("manifest.json"), bytes).map_err(CliError::Output)
    }
}
