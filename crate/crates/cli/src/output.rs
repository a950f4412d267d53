//! Artifact writing and run manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

/// Everything needed to rerun a subcommand and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: String,
    pub versions: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_sha256: Option<String>,
    /// Command-line overrides applied on top of `config`.
    #[serde(default)]
    pub arguments: BTreeMap<String, serde_json::Value>,
    /// External files read by the run, with their digests.
    #[serde(default)]
    pub inputs: Vec<Artifact>,
    pub schemes: BTreeMap<String, String>,
    /// Run facts not implied by the config, such as the lead of an open curve.
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn new(subcommand: &str, config: Option<&RunConfig>) -> Self {
        let versions = BTreeMap::from([
            ("hasimoto".to_string(), hasimoto::VERSION.to_string()),
            ("hasimoto-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ]);
        Self {
            subcommand: subcommand.into(),
            versions,
            config: config.cloned(),
            config_sha256: config.map(RunConfig::hash),
            arguments: BTreeMap::new(),
            inputs: Vec::new(),
            schemes: BTreeMap::new(),
            metadata: BTreeMap::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn scheme(&mut self, key: &str, value: impl Into<String>) {
        self.schemes.insert(key.into(), value.into());
    }

    pub fn argument(&mut self, key: &str, value: impl Serialize) {
        self.arguments.insert(key.into(), serde_json::to_value(value).expect("serialisable argument"));
    }

    pub fn meta(&mut self, key: &str, value: impl Serialize) {
        self.metadata.insert(key.into(), serde_json::to_value(value).expect("serialisable metadata"));
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path)?;
        self.inputs.push(Artifact { file: path.display().to_string(), sha256: digest(&bytes) });
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Output directory that hashes every file it writes into the manifest.
pub struct Artifacts {
    dir: PathBuf,
    pub manifest: Manifest,
}

impl Artifacts {
    pub fn create(dir: &Path, manifest: Manifest) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), manifest })
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.manifest.artifacts.retain(|a| a.file != name);
        self.manifest.artifacts.push(Artifact { file: name.into(), sha256: digest(contents) });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes rows under `header` with 17 significant digits, enough to round-trip.
    pub fn write_table(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(|x| format!("{x:.16e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        self.write(name, &bytes)
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        let path = self.dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(self.dir)
    }
}

/// Reads a table written by [`Artifacts::write_table`], checking the header.
pub fn read_table(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(CliError::Config(format!("{}: expected columns {header:?}, found {found:?}", path.display())));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        rows.push(row);
    }
    Ok(rows)
}
