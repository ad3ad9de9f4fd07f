use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ais_anomaly::RunInfo;
use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Provenance for an output file. Digests are keyed by input role, not path.
pub fn run_info(config: &impl Serialize, inputs: &[(&str, &Path)]) -> anyhow::Result<RunInfo> {
    let mut input_digests = BTreeMap::new();
    for (role, p) in inputs {
        input_digests.insert(role.to_string(), sha256_file(p)?);
    }
    Ok(RunInfo {
        tool_version: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        config: serde_json::to_value(config)?,
        input_digests,
    })
}

pub fn prepare_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path)
        .map_err(ais_anomaly::Error::from)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(ais_anomaly::Error::from)
        .with_context(|| format!("parsing {}", path.display()))
}

/// Writes through a buffered file, flushing before returning.
pub fn write_with(path: &Path, f: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>) -> anyhow::Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}
