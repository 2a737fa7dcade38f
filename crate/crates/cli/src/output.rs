//! Output files and their metadata block.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

/// Key of the metadata object embedded in every JSON output.
pub const METADATA: &str = "metadata";
/// Metadata field holding wall-clock values, which are exempt from the
/// byte-for-byte reproducibility guarantee.
pub const TIMING: &str = "timing";

pub struct Metadata {
    pub command: &'static str,
    pub config: Value,
    pub seed: Option<u64>,
}

impl Metadata {
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(&self.config).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_value(&self, timing: Option<Value>) -> Value {
        let mut m = Map::new();
        m.insert("tool".into(), json!("hmgcp"));
        m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        m.insert("command".into(), json!(self.command));
        m.insert("config_hash".into(), json!(self.config_hash()));
        m.insert("seed".into(), json!(self.seed));
        m.insert("rng".into(), json!(hmgcp::rng::RNG_ID));
        m.insert("config".into(), self.config.clone());
        if let Some(t) = timing {
            m.insert(TIMING.into(), t);
        }
        Value::Object(m)
    }

    /// CSV header comment lines.
    pub fn csv_header(&self) -> String {
        format!(
            "# tool=hmgcp version={} command={} config_hash={} seed={} rng={}\n",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.config_hash(),
            self.seed.map_or("none".to_string(), |s| s.to_string()),
            hmgcp::rng::RNG_ID,
        )
    }
}

/// `payload` (a JSON object) with the metadata block placed first.
pub fn with_metadata(
    payload: impl Serialize,
    meta: &Metadata,
    timing: Option<Value>,
) -> Result<Value> {
    let value = serde_json::to_value(payload)?;
    let Value::Object(fields) = value else {
        anyhow::bail!("output payload is not a JSON object");
    };
    let mut out = Map::new();
    out.insert(METADATA.into(), meta.to_value(timing));
    out.extend(fields);
    Ok(Value::Object(out))
}

pub fn out_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    Ok(dir.to_path_buf())
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
