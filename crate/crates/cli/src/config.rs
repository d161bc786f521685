//! Layered configuration: built-in defaults, then the `--config` JSON file,
//! then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Contents of a `--config` file. Every section is optional and may be
/// partial; missing keys keep their defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub representation: Option<Value>,
    pub model: Option<Value>,
    pub train: Option<Value>,
    /// Desk-scale width override applied to every model dimension.
    pub width: Option<usize>,
    pub times_compiled: Option<usize>,
    pub workers: Option<usize>,
    pub compiler: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let raw = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&raw)
            .map_err(|e| crate::InputError(format!("{}: {e}", path.display())))
            .map_err(Into::into)
    }
}

/// Recursively overwrites the keys of `base` with those of `patch`.
fn merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

/// `base` with the keys of `patch` (a partial JSON object) applied.
pub fn overlay<T: Serialize + DeserializeOwned>(base: T, patch: Option<&Value>, section: &str) -> anyhow::Result<T> {
    let Some(patch) = patch else {
        return Ok(base);
    };
    let mut v = serde_json::to_value(base)?;
    merge(&mut v, patch);
    serde_json::from_value(v)
        .map_err(|e| crate::InputError(format!("config section {section:?}: {e}")))
        .map_err(Into::into)
}
