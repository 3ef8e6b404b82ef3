//! Resolved run configuration and its fingerprint.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingest::Adapter;
use crate::runner::{AblationConfig, DecimalMark};
use crate::Error;

/// Hex SHA-256 (first 16 bytes) of the value's JSON with object keys sorted,
/// so field order never changes it.
pub fn fingerprint<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("config serializes");
    let canonical = serde_json::to_string(&v).expect("value serializes");
    hex::encode(&Sha256::digest(canonical.as_bytes())[..16])
}

/// Everything a pipeline run depends on, fully resolved before any stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: Option<String>,
    pub adapter: String,
    pub out: Option<String>,
    /// Registry manifest; the built-in registry when absent.
    pub registry: Option<String>,
    pub strict: bool,
    pub locale: DecimalMark,
    pub ablation: AblationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            adapter: "canonical".into(),
            out: None,
            registry: None,
            strict: false,
            locale: DecimalMark::Point,
            ablation: AblationConfig::default(),
        }
    }
}

impl RunConfig {
    /// Fingerprint of everything that can change outputs; the output
    /// directory is left out.
    pub fn fingerprint(&self) -> String {
        fingerprint(&RunConfig { out: None, ..self.clone() })
    }

    pub fn adapter(&self) -> Result<Adapter, Error> {
        self.adapter.parse().map_err(Error::Config)
    }

    /// Applies a JSON object or `key=value` lines onto `self`. Keys use dots
    /// for nesting (`ablation.n_rounds=5`); values are parsed as JSON and
    /// fall back to plain strings.
    pub fn merge_text(&mut self, text: &str) -> Result<(), Error> {
        let trimmed = text.trim_start();
        let patch: serde_json::Value = if trimmed.starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config JSON: {e}")))?
        } else {
            let mut root = serde_json::Map::new();
            for (n, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("config line {}: expected key=value", n + 1)))?;
                let value = serde_json::from_str(v.trim()).unwrap_or_else(|_| serde_json::Value::String(v.trim().into()));
                insert_path(&mut root, k.trim(), value);
            }
            serde_json::Value::Object(root)
        };
        let mut base = serde_json::to_value(&*self).expect("config serializes");
        merge(&mut base, patch);
        *self = serde_json::from_value(base).map_err(|e| Error::Config(format!("config: {e}")))?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn insert_path(root: &mut serde_json::Map<String, serde_json::Value>, key: &str, value: serde_json::Value) {
    match key.split_once('.') {
        None => {
            root.insert(key.to_string(), value);
        }
        Some((head, rest)) => {
            let child = root.entry(head.to_string()).or_insert_with(|| serde_json::Value::Object(Default::default()));
            if !child.is_object() {
                *child = serde_json::Value::Object(Default::default());
            }
            insert_path(child.as_object_mut().expect("object"), rest, value);
        }
    }
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

/// Sorted `key → value` view of a fingerprinted object, for reports.
pub fn flatten(value: &serde_json::Value) -> BTreeMap<String, String> {
    fn walk(prefix: &str, v: &serde_json::Value, out: &mut BTreeMap<String, String>) {
        match v {
            serde_json::Value::Object(m) => {
                for (k, v) in m {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, v, out);
                }
            }
            other => {
                out.insert(prefix.to_string(), other.to_string());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk("", value, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_ignores_key_order() {
        let a: serde_json::Value = serde_json::from_str(r#"{"x":1,"y":{"b":2,"a":3}}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"y":{"a":3,"b":2},"x":1}"#).unwrap();
        assert_eq!(fingerprint(&a), fingerprint(&b));
        assert_ne!(fingerprint(&a), fingerprint(&serde_json::json!({"x": 2})));
    }

    #[test]
    fn key_value_and_json_agree() {
        let mut a = RunConfig::default();
        a.merge_text("ablation.n_rounds = 5\nlocale = comma\n# note\nstrict=true").unwrap();
        let mut b = RunConfig::default();
        b.merge_text(r#"{"strict": true, "locale": "comma", "ablation": {"n_rounds": 5}}"#).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ablation.n_rounds, 5);
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), RunConfig::default().fingerprint());
        let moved = RunConfig { out: Some("elsewhere".into()), ..a.clone() };
        assert_eq!(moved.fingerprint(), a.fingerprint());
    }

    #[test]
    fn bad_config_is_rejected() {
        let mut c = RunConfig::default();
        assert!(c.merge_text("ablation.n_rounds = many").is_err());
        assert!(c.merge_text("no equals sign").is_err());
    }
}
