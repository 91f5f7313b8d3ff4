//! Pipeline configuration files and `key=value` overrides.
//!
//! A config file is a JSON object mirroring [`PipelineConfig`]; missing keys
//! take defaults and unknown keys are rejected. Overrides address fields by
//! dotted path (`noise.mask_fraction=0.2`) and are applied after the file is
//! read. Override values are parsed as JSON when possible and as bare strings
//! otherwise.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use thiserror::Error;

use crate::pipeline::PipelineConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("override `{0}` is not of the form key=value")]
    OverrideSyntax(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    pub fn invalid(key: &str, reason: &str) -> Self {
        ConfigError::Invalid {
            key: key.to_owned(),
            reason: reason.to_owned(),
        }
    }
}

/// Reads an optional config file and applies overrides in order.
pub fn load_config(
    path: Option<&Path>,
    overrides: &[String],
) -> Result<PipelineConfig, ConfigError> {
    let mut value = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.to_owned(),
                source,
            })?;
            serde_json::from_str::<Value>(&text)?
        }
        None => Value::Object(Default::default()),
    };
    // reject unknown keys in the file before merging overrides into it
    let _: PipelineConfig = serde_json::from_value(value.clone())?;

    let schema = serde_json::to_value(PipelineConfig::default())?;
    for raw in overrides {
        apply_override(&mut value, &schema, raw)?;
    }
    let config: PipelineConfig = serde_json::from_value(value)?;
    config.validate()?;
    Ok(config)
}

fn apply_override(value: &mut Value, schema: &Value, raw: &str) -> Result<(), ConfigError> {
    let (key, val) = raw
        .split_once('=')
        .ok_or_else(|| ConfigError::OverrideSyntax(raw.to_owned()))?;
    let key = key.trim();
    let path: Vec<&str> = key.split('.').collect();

    let mut schema_node = schema;
    for part in &path {
        schema_node = schema_node
            .get(part)
            .ok_or_else(|| ConfigError::UnknownKey(key.to_owned()))?;
    }
    if schema_node.is_object() {
        return Err(ConfigError::invalid(key, "cannot override a whole section"));
    }

    let parsed = match serde_json::from_str::<Value>(val) {
        Ok(v) => v,
        Err(_) => Value::String(val.to_owned()),
    };

    let mut node = value;
    for part in &path[..path.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| ConfigError::invalid(key, "parent is not an object"))?;
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    node.as_object_mut()
        .ok_or_else(|| ConfigError::invalid(key, "parent is not an object"))?
        .insert(path[path.len() - 1].to_owned(), parsed);
    Ok(())
}
