//! The run manifest: the resolved config plus a content-derived run id,
//! written into every output directory so any run can be reproduced from
//! its own outputs (`sir <command> --config <out>/manifest.json`).

use std::fs;
use std::path::Path;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use sir_core::{Error, Result};

/// First 12 hex digits of the SHA-256 of the manifest body (command,
/// resolved config, and any extras — everything except the id itself).
/// `serde_json` serializes object keys in sorted order, so the id depends
/// only on content.
pub fn run_id(body: &Value) -> String {
    let canonical = serde_json::to_string(body).expect("JSON value serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
}

/// Write `manifest.json` and return the run id. `extras` records
/// command-line inputs that are not part of the config (e.g. the checkpoint
/// under evaluation). Contains nothing non-deterministic: reruns of one
/// invocation produce byte-identical manifests.
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    resolved_config: &Value,
    extras: &[(&str, Value)],
) -> Result<String> {
    let mut body = Map::new();
    body.insert("command".into(), Value::String(command.into()));
    body.insert("config".into(), resolved_config.clone());
    for (key, value) in extras {
        body.insert((*key).into(), value.clone());
    }
    let body = Value::Object(body);
    let id = run_id(&body);

    let mut manifest = body.as_object().cloned().expect("body is an object");
    manifest.insert("run_id".into(), Value::String(id.clone()));
    let path = out_dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&Value::Object(manifest))
        .map_err(|e| Error::Internal(format!("serializing manifest: {e}")))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(id)
}
