//! Versioned JSON persistence for built models. The envelope records a
//! format version and the estimator kind; field order inside the payload is
//! the struct declaration order, fixed by serde.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    kind: String,
    model: serde_json::Value,
}

/// Writes a model under the versioned envelope; `kind` is the estimator
/// name ("avi", "mhist", ...).
pub fn save_model<M: Serialize>(path: impl AsRef<Path>, kind: &str, model: &M) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let envelope = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        kind: kind.to_owned(),
        model: serde_json::to_value(model)?,
    };
    serde_json::to_writer(&mut w, &envelope)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a model back, checking the version and kind.
pub fn load_model<M: DeserializeOwned>(path: impl AsRef<Path>, kind: &str) -> Result<M> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let envelope: ModelFile = serde_json::from_reader(BufReader::new(file))?;
    if envelope.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
            envelope.format_version
        )));
    }
    if envelope.kind != kind {
        return Err(Error::InvalidConfig(format!(
            "model file holds a {:?} model, expected {kind:?}",
            envelope.kind
        )));
    }
    Ok(serde_json::from_value(envelope.model)?)
}
