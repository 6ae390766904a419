//! JSON loading and atomic file output.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::repr::{FeatureMap, LowRankModel};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_mdp(path: &Path) -> Result<TabularMdp> {
    let mdp: TabularMdp = load_json(path)?;
    mdp.validate()?;
    Ok(mdp)
}

pub fn load_feature_map(path: &Path) -> Result<FeatureMap> {
    let fm: FeatureMap = load_json(path)?;
    fm.validate()?;
    Ok(fm)
}

pub fn load_model(path: &Path) -> Result<LowRankModel> {
    load_json(path)
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn save_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("in-memory serialization cannot fail");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Serializes `rows` (with a header derived from the row type) and writes atomically.
pub fn save_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })?;
    }
    let bytes = w.into_inner().expect("writing to memory cannot fail");
    write_atomic(path, &bytes)
}
