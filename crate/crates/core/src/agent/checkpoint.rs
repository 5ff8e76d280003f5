//! Parameter checkpoints.
//!
//! A checkpoint is two files sharing a stem:
//!
//! - `<stem>.json`: manifest with `format_version`, `feature_layout_version`, the
//!   architecture, the dropout rate and, for every tensor, its `name`, `rows` and `cols`.
//! - `<stem>.csv`: header `tensor,row,col,value`, one line per scalar, tensors in
//!   manifest order, entries row-major. Values use the shortest exact decimal form.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::features::FEATURE_LAYOUT_VERSION;
use super::network::{Architecture, NetworkParams};
use crate::bidlog::N_KPI;
use crate::error::{Error, Result};
use crate::fsutil::ensure_parent;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorShape {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub feature_layout_version: u32,
    pub architecture: Architecture,
    pub dropout_rate: f64,
    pub tensors: Vec<TensorShape>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorRow {
    tensor: String,
    row: usize,
    col: usize,
    value: f64,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("csv"))
}

pub fn save_checkpoint(params: &NetworkParams, stem: &Path) -> Result<()> {
    let (manifest_path, data_path) = paths(stem);
    ensure_parent(&manifest_path)?;
    let tensors = params.tensors();
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_FORMAT_VERSION,
        feature_layout_version: FEATURE_LAYOUT_VERSION,
        architecture: params.architecture().clone(),
        dropout_rate: params.dropout_rate(),
        tensors: tensors
            .iter()
            .map(|(name, rows, cols, _)| TensorShape {
                name: name.clone(),
                rows: *rows,
                cols: *cols,
            })
            .collect(),
    };
    let file = File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, &manifest).map_err(|e| Error::Malformed {
        path: manifest_path.clone(),
        message: e.to_string(),
    })?;
    out.write_all(b"\n").map_err(|e| Error::io(&manifest_path, e))?;
    out.flush().map_err(|e| Error::io(&manifest_path, e))?;

    let file = File::create(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    for (name, _, cols, values) in &tensors {
        for (i, &value) in values.iter().enumerate() {
            writer
                .serialize(TensorRow {
                    tensor: name.clone(),
                    row: i / cols,
                    col: i % cols,
                    value,
                })
                .map_err(|e| Error::Malformed {
                    path: data_path.clone(),
                    message: e.to_string(),
                })?;
        }
    }
    writer.flush().map_err(|e| Error::io(&data_path, e))
}

pub fn load_checkpoint(stem: &Path) -> Result<NetworkParams> {
    let (manifest_path, data_path) = paths(stem);
    let file = File::open(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: CheckpointManifest =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Malformed {
            path: manifest_path.clone(),
            message: e.to_string(),
        })?;
    if manifest.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::SchemaVersion {
            path: manifest_path,
            found: manifest.format_version,
            expected: CHECKPOINT_FORMAT_VERSION,
        });
    }
    if manifest.feature_layout_version != FEATURE_LAYOUT_VERSION {
        return Err(Error::SchemaVersion {
            path: manifest_path,
            found: manifest.feature_layout_version,
            expected: FEATURE_LAYOUT_VERSION,
        });
    }
    if manifest.architecture.output != N_KPI {
        return Err(Error::Malformed {
            path: manifest_path,
            message: format!("network output must be {N_KPI}"),
        });
    }

    let malformed = |message: String| Error::Malformed {
        path: data_path.clone(),
        message,
    };
    let file = File::open(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let mut rows = reader.deserialize::<TensorRow>();
    let mut theta = Vec::with_capacity(manifest.architecture.parameter_count());
    for shape in &manifest.tensors {
        for i in 0..shape.rows * shape.cols {
            let row = rows
                .next()
                .ok_or_else(|| malformed(format!("tensor {} is truncated", shape.name)))?
                .map_err(|e| malformed(e.to_string()))?;
            if row.tensor != shape.name || row.row != i / shape.cols || row.col != i % shape.cols {
                return Err(malformed(format!(
                    "expected {}[{}, {}], found {}[{}, {}]",
                    shape.name,
                    i / shape.cols,
                    i % shape.cols,
                    row.tensor,
                    row.row,
                    row.col
                )));
            }
            theta.push(row.value);
        }
    }
    if rows.next().is_some() {
        return Err(malformed("trailing rows after the last tensor".into()));
    }
    let params = NetworkParams::from_flat(manifest.architecture, theta, manifest.dropout_rate)?;
    let expected: Vec<(String, usize, usize)> = params
        .tensors()
        .into_iter()
        .map(|(n, r, c, _)| (n, r, c))
        .collect();
    let declared: Vec<(String, usize, usize)> = manifest
        .tensors
        .into_iter()
        .map(|t| (t.name, t.rows, t.cols))
        .collect();
    if expected != declared {
        return Err(Error::Malformed {
            path: stem.with_extension("json"),
            message: "tensor list does not match the architecture".into(),
        });
    }
    Ok(params)
}
