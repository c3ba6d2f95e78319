//! On-disk formats: alist parity-check matrices and quantizer JSON.
//!
//! A quantizer file is the JSON form of [`QuantizerModel`]:
//!
//! ```text
//! {
//!   "format": "cfrelay-quantizer",
//!   "version": 1,
//!   "generator": ["0 0 D 1 0", ...],      // generator matrix rows
//!   "params": {"kind": "qam16", "scale": 2.0, "ring_ratio": 1.5},
//!   "codebook": [{"re": .., "im": ..}, ...], // indexed by trellis label
//!   "family": "state_union" | "subset" | null,
//!   "cells": {"type": "voronoi", "sets": [[labels of quantizer 0], ...]}
//!          | {"type": "product", "re": [inner bounds], "im": [inner bounds]},
//!   "choice_probs": [[P(Q_i | x1 = 0) for each i], ...]
//! }
//! ```
//!
//! Files with another `format` or `version` are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use cfrelay_core::ldpc::LdpcCode;
use cfrelay_core::tcq::QuantizerModel;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Content { path: PathBuf, source: cfrelay_core::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

fn read(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(|source| FileError::Io { path: path.into(), source })
}

fn write(path: &Path, text: &str) -> Result<(), FileError> {
    fs::write(path, text).map_err(|source| FileError::Io { path: path.into(), source })
}

pub fn load_alist(path: &Path) -> Result<LdpcCode, FileError> {
    LdpcCode::from_alist(&read(path)?).map_err(|source| FileError::Content { path: path.into(), source })
}

pub fn save_alist(path: &Path, code: &LdpcCode) -> Result<(), FileError> {
    write(path, &code.to_alist())
}

/// Loads and validates a quantizer for a `symbols`-ary source.
pub fn load_quantizer(path: &Path, symbols: usize) -> Result<QuantizerModel, FileError> {
    let model: QuantizerModel =
        serde_json::from_str(&read(path)?).map_err(|source| FileError::Json { path: path.into(), source })?;
    model.validate(symbols).map_err(|source| FileError::Content { path: path.into(), source })?;
    Ok(model)
}

pub fn save_quantizer(path: &Path, model: &QuantizerModel) -> Result<(), FileError> {
    let text = serde_json::to_string_pretty(model).map_err(|source| FileError::Json { path: path.into(), source })?;
    write(path, &(text + "\n"))
}
