//! IDX containers (the MNIST distribution format).
//!
//! Images are rank-3 IDX files of unsigned bytes (magic `0x00000803`) or of
//! f64 values (magic `0x00000E03`, used for exported generated data); labels
//! are rank-1 unsigned byte files (magic `0x00000801`). All header integers
//! and f64 payloads are big-endian.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::types::{LabeledImageSet, RawImage};

pub const IDX_IMAGES_U8: u32 = 0x0000_0803;
pub const IDX_IMAGES_F64: u32 = 0x0000_0E03;
pub const IDX_LABELS_U8: u32 = 0x0000_0801;

/// Element type used when writing images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdxValueType {
    /// Values rounded and clamped to `0..=255`.
    U8,
    F64,
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::TruncatedFile { path: path.to_path_buf(), reason: e.to_string() })
}

fn truncated(path: &Path, reason: impl Into<String>) -> Error {
    Error::TruncatedFile { path: path.to_path_buf(), reason: reason.into() }
}

fn be_u32(data: &[u8], at: usize, path: &Path) -> Result<u32> {
    data.get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| truncated(path, "header ends early"))
}

/// Reads an images file.
pub fn read_idx_images(path: impl AsRef<Path>) -> Result<Vec<RawImage>> {
    let path = path.as_ref();
    let data = read_file(path)?;
    let magic = be_u32(&data, 0, path)?;
    let elem = match magic {
        IDX_IMAGES_U8 => 1,
        IDX_IMAGES_F64 => 8,
        found => return Err(Error::BadMagic { path: path.to_path_buf(), found }),
    };
    let count = be_u32(&data, 4, path)? as usize;
    let rows = be_u32(&data, 8, path)? as usize;
    let cols = be_u32(&data, 12, path)? as usize;
    let pixels = rows * cols;
    let needed = count
        .checked_mul(pixels)
        .and_then(|n| n.checked_mul(elem))
        .ok_or_else(|| truncated(path, "dimensions overflow"))?;
    let payload = &data[16..];
    if payload.len() < needed {
        return Err(truncated(path, format!("expected {needed} payload bytes, found {}", payload.len())));
    }
    let images = (0..count)
        .map(|i| {
            let chunk = &payload[i * pixels * elem..(i + 1) * pixels * elem];
            let values: Vec<f64> = if elem == 1 {
                chunk.iter().map(|&b| b as f64).collect()
            } else {
                chunk.chunks_exact(8).map(|c| f64::from_be_bytes(c.try_into().unwrap())).collect()
            };
            RawImage::new(rows, cols, values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(images)
}

fn read_idx_labels(path: &Path) -> Result<Vec<usize>> {
    let data = read_file(path)?;
    let magic = be_u32(&data, 0, path)?;
    if magic != IDX_LABELS_U8 {
        return Err(Error::BadMagic { path: path.to_path_buf(), found: magic });
    }
    let count = be_u32(&data, 4, path)? as usize;
    let payload = &data[8..];
    if payload.len() < count {
        return Err(truncated(path, format!("expected {count} labels, found {}", payload.len())));
    }
    Ok(payload[..count].iter().map(|&b| b as usize).collect())
}

/// Reads an images/labels pair. The class count is the largest label + 1.
pub fn read_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledImageSet> {
    let images = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path.as_ref())?;
    if images.len() != labels.len() {
        return Err(Error::CountMismatch { images: images.len(), labels: labels.len() });
    }
    LabeledImageSet::from_labels(images, labels)
}

/// Writes an images/labels pair.
pub fn write_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    set: &LabeledImageSet,
    value_type: IdxValueType,
) -> Result<()> {
    let (rows, cols) = set.image_shape().unwrap_or((0, 0));
    let to_u32 = |v: usize| u32::try_from(v).map_err(|_| Error::InvalidConfig(format!("{v} too large for IDX")));
    let elem = if value_type == IdxValueType::U8 { 1 } else { 8 };
    let mut img = Vec::with_capacity(16 + set.len() * rows * cols * elem);
    let magic = if value_type == IdxValueType::U8 { IDX_IMAGES_U8 } else { IDX_IMAGES_F64 };
    for v in [magic, to_u32(set.len())?, to_u32(rows)?, to_u32(cols)?] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    for image in set.images() {
        for &v in image.data() {
            match value_type {
                IdxValueType::U8 => img.push(v.round().clamp(0.0, 255.0) as u8),
                IdxValueType::F64 => img.extend_from_slice(&v.to_be_bytes()),
            }
        }
    }
    let mut lab = Vec::with_capacity(8 + set.len());
    for v in [IDX_LABELS_U8, to_u32(set.len())?] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    for &l in set.labels() {
        lab.push(u8::try_from(l).map_err(|_| Error::InvalidConfig(format!("label {l} does not fit in a byte")))?);
    }
    fs::write(images_path.as_ref(), img)?;
    fs::write(labels_path.as_ref(), lab)?;
    Ok(())
}

/// Default MNIST file names inside a directory.
pub fn mnist_paths(dir: impl AsRef<Path>, train: bool) -> (PathBuf, PathBuf) {
    let dir = dir.as_ref();
    let prefix = if train { "train" } else { "t10k" };
    (dir.join(format!("{prefix}-images-idx3-ubyte")), dir.join(format!("{prefix}-labels-idx1-ubyte")))
}
