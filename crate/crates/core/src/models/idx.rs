//! IDX tensor files as used by the MNIST distribution.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::models::Dataset;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Decoded IDX contents. Image bytes are scaled to `[0, 1]`; label bytes are kept as is.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxTensor {
    pub magic: u32,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

impl IdxTensor {
    pub fn is_images(&self) -> bool {
        self.magic == IMAGE_MAGIC
    }
}

fn format_err(path: &Path, offset: usize, message: String) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        message,
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Option<u32> {
    let b = bytes.get(offset..offset + 4)?;
    Some(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

pub fn parse_idx(path: &Path, bytes: &[u8]) -> Result<IdxTensor> {
    let magic = be_u32(bytes, 0).ok_or_else(|| {
        format_err(path, bytes.len(), "file ends before the 4-byte magic".into())
    })?;
    let n_dims = match magic {
        IMAGE_MAGIC => 3,
        LABEL_MAGIC => 1,
        other => {
            return Err(format_err(
                path,
                0,
                format!(
                    "bad magic: expected 0x{IMAGE_MAGIC:08x} (images) or 0x{LABEL_MAGIC:08x} (labels), found 0x{other:08x}"
                ),
            ))
        }
    };
    let mut dims = Vec::with_capacity(n_dims);
    for j in 0..n_dims {
        let off = 4 + 4 * j;
        let v = be_u32(bytes, off).ok_or_else(|| {
            format_err(path, bytes.len(), format!("file ends inside dimension {j}"))
        })?;
        dims.push(v as usize);
    }
    let header = 4 + 4 * n_dims;
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &x| acc.checked_mul(x))
        .ok_or_else(|| format_err(path, 4, "dimension product overflows".into()))?;
    let available = bytes.len() - header;
    if available < count {
        return Err(format_err(
            path,
            bytes.len(),
            format!("truncated data: expected {count} bytes after the header, found {available}"),
        ));
    }
    let raw = &bytes[header..header + count];
    let values = if magic == IMAGE_MAGIC {
        raw.iter().map(|&b| f64::from(b) / 255.0).collect()
    } else {
        raw.iter().map(|&b| f64::from(b)).collect()
    };
    Ok(IdxTensor { magic, dims, values })
}

pub fn read_idx(path: &Path) -> Result<IdxTensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx(path, &bytes)
}

/// Load an image/label IDX file pair into a dataset of flattened images.
pub fn read_idx_pair(images: &Path, labels: &Path) -> Result<Dataset> {
    let img = read_idx(images)?;
    let lab = read_idx(labels)?;
    if !img.is_images() {
        return Err(Error::InvalidDataset(format!("{} is not an image file", images.display())));
    }
    if lab.is_images() {
        return Err(Error::InvalidDataset(format!("{} is not a label file", labels.display())));
    }
    if img.dims[0] != lab.dims[0] {
        return Err(Error::InvalidDataset(format!(
            "{} images but {} labels",
            img.dims[0], lab.dims[0]
        )));
    }
    let n_features = img.dims[1] * img.dims[2];
    let labels = lab.values.iter().map(|&v| v as u32).collect();
    Dataset::new(n_features, img.values, labels)
}

/// File paths of an MNIST split (`train` or `t10k`) inside `dir`.
pub fn mnist_paths(dir: &Path, split: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{split}-images-idx3-ubyte")),
        dir.join(format!("{split}-labels-idx1-ubyte")),
    )
}

pub fn load_mnist(dir: &Path, split: &str) -> Result<Dataset> {
    let (images, labels) = mnist_paths(dir, split);
    read_idx_pair(&images, &labels)
}
