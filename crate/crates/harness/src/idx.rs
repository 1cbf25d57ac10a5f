//! Big-endian IDX files as distributed for MNIST.
//!
//! Layout: a 4-byte magic (`0x00000803` for 3-d unsigned-byte images,
//! `0x00000801` for 1-d labels), one 4-byte count per dimension, then the
//! payload in row-major order.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const MNIST_SIDE: usize = 28;

#[derive(Debug, Error)]
pub enum IdxError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic number at byte 0: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { path: PathBuf, expected: u32, found: u32 },
    #[error("{path}: truncated at byte {offset}: need {needed} bytes, file has {len}")]
    Truncated {
        path: PathBuf,
        offset: usize,
        needed: usize,
        len: usize,
    },
    #[error("{path}: images are {rows}x{cols} at byte 8, expected {MNIST_SIDE}x{MNIST_SIDE}")]
    WrongShape { path: PathBuf, rows: usize, cols: usize },
    #[error("{path}: {extra} trailing bytes after the payload ending at byte {offset}")]
    TrailingBytes { path: PathBuf, offset: usize, extra: usize },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdxDataset {
    /// Row-major 28×28 pixels scaled to `[0, 1]`.
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl IdxDataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
}

impl Reader<'_> {
    fn slice(&self, offset: usize, len: usize) -> Result<&[u8], IdxError> {
        self.bytes.get(offset..offset + len).ok_or_else(|| IdxError::Truncated {
            path: self.path.to_path_buf(),
            offset: offset.min(self.bytes.len()),
            needed: offset + len,
            len: self.bytes.len(),
        })
    }

    fn u32_at(&self, offset: usize) -> Result<u32, IdxError> {
        let b = self.slice(offset, 4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn magic(&self, expected: u32) -> Result<(), IdxError> {
        let found = self.u32_at(0)?;
        if found != expected {
            return Err(IdxError::BadMagic {
                path: self.path.to_path_buf(),
                expected,
                found,
            });
        }
        Ok(())
    }

    fn payload(&self, offset: usize, len: usize) -> Result<&[u8], IdxError> {
        let p = self.slice(offset, len)?;
        let end = offset + len;
        if self.bytes.len() > end {
            return Err(IdxError::TrailingBytes {
                path: self.path.to_path_buf(),
                offset: end,
                extra: self.bytes.len() - end,
            });
        }
        Ok(p)
    }
}

fn read(path: &Path) -> Result<Vec<u8>, IdxError> {
    fs::read(path).map_err(|source| IdxError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Raw image bytes, one `Vec` of `28·28` pixels per image.
pub fn parse_images(path: &Path, bytes: &[u8]) -> Result<Vec<Vec<u8>>, IdxError> {
    let r = Reader { path, bytes };
    r.magic(IMAGE_MAGIC)?;
    let count = r.u32_at(4)? as usize;
    let (rows, cols) = (r.u32_at(8)? as usize, r.u32_at(12)? as usize);
    if rows != MNIST_SIDE || cols != MNIST_SIDE {
        return Err(IdxError::WrongShape {
            path: path.to_path_buf(),
            rows,
            cols,
        });
    }
    let size = rows * cols;
    let payload = r.payload(16, count * size)?;
    Ok(payload.chunks_exact(size).map(<[u8]>::to_vec).collect())
}

pub fn parse_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    let r = Reader { path, bytes };
    r.magic(LABEL_MAGIC)?;
    let count = r.u32_at(4)? as usize;
    Ok(r.payload(8, count)?.to_vec())
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<IdxDataset, IdxError> {
    let images = parse_images(images_path, &read(images_path)?)?;
    let labels = parse_labels(labels_path, &read(labels_path)?)?;
    if images.len() != labels.len() {
        return Err(IdxError::CountMismatch {
            images: images.len(),
            labels: labels.len(),
        });
    }
    Ok(IdxDataset {
        images: images
            .iter()
            .map(|img| img.iter().map(|&p| p as f64 / 255.0).collect())
            .collect(),
        labels,
    })
}

/// Encodes 28×28 images in the IDX image format.
pub fn encode_images(images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * MNIST_SIDE * MNIST_SIDE);
    for v in [IMAGE_MAGIC, images.len() as u32, MNIST_SIDE as u32, MNIST_SIDE as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        assert_eq!(img.len(), MNIST_SIDE * MNIST_SIDE, "IDX images are 28x28");
        out.extend_from_slice(img);
    }
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn write_idx(images_path: &Path, labels_path: &Path, images: &[Vec<u8>], labels: &[u8]) -> Result<(), IdxError> {
    let write = |path: &Path, bytes: Vec<u8>| {
        fs::write(path, bytes).map_err(|source| IdxError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    write(images_path, encode_images(images))?;
    write(labels_path, encode_labels(labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(seed: u8) -> Vec<u8> {
        (0..784).map(|i| (i as u8).wrapping_mul(seed)).collect()
    }

    #[test]
    fn header_fields() {
        let bytes = encode_images(&[image(3)]);
        assert_eq!(&bytes[..4], &[0, 0, 8, 3]);
        assert_eq!(bytes.len(), 16 + 784);
        assert_eq!(parse_images(Path::new("x"), &bytes).unwrap(), vec![image(3)]);
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode_images(&[image(1), image(2)]);
        let err = parse_images(Path::new("x"), &bytes[..100]).unwrap_err();
        match err {
            IdxError::Truncated { offset, needed, len, .. } => {
                assert_eq!((offset, needed, len), (16, 16 + 2 * 784, 100));
            }
            other => panic!("{other}"),
        }
        assert!(matches!(
            parse_labels(Path::new("y"), &[0, 0, 8]),
            Err(IdxError::Truncated { offset: 0, .. })
        ));
    }

    #[test]
    fn wrong_magic_and_trailing() {
        let labels = encode_labels(&[1, 2]);
        assert!(matches!(
            parse_images(Path::new("x"), &labels),
            Err(IdxError::BadMagic { found: 0x801, .. })
        ));
        let mut extra = labels.clone();
        extra.push(9);
        let err = parse_labels(Path::new("y"), &extra).unwrap_err();
        assert!(err.to_string().contains("byte 10"), "{err}");
    }
}
