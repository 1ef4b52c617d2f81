//! IDX (MNIST) ingestion.
//!
//! Headers are big-endian: a `u32` magic (`0x00000803` for images,
//! `0x00000801` for labels) followed by one `u32` per dimension. Files ending
//! in gzip magic bytes are inflated first; reported byte offsets refer to the
//! inflated stream.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::Dataset;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Ingest {
                path: path.to_path_buf(),
                offset: 0,
                reason: format!("gzip stream: {e}"),
            })?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err(&self, offset: usize, reason: impl Into<String>) -> Error {
        Error::Ingest {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            reason: reason.into(),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        let end = self.pos + 4;
        let word = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| self.err(self.bytes.len(), "truncated header"))?;
        self.pos = end;
        Ok(u32::from_be_bytes(word.try_into().unwrap()))
    }

    fn expect_magic(&mut self, magic: u32) -> Result<()> {
        let found = self.u32()?;
        if found != magic {
            return Err(self.err(0, format!("bad magic {found:#010x}, expected {magic:#010x}")));
        }
        Ok(())
    }

    fn body(&self, len: usize) -> Result<&[u8]> {
        let end = self.pos + len;
        if self.bytes.len() < end {
            return Err(self.err(
                self.bytes.len(),
                format!("truncated body: header promises {len} bytes after offset {}", self.pos),
            ));
        }
        Ok(&self.bytes[self.pos..end])
    }
}

/// Load an IDX image/label file pair as a 10-class dataset with pixels scaled
/// to `[0, 1]`.
pub fn load_mnist_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();

    let image_bytes = read_maybe_gz(images_path)?;
    let mut images = Cursor {
        path: images_path,
        bytes: &image_bytes,
        pos: 0,
    };
    images.expect_magic(IMAGES_MAGIC)?;
    let count = images.u32()? as usize;
    let rows = images.u32()? as usize;
    let cols = images.u32()? as usize;
    let pixels = images.body(count * rows * cols)?;

    let label_bytes = read_maybe_gz(labels_path)?;
    let mut labels = Cursor {
        path: labels_path,
        bytes: &label_bytes,
        pos: 0,
    };
    labels.expect_magic(LABELS_MAGIC)?;
    let label_count = labels.u32()? as usize;
    if label_count != count {
        return Err(labels.err(
            4,
            format!("label count {label_count} does not match image count {count}"),
        ));
    }
    let raw_labels = labels.body(count)?;
    if let Some(pos) = raw_labels.iter().position(|&l| l > 9) {
        return Err(labels.err(8 + pos, format!("label {} outside 0..=9", raw_labels[pos])));
    }

    let features = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    Dataset::classification(
        features,
        rows * cols,
        raw_labels.iter().map(|&l| l as u32).collect(),
        10,
    )
}
