//! CIFAR-10 binary batches: each record is one label byte followed by
//! 3072 pixel bytes (1024 red, 1024 green, 1024 blue, row-major).

use std::fs;
use std::path::Path;

use super::{Dataset, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::nn::InputShape;

pub const CIFAR_RECORD_BYTES: usize = 1 + 3 * 32 * 32;

/// Appends the records in `bytes` to `images`/`labels`; `path` names the
/// source in errors.
fn append_records(bytes: &[u8], path: &Path, images: &mut Vec<f32>, labels: &mut Vec<u8>) -> Result<()> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(CIFAR_RECORD_BYTES) {
        return Err(Error::ingest(
            path,
            format!(
                "length {} is not a positive multiple of the {CIFAR_RECORD_BYTES}-byte record size",
                bytes.len()
            ),
        ));
    }
    for record in bytes.chunks_exact(CIFAR_RECORD_BYTES) {
        if record[0] as usize >= CLASS_COUNT {
            return Err(Error::ingest(path, format!("label {} outside 0..{CLASS_COUNT}", record[0])));
        }
        labels.push(record[0]);
        images.extend(record[1..].iter().map(|&p| p as f32 / 255.0));
    }
    Ok(())
}

pub fn parse_cifar10(bytes: &[u8], name: &Path) -> Result<Dataset> {
    let (mut images, mut labels) = (Vec::new(), Vec::new());
    append_records(bytes, name, &mut images, &mut labels)?;
    Dataset::new(images, labels, InputShape::new(3, 32, 32), CLASS_COUNT)
}

/// Loads and concatenates CIFAR-10 batch files in the order given.
pub fn load_cifar10<P: AsRef<Path>>(paths: &[P]) -> Result<Dataset> {
    if paths.is_empty() {
        return Err(Error::config("no CIFAR-10 batch files given"));
    }
    let (mut images, mut labels) = (Vec::new(), Vec::new());
    for p in paths {
        let p = p.as_ref();
        let bytes = fs::read(p).map_err(|e| Error::ingest(p, e.to_string()))?;
        append_records(&bytes, p, &mut images, &mut labels)?;
    }
    Dataset::new(images, labels, InputShape::new(3, 32, 32), CLASS_COUNT)
}

/// Encodes a 3x32x32 dataset in the CIFAR-10 binary format.
pub fn encode_cifar10(ds: &Dataset) -> Result<Vec<u8>> {
    if ds.shape() != InputShape::new(3, 32, 32) {
        return Err(Error::config("CIFAR-10 records hold 3x32x32 images"));
    }
    let mut out = Vec::with_capacity(ds.len() * CIFAR_RECORD_BYTES);
    for i in 0..ds.len() {
        out.push(ds.labels()[i]);
        out.extend(ds.image(i).iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    Ok(out)
}
