//! IDX files as used by MNIST and FashionMNIST: a big-endian header
//! (magic, then one u32 per dimension) followed by unsigned bytes.

use std::fs;
use std::path::Path;

use super::{Dataset, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::nn::InputShape;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Returns (count, rows, cols, payload).
fn parse_images(bytes: &[u8]) -> std::result::Result<(usize, usize, usize, &[u8]), String> {
    let magic = be_u32(bytes, 0).ok_or("truncated header")?;
    if magic != IMAGES_MAGIC {
        return Err(format!("bad magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}"));
    }
    let n = be_u32(bytes, 4).ok_or("truncated header")? as usize;
    let rows = be_u32(bytes, 8).ok_or("truncated header")? as usize;
    let cols = be_u32(bytes, 12).ok_or("truncated header")? as usize;
    let payload = &bytes[16..];
    let expected = n * rows * cols;
    if payload.len() < expected {
        return Err(format!("truncated: {} pixel bytes, expected {expected}", payload.len()));
    }
    Ok((n, rows, cols, &payload[..expected]))
}

fn parse_labels(bytes: &[u8]) -> std::result::Result<&[u8], String> {
    let magic = be_u32(bytes, 0).ok_or("truncated header")?;
    if magic != LABELS_MAGIC {
        return Err(format!("bad magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x}"));
    }
    let n = be_u32(bytes, 4).ok_or("truncated header")? as usize;
    let payload = &bytes[8..];
    if payload.len() < n {
        return Err(format!("truncated: {} label bytes, expected {n}", payload.len()));
    }
    Ok(&payload[..n])
}

/// Decodes in-memory IDX image and label files. `names` label the two
/// buffers in error messages.
pub fn parse_idx(images: &[u8], labels: &[u8], names: (&Path, &Path)) -> Result<Dataset> {
    let (n, rows, cols, pixels) = parse_images(images).map_err(|e| Error::ingest(names.0, e))?;
    let labels = parse_labels(labels).map_err(|e| Error::ingest(names.1, e))?;
    if labels.len() != n {
        return Err(Error::ingest(
            names.1,
            format!("{} labels but {} images in {}", labels.len(), n, names.0.display()),
        ));
    }
    if n == 0 {
        return Err(Error::ingest(names.0, "no images"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y as usize >= CLASS_COUNT) {
        return Err(Error::ingest(names.1, format!("label {bad} outside 0..{CLASS_COUNT}")));
    }
    let images = pixels.iter().map(|&p| p as f32 / 255.0).collect();
    Dataset::new(images, labels.to_vec(), InputShape::new(1, rows, cols), CLASS_COUNT)
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = fs::read(ip).map_err(|e| Error::ingest(ip, e.to_string()))?;
    let labels = fs::read(lp).map_err(|e| Error::ingest(lp, e.to_string()))?;
    parse_idx(&images, &labels, (ip, lp))
}

fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes single-channel images as an IDX image file.
pub fn encode_idx_images(ds: &Dataset) -> Result<Vec<u8>> {
    let shape = ds.shape();
    if shape.channels != 1 {
        return Err(Error::config("IDX image files hold single-channel images"));
    }
    let mut out = Vec::with_capacity(16 + ds.images().len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    for d in [ds.len(), shape.height, shape.width] {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend(ds.images().iter().map(|&v| to_byte(v)));
    Ok(out)
}

pub fn encode_idx_labels(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + ds.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    out.extend_from_slice(ds.labels());
    out
}

pub fn write_idx(ds: &Dataset, images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<()> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    fs::write(ip, encode_idx_images(ds)?).map_err(|e| Error::ingest(ip, e.to_string()))?;
    fs::write(lp, encode_idx_labels(ds)).map_err(|e| Error::ingest(lp, e.to_string()))?;
    Ok(())
}
