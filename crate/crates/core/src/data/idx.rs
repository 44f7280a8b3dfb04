//! IDX container format (MNIST family).
//!
//! Big-endian `u32` magic (`0x00 0x00 type ndim`), one big-endian `u32` per
//! dimension, then the raw payload. Only unsigned-byte payloads (`type 0x08`)
//! are supported.

use std::path::Path;

use super::LabeledDataset;
use crate::{Error, Result, Tensor};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn parse<'a>(bytes: &'a [u8], magic: u32, path: &Path) -> Result<(Vec<usize>, &'a [u8])> {
    let word = |i: usize| -> Result<usize> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| u32::from_be_bytes(b.try_into().unwrap()) as usize)
            .ok_or_else(|| Error::format(path, "truncated header"))
    };
    let found = word(0)? as u32;
    if found != magic {
        return Err(Error::format(
            path,
            format!("bad magic 0x{found:08x}, expected 0x{magic:08x}"),
        ));
    }
    let ndim = (magic & 0xff) as usize;
    let dims = (1..=ndim).map(word).collect::<Result<Vec<_>>>()?;
    let payload = &bytes[4 * (ndim + 1)..];
    let expected: usize = dims.iter().product();
    if payload.len() < expected {
        return Err(Error::format(
            path,
            format!("truncated payload: {} of {expected} bytes", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(
            path,
            format!("{} unexpected trailing bytes", payload.len() - expected),
        ));
    }
    Ok((dims, payload))
}

/// Loads an image/label IDX pair, scaling pixels to `[0, 1]`.
///
/// Images keep their stored shape, e.g. `N x 28 x 28`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    load_idx_prefix(images_path, labels_path, None)
}

/// As [`load_idx`], keeping only the first `limit` items. The whole file is
/// still validated.
pub fn load_idx_prefix(images_path: &Path, labels_path: &Path, limit: Option<usize>) -> Result<LabeledDataset> {
    let image_bytes = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let label_bytes = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let (dims, pixels) = parse(&image_bytes, IDX_IMAGES_MAGIC, images_path)?;
    let (label_dims, labels) = parse(&label_bytes, IDX_LABELS_MAGIC, labels_path)?;
    if dims[0] != label_dims[0] {
        return Err(Error::format(
            labels_path,
            format!("{} labels for {} images", label_dims[0], dims[0]),
        ));
    }
    if dims[0] == 0 {
        return Err(Error::EmptyDataset);
    }
    let n = limit.map_or(dims[0], |l| l.min(dims[0]));
    let item: usize = dims[1..].iter().product();
    let labels: Vec<usize> = labels[..n].iter().map(|&l| l as usize).collect();
    let classes = labels.iter().max().map_or(0, |&m| m + 1).max(10);
    let mut shape = dims;
    shape[0] = n;
    let inputs = Tensor::new(shape, pixels[..n * item].iter().map(|&p| p as f64 / 255.0).collect())?;
    let source = images_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    LabeledDataset::new(inputs, labels, classes, &source)
}

/// IDX bytes for `count` images of `rows x cols` unsigned-byte pixels.
pub fn encode_idx_images(count: usize, rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), count * rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for word in [IDX_IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    for word in [IDX_LABELS_MAGIC, labels.len() as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn two_image_fixture_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..2 * 3 * 2).map(|i| (i * 21) as u8).collect();
        let img = write(dir.path(), "img", &encode_idx_images(2, 3, 2, &pixels));
        let lab = write(dir.path(), "lab", &encode_idx_labels(&[7, 2]));
        let ds = load_idx(&img, &lab).unwrap();
        assert_eq!(ds.inputs.shape(), &[2, 3, 2]);
        assert_eq!(ds.labels, vec![7, 2]);
        let back: Vec<u8> = ds.inputs.data().iter().map(|v| (v * 255.0).round() as u8).collect();
        assert_eq!(back, pixels);
        let first = load_idx_prefix(&img, &lab, Some(1)).unwrap();
        assert_eq!(first.inputs.shape(), &[1, 3, 2]);
        assert_eq!(first.inputs.data(), &ds.inputs.data()[..6]);
        assert_eq!(first.labels, vec![7]);
    }

    #[test]
    fn labels_with_image_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let img = write(dir.path(), "img", &encode_idx_images(1, 1, 1, &[3]));
        let mut bad = encode_idx_labels(&[1]);
        bad[3] = 0x03;
        let lab = write(dir.path(), "lab", &bad);
        let err = load_idx(&img, &lab).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn truncation_and_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let full = encode_idx_images(2, 2, 2, &[0; 8]);
        let img = write(dir.path(), "img", &full[..full.len() - 1]);
        let lab = write(dir.path(), "lab", &encode_idx_labels(&[0, 1]));
        assert!(load_idx(&img, &lab).unwrap_err().to_string().contains("truncated"));

        let img = write(dir.path(), "img2", &full);
        let lab = write(dir.path(), "lab2", &encode_idx_labels(&[0, 1, 2]));
        assert!(load_idx(&img, &lab).unwrap_err().to_string().contains("labels for"));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_idx(Path::new("/nonexistent/imgs"), Path::new("/nonexistent/labs")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/imgs"));
    }
}
