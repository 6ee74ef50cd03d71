//! Big-endian IDX files as used by the MNIST family of datasets.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::Dataset;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::format(offset as u64, format!("file truncated while reading {what}")))
}

/// Parse an image file; returns `(count, rows, cols, pixels scaled to [0, 1])`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f32>)> {
    let magic = be_u32(bytes, 0, "magic number")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(
            0,
            format!("bad image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"),
        ));
    }
    let n = be_u32(bytes, 4, "image count")? as usize;
    let rows = be_u32(bytes, 8, "row count")? as usize;
    let cols = be_u32(bytes, 12, "column count")? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::format(8, format!("degenerate image size {rows}×{cols}")));
    }
    let need = n
        .checked_mul(rows * cols)
        .ok_or_else(|| Error::format(4, "image count overflows"))?;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::format(
            (16 + body.len()) as u64,
            format!("file truncated: {need} pixel bytes declared, {} present", body.len()),
        ));
    }
    if body.len() > need {
        return Err(Error::format((16 + need) as u64, "trailing bytes after pixel data"));
    }
    let pixels = body.iter().map(|&b| b as f32 / 255.0).collect();
    Ok((n, rows, cols, pixels))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0, "magic number")?;
    if magic != LABEL_MAGIC {
        return Err(Error::format(
            0,
            format!("bad label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"),
        ));
    }
    let n = be_u32(bytes, 4, "label count")? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(Error::format(
            (8 + body.len()) as u64,
            format!("file truncated: {n} labels declared, {} present", body.len()),
        ));
    }
    if body.len() > n {
        return Err(Error::format((8 + n) as u64, "trailing bytes after labels"));
    }
    Ok(body.iter().map(|&b| b as usize).collect())
}

/// Load an image/label file pair into a dataset of `[N, 1, rows, cols]`
/// images. The class count is one more than the largest label.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let img_bytes = std::fs::read(images_path.as_ref())?;
    let lbl_bytes = std::fs::read(labels_path.as_ref())?;
    let (n, rows, cols, pixels) = parse_idx_images(&img_bytes)?;
    let labels = parse_idx_labels(&lbl_bytes)?;
    if labels.len() != n {
        return Err(Error::format(
            4,
            format!(
                "image count {n} ({}) does not match label count {} ({})",
                images_path.as_ref().display(),
                labels.len(),
                labels_path.as_ref().display()
            ),
        ));
    }
    if n == 0 {
        return Err(Error::data("IDX files contain no samples"));
    }
    let images = Tensor::new(vec![n, 1, rows, cols], pixels)?;
    Dataset::with_inferred_classes(images, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn image_file(n: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = IMAGE_MAGIC.to_be_bytes().to_vec();
        for v in [n, rows, cols] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(pixels);
        b
    }

    pub(crate) fn label_file(labels: &[u8]) -> Vec<u8> {
        let mut b = LABEL_MAGIC.to_be_bytes().to_vec();
        b.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        b.extend_from_slice(labels);
        b
    }

    fn write(dir: &tempfile::TempDir, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn four_image_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..4 * 2 * 3).map(|i| (i * 10) as u8).collect();
        let ip = write(&dir, "img", &image_file(4, 2, 3, &pixels));
        let lp = write(&dir, "lbl", &label_file(&[3, 1, 0, 2]));
        let d = load_idx(&ip, &lp).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.sample_shape(), &[1, 2, 3]);
        assert_eq!(d.labels(), &[3, 1, 0, 2]);
        assert_eq!(d.n_classes(), 4);
        assert_eq!(d.images().data()[1], 10.0 / 255.0);
        assert_eq!(d.images().data()[23], 230.0 / 255.0);
    }

    #[test]
    fn wrong_magic_is_offset_zero() {
        let mut bytes = image_file(1, 1, 1, &[0]);
        bytes[3] = 0x01;
        match parse_idx_images(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("{other:?}"),
        }
        match parse_idx_labels(&image_file(1, 1, 1, &[0])) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncation_names_the_offset() {
        let bytes = image_file(2, 2, 2, &[1, 2, 3]);
        match parse_idx_images(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 19),
            other => panic!("{other:?}"),
        }
        match parse_idx_images(&bytes[..10]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn count_mismatch_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let ip = write(&dir, "img", &image_file(2, 1, 1, &[0, 255]));
        let lp = write(&dir, "lbl", &label_file(&[1, 0, 1]));
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Format { offset: 4, .. })));
    }
}
