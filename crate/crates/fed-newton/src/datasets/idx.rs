//! IDX binary loader (the MNIST distribution format).

use std::path::Path;

use crate::error::{Error, Result};
use crate::glm::Sample;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Loads an image/label IDX file pair into samples with pixel values scaled
/// to [0, 1]. Image and label counts must agree.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Vec<Sample>> {
    let images = std::fs::read(images_path)
        .map_err(|e| Error::io(images_path.display().to_string(), e))?;
    let labels = std::fs::read(labels_path)
        .map_err(|e| Error::io(labels_path.display().to_string(), e))?;

    let mut off = 0u64;
    let magic = read_u32_be(&images, &mut off, images_path)?;
    if magic != IMAGES_MAGIC {
        return Err(bad(images_path, 0, format!("image magic {magic:#010x} != {IMAGES_MAGIC:#010x}")));
    }
    let count = read_u32_be(&images, &mut off, images_path)? as usize;
    let rows = read_u32_be(&images, &mut off, images_path)? as usize;
    let cols = read_u32_be(&images, &mut off, images_path)? as usize;
    let dim = rows * cols;
    let expected = 16 + count * dim;
    if images.len() != expected {
        return Err(bad(
            images_path,
            images.len() as u64,
            format!("expected {expected} bytes for {count} images of {rows}x{cols}, found {}", images.len()),
        ));
    }

    let mut loff = 0u64;
    let lmagic = read_u32_be(&labels, &mut loff, labels_path)?;
    if lmagic != LABELS_MAGIC {
        return Err(bad(labels_path, 0, format!("label magic {lmagic:#010x} != {LABELS_MAGIC:#010x}")));
    }
    let lcount = read_u32_be(&labels, &mut loff, labels_path)? as usize;
    if labels.len() != 8 + lcount {
        return Err(bad(
            labels_path,
            labels.len() as u64,
            format!("expected {} bytes for {lcount} labels, found {}", 8 + lcount, labels.len()),
        ));
    }
    if lcount != count {
        return Err(bad(
            labels_path,
            8,
            format!("label count {lcount} != image count {count}"),
        ));
    }

    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let pixels = &images[16 + i * dim..16 + (i + 1) * dim];
        let features: Vec<f64> = pixels.iter().map(|p| *p as f64 / 255.0).collect();
        samples.push(Sample::new(features, labels[8 + i] as f64));
    }
    Ok(samples)
}

fn read_u32_be(buf: &[u8], off: &mut u64, path: &Path) -> Result<u32> {
    let start = *off as usize;
    let bytes: [u8; 4] = buf
        .get(start..start + 4)
        .and_then(|s| s.try_into().ok())
        .ok_or_else(|| bad(path, *off, "truncated header".to_string()))?;
    *off += 4;
    Ok(u32::from_be_bytes(bytes))
}

fn bad(path: &Path, offset: u64, why: String) -> Error {
    Error::IdxFormat {
        path: path.display().to_string(),
        offset,
        why,
    }
}
