//! CIFAR-100 binary record loader.
//!
//! Each record is 3074 bytes: one coarse-label byte, one fine-label byte,
//! then 3072 pixel bytes stored channel-planar (1024 red, 1024 green,
//! 1024 blue), each plane a row-major 32x32 grid.

use super::{DataError, Image, LabeledSample};
use std::path::Path;

pub const CIFAR100_RECORD_BYTES: usize = 3074;
const SIDE: usize = 32;
const PLANE: usize = SIDE * SIDE;

/// Optional per-channel standardization applied after the [0,1] scaling.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChannelNorm {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

/// Load one CIFAR-100 binary file. The fine label becomes the image class;
/// pixel bytes are scaled to [0,1] and optionally channel-normalized.
pub fn load_cifar100(path: &Path, norm: Option<&ChannelNorm>) -> Result<Vec<LabeledSample>, DataError> {
    let display = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| DataError::Io { path: display.clone(), source })?;
    if bytes.is_empty() {
        return Err(DataError::Empty { path: display });
    }
    if bytes.len() % CIFAR100_RECORD_BYTES != 0 {
        return Err(DataError::Truncated {
            path: display,
            len: bytes.len(),
            record: CIFAR100_RECORD_BYTES,
        });
    }
    let mut samples = Vec::with_capacity(bytes.len() / CIFAR100_RECORD_BYTES);
    for record in bytes.chunks_exact(CIFAR100_RECORD_BYTES) {
        let fine = record[1] as usize;
        let mut data = Vec::with_capacity(3 * PLANE);
        for (c, plane) in record[2..].chunks_exact(PLANE).enumerate() {
            match norm {
                None => data.extend(plane.iter().map(|&b| b as f32 / 255.0)),
                Some(n) => data.extend(
                    plane.iter().map(|&b| (b as f32 / 255.0 - n.mean[c]) / n.std[c]),
                ),
            }
        }
        samples.push(LabeledSample { image: Image::new(3, SIDE, SIDE, data), image_class: fine });
    }
    Ok(samples)
}
