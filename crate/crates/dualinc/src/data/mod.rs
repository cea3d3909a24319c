//! Dataset loading, synthetic data generation, phase scheduling, and the
//! per-batch orientation modification step.

mod cifar;
mod rotate;
mod schedule;
mod synth;

pub use cifar::{load_cifar100, ChannelNorm, CIFAR100_RECORD_BYTES};
pub use rotate::{modify_batch, rotate_bilinear, rotate_by_angle, rotate_quarter};
pub use schedule::{make_phase_schedule, phase_data, PhaseSchedule, PhaseSplit};
pub use synth::synth_oriented;

use crate::tensor::Tensor;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: length {len} is not a multiple of the {record}-byte record (truncated file?)")]
    Truncated { path: String, len: usize, record: usize },
    #[error("{path}: no records")]
    Empty { path: String },
    #[error("schedule: ({total} - {base}) classes do not divide evenly into {phases} phases")]
    UnevenIncrement { total: usize, base: usize, phases: usize },
    #[error("schedule: base count {base} with {phases} phases exceeds {total} classes")]
    BadCounts { total: usize, base: usize, phases: usize },
    #[error("phase {phase} out of range (schedule has phases 0..={max})")]
    PhaseOutOfRange { phase: usize, max: usize },
}

/// Dense C×H×W image with values in [0,1] (unless channel-normalized).
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Self {
        assert_eq!(channels * height * width, data.len(), "image shape/data mismatch");
        Image { channels, height, width, data }
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Image::new(channels, height, width, vec![0.0; channels * height * width])
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, c: usize, r: usize, col: usize) -> f32 {
        self.data[(c * self.height + r) * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, c: usize, r: usize, col: usize, v: f32) {
        self.data[(c * self.height + r) * self.width + col] = v;
    }
}

/// Training or test sample: an image plus its image-class label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub image: Image,
    pub image_class: usize,
}

/// Ordered set of M distinct orientation angles; index 0 is always the
/// untransformed orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationSet {
    angles: Vec<f32>,
}

impl OrientationSet {
    pub fn new(angles: Vec<f32>) -> Self {
        assert!(!angles.is_empty(), "orientation set must not be empty");
        assert_eq!(angles[0], 0.0, "orientation class 0 must be the 0-degree orientation");
        for (i, &a) in angles.iter().enumerate() {
            assert!((0.0..360.0).contains(&a), "angle {a} outside [0,360)");
            assert!(!angles[..i].contains(&a), "duplicate orientation angle {a}");
        }
        OrientationSet { angles }
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn angles(&self) -> &[f32] {
        &self.angles
    }

    pub fn angle(&self, class: usize) -> f32 {
        self.angles[class]
    }

    /// Index of an angle in the set, if present.
    pub fn class_of(&self, angle: f32) -> Option<usize> {
        self.angles.iter().position(|&a| a == angle)
    }
}

/// Output of the batch modification step: the rotated image labeled with the
/// tuple (image class, orientation class).
#[derive(Clone, Debug, PartialEq)]
pub struct ModifiedSample {
    pub image: Image,
    pub image_class: usize,
    pub orientation_class: usize,
}

/// A dataset with train and test splits over a shared class id space.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub train: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
    pub class_count: usize,
}

impl Dataset {
    pub fn new(train: Vec<LabeledSample>, test: Vec<LabeledSample>, class_count: usize) -> Self {
        debug_assert!(train.iter().chain(&test).all(|s| s.image_class < class_count));
        Dataset { train, test, class_count }
    }
}

/// Stack images into an [N,C,H,W] batch tensor.
pub fn stack_images<'a, I>(images: I) -> Tensor
where
    I: IntoIterator<Item = &'a Image>,
{
    let mut data = Vec::new();
    let mut shape = None;
    let mut n = 0;
    for img in images {
        match shape {
            None => shape = Some((img.channels(), img.height(), img.width())),
            Some(s) => assert_eq!(
                s,
                (img.channels(), img.height(), img.width()),
                "cannot stack images of differing shapes"
            ),
        }
        data.extend_from_slice(img.data());
        n += 1;
    }
    let (c, h, w) = shape.expect("stack_images on empty iterator");
    Tensor::new(&[n, c, h, w], data)
}
