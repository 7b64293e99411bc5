//! Time-dependent visual conditioning: the noise schedule, the reduced
//! timestep and mixture weight, corrupted views, the condition mixture,
//! irregular masks and HSV brightness alignment.

mod color;
mod condition;
mod mask;
mod schedule;

pub use color::{brightness_align, brightness_align_masked, hsv_to_rgb, rgb_to_hsv};
pub use condition::{add_noise, build_condition, corrupt, standard_normal, Condition, ViewSet};
pub use mask::{irregular_mask, IrregularMaskParams};
pub use schedule::{Schedule, ScheduleParams};

use thiserror::Error;

use crate::raster::RasterError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CondError {
    #[error("timestep {t} outside [{lo}, {hi}]")]
    TimestepOutOfRange { t: u32, lo: u32, hi: u32 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("expected 3 channels, got {0}")]
    BadChannelCount(usize),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid view set: {0}")]
    InvalidViews(String),
    #[error("mask fraction in [{lo}, {hi}] not reached after {tries} tries")]
    MaskFractionUnreachable { lo: f64, hi: f64, tries: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl From<RasterError> for CondError {
    fn from(e: RasterError) -> Self {
        CondError::ShapeMismatch(e.to_string())
    }
}
