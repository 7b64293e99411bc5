//! Random-sample consensus fitters used by clip curation.

mod circle;
mod fundamental;

pub use circle::{circumcircle, ransac_circle, Circle, CircleFit, CircleRansacParams};
pub use fundamental::{
    eight_point, ransac_fundamental, sampson_distance, Correspondence, FundamentalFit,
    FundamentalMatrix, FundamentalRansacParams,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("degenerate sample (collinear points)")]
    DegenerateSample,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("need at least 8 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("every sampled minimal set was rank deficient")]
    DegenerateConfiguration,
    #[error("Sampson denominator vanished")]
    ZeroGradient,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
