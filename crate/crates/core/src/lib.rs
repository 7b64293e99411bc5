//! Deterministic building blocks for curating 3D-aware video clips and
//! generating novel views by iterative depth alignment, warping and
//! completion.
//!
//! The crate is organised by stage:
//!
//! - [`camgeo`]: pinhole cameras, reprojection and z-buffered forward warping.
//! - [`robustfit`]: RANSAC circle fitting, the normalized eight-point
//!   fundamental matrix and the Sampson distance.
//! - [`curation`]: the four-step clip filter (downsampling, semantic masks,
//!   non-rigid motion score, small-viewpoint rejection).
//! - [`vcond`]: diffusion schedule, corrupted images and the time-dependent
//!   visual-condition mixture, irregular masks and brightness alignment.
//! - [`depthalign`]: per-keypoint depth alignment against anchor views and
//!   locally weighted linear regression for dense depth recovery.
//! - [`pipeline`]: the iterative novel-view loop, built-in generators and
//!   image quality metrics.
//! - [`io`]: PFM, FLO, PPM/PGM, camera JSON and CSV formats.
//!
//! Neural stages (segmentation, flow, tracking, monocular depth, matching and
//! the multi-view generator itself) are not run here; their outputs are
//! ingested from files or replaced by mocks.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camgeo;
pub mod cli;
pub mod curation;
pub mod depthalign;
pub mod io;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod robustfit;
pub mod vcond;

pub use camgeo::{Camera, WarpResult};
pub use raster::{DepthMap, FlowField, Image, Mask};
