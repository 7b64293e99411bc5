//! Sparse per-keypoint depth alignment against anchor views, and dense
//! recovery of the scaled depth map by locally weighted linear regression.

mod keypoint;
mod lwlr;
mod synth;

pub use keypoint::{
    align_keypoint, align_sparse, AlignParams, AlignStatus, KeypointAlignment, KeypointProblem,
};
pub use lwlr::{lwlr_pixel, lwlr_recover, LwlrParams, ScaledDepth};
pub use synth::synth_matches;

use std::collections::HashMap;

use nalgebra::Point2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camgeo::GeometryError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("no guidance point survived alignment")]
    EmptyGuidance,
    #[error("singular regression system at pixel ({x}, {y})")]
    SingularSystem { x: usize, y: usize },
    #[error("no valid pixel reprojects into any anchor view")]
    NoValidPixels,
    #[error("{got} keypoints exceed the cap of {cap}")]
    TooManyKeypoints { got: usize, cap: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// One correspondence between a source-view keypoint and an anchor view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub src: Point2<f64>,
    pub anchor_view: usize,
    pub dst: Point2<f64>,
    /// Source depth sampled at `src`.
    pub src_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchSet {
    pub matches: Vec<Match>,
}

/// All anchor observations of one source keypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointMatches {
    pub src: Point2<f64>,
    pub depth: f64,
    /// `(anchor view, matched pixel)`
    pub observations: Vec<(usize, Point2<f64>)>,
}

impl MatchSet {
    /// Groups matches by source pixel, in order of first appearance.
    pub fn keypoints(&self) -> Vec<KeypointMatches> {
        let mut order: Vec<KeypointMatches> = Vec::new();
        let mut index: HashMap<(u64, u64), usize> = HashMap::new();
        for m in &self.matches {
            let key = (m.src.x.to_bits(), m.src.y.to_bits());
            let i = *index.entry(key).or_insert_with(|| {
                order.push(KeypointMatches {
                    src: m.src,
                    depth: m.src_depth,
                    observations: Vec::new(),
                });
                order.len() - 1
            });
            order[i].observations.push((m.anchor_view, m.dst));
        }
        order
    }

    /// Replaces every `src_depth` by the nearest valid sample of `depth`;
    /// matches without a valid sample are dropped.
    pub fn resample_depth(&self, depth: &crate::raster::DepthMap) -> MatchSet {
        MatchSet {
            matches: self
                .matches
                .iter()
                .filter_map(|m| {
                    depth.sample_nearest(m.src.x, m.src.y).map(|d| Match {
                        src_depth: d,
                        ..*m
                    })
                })
                .collect(),
        }
    }
}

/// One aligned keypoint used to steer the dense regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidancePoint {
    pub u: f64,
    pub v: f64,
    /// Depth before alignment (the regression input at this pixel).
    pub source_depth: f64,
    /// Aligned depth.
    pub depth: f64,
    pub alpha: f64,
    pub beta: f64,
    /// RMS reprojection error over the anchors, in pixels.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseGuidance {
    pub points: Vec<GuidancePoint>,
    /// Keypoints dropped as unobservable, failed or outliers.
    #[serde(default)]
    pub dropped: usize,
}
