//! Four-step clip curation: temporal/spatial downsampling, semantic dynamic
//! filter, non-rigid motion score, and tracking-based small-viewpoint
//! filter.
//!
//! Segmentation masks, optical flow and point tracks are produced by external
//! models and arrive here as rasters and tracks.

use nalgebra::Point2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{FlowField, Image, Mask};
use crate::rng;
use crate::robustfit::{
    ransac_circle, ransac_fundamental, sampson_distance, CircleRansacParams, Correspondence,
    FitError, FundamentalRansacParams,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurationError {
    #[error("clip has no frames")]
    EmptyClip,
    #[error("semantic masks missing: {0}")]
    MissingMasks(String),
    #[error("no track has at least 3 visible points")]
    NoUsableTracks,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Pipeline stage an error or statistic belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Ingest,
    Downsample,
    Semantic,
    Nonrigid,
    SmallViewpoint,
}

impl std::fmt::Display for Step {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Step::Ingest => "ingest",
            Step::Downsample => "downsample",
            Step::Semantic => "semantic",
            Step::Nonrigid => "nonrigid",
            Step::SmallViewpoint => "small_viewpoint",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{step}: {source}")]
pub struct StepError {
    pub step: Step,
    #[source]
    pub source: CurationError,
}

impl StepError {
    fn at(step: Step) -> impl FnOnce(CurationError) -> StepError {
        move |source| StepError { step, source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub frame: u32,
    pub x: f64,
    pub y: f64,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: u64,
    /// Sorted by frame, one entry per frame.
    pub points: Vec<TrackPoint>,
}

impl Track {
    pub fn visible_points(&self) -> Vec<Point2<f64>> {
        self.points
            .iter()
            .filter(|p| p.visible)
            .map(|p| Point2::new(p.x, p.y))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackSet {
    pub tracks: Vec<Track>,
}

impl TrackSet {
    /// Checks that visible points are finite and inside a `width x height`
    /// frame.
    pub fn validate(&self, width: usize, height: usize) -> Result<(), CurationError> {
        for t in &self.tracks {
            for p in t.points.iter().filter(|p| p.visible) {
                let inside = p.x.is_finite()
                    && p.y.is_finite()
                    && p.x >= -0.5
                    && p.y >= -0.5
                    && p.x < width as f64 - 0.5
                    && p.y < height as f64 - 0.5;
                if !inside {
                    return Err(CurationError::InvalidInput(format!(
                        "track {} frame {}: visible point ({}, {}) outside {}x{}",
                        t.id, p.frame, p.x, p.y, width, height
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn translated(&self, dx: f64, dy: f64) -> TrackSet {
        self.map_coords(|x, y| (x + dx, y + dy))
    }

    pub fn map_coords(&self, f: impl Fn(f64, f64) -> (f64, f64)) -> TrackSet {
        TrackSet {
            tracks: self
                .tracks
                .iter()
                .map(|t| Track {
                    id: t.id,
                    points: t
                        .points
                        .iter()
                        .map(|p| {
                            let (x, y) = f(p.x, p.y);
                            TrackPoint { x, y, ..*p }
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// One clip and the external model outputs computed for it.
#[derive(Debug, Clone, Default)]
pub struct ClipBundle {
    pub frames: Vec<Image>,
    /// One mask per frame, when a segmentation model was run.
    pub semantic_masks: Option<Vec<Mask>>,
    /// Flow from frame k to k+1, one per consecutive pair of frames.
    pub flows: Option<Vec<FlowField>>,
    /// Point tracks in frame pixel coordinates.
    pub tracks: Option<TrackSet>,
}

impl ClipBundle {
    pub fn validate(&self) -> Result<(), CurationError> {
        let first = self.frames.first().ok_or(CurationError::EmptyClip)?;
        let (w, h) = (first.width(), first.height());
        if self.frames.iter().any(|f| f.width() != w || f.height() != h) {
            return Err(CurationError::InvalidInput(
                "frames differ in size".into(),
            ));
        }
        if let Some(masks) = &self.semantic_masks {
            if masks.len() != self.frames.len() {
                return Err(CurationError::MissingMasks(format!(
                    "{} masks for {} frames",
                    masks.len(),
                    self.frames.len()
                )));
            }
            if masks.iter().any(|m| m.width() != w || m.height() != h) {
                return Err(CurationError::InvalidInput(
                    "semantic mask size differs from frames".into(),
                ));
            }
        }
        if let Some(flows) = &self.flows {
            if flows.len() + 1 != self.frames.len() {
                return Err(CurationError::InvalidInput(format!(
                    "{} flows for {} frames (expected {})",
                    flows.len(),
                    self.frames.len(),
                    self.frames.len() - 1
                )));
            }
            if flows.iter().any(|f| f.width() != w || f.height() != h) {
                return Err(CurationError::InvalidInput(
                    "flow size differs from frames".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationConfig {
    /// Keep one frame out of every `temporal_rate`.
    pub temporal_rate: usize,
    /// Short side after spatial downsampling, in pixels.
    pub target_short_side: usize,
    /// Sampson distance (squared pixels) above which a pixel is non-rigid.
    pub sampson_threshold: f64,
    /// Grid stride for the correspondences used to fit F.
    pub flow_grid_stride: usize,
    pub fundamental: RansacSettings,
    /// Sequences with total score >= `dynamic_ratio * N` are dynamic.
    pub dynamic_ratio: f64,
    pub circle: RansacSettings,
    pub radius_threshold: f64,
    pub count_threshold: usize,
    pub mean_motion_threshold: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RansacSettings {
    pub iterations: usize,
    pub inlier_tol: f64,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            temporal_rate: 2,
            target_short_side: 480,
            sampson_threshold: 1.0,
            flow_grid_stride: 4,
            fundamental: RansacSettings {
                iterations: 1000,
                inlier_tol: 0.5,
            },
            dynamic_ratio: 0.25,
            circle: RansacSettings {
                iterations: 200,
                inlier_tol: 1.0,
            },
            radius_threshold: 20.0,
            count_threshold: 40,
            mean_motion_threshold: 5.0,
            seed: 0,
        }
    }
}

impl CurationConfig {
    pub fn nonrigid_params(&self) -> NonRigidParams {
        NonRigidParams {
            ransac: FundamentalRansacParams {
                iterations: self.fundamental.iterations,
                inlier_tol: self.fundamental.inlier_tol,
            },
            sampson_threshold: self.sampson_threshold,
            grid_stride: self.flow_grid_stride,
        }
    }

    pub fn small_viewpoint_params(&self) -> SmallViewpointParams {
        SmallViewpointParams {
            radius_threshold: self.radius_threshold,
            count_threshold: self.count_threshold,
            mean_motion_threshold: self.mean_motion_threshold,
            ransac: CircleRansacParams {
                iterations: self.circle.iterations,
                inlier_tol: self.circle.inlier_tol,
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Step 1

/// Output size for `(width, height)` so that the short side becomes
/// `target_short_side`; the long side is rounded to the nearest even number.
pub fn downsampled_size(width: usize, height: usize, target_short_side: usize) -> (usize, usize) {
    let short = width.min(height);
    if short == target_short_side {
        return (width, height);
    }
    let scale = target_short_side as f64 / short as f64;
    let round_even = |v: f64| ((v / 2.0).round() * 2.0).max(2.0) as usize;
    if width <= height {
        (target_short_side, round_even(height as f64 * scale))
    } else {
        (round_even(width as f64 * scale), target_short_side)
    }
}

/// Indices retained by temporal downsampling.
pub fn kept_indices(n_frames: usize, temporal_rate: usize) -> Vec<usize> {
    (0..n_frames).step_by(temporal_rate.max(1)).collect()
}

pub fn downsample_clip(
    frames: &[Image],
    temporal_rate: usize,
    target_short_side: usize,
) -> Result<Vec<Image>, CurationError> {
    if frames.is_empty() {
        return Err(CurationError::EmptyClip);
    }
    if temporal_rate < 1 {
        return Err(CurationError::InvalidInput("temporal_rate must be >= 1".into()));
    }
    if target_short_side < 16 {
        return Err(CurationError::InvalidInput(
            "target_short_side must be >= 16".into(),
        ));
    }
    Ok(kept_indices(frames.len(), temporal_rate)
        .into_iter()
        .map(|i| {
            let f = &frames[i];
            let (w, h) = downsampled_size(f.width(), f.height(), target_short_side);
            f.resize_bilinear(w, h)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Step 2

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticStats {
    pub frames_with_mask: usize,
    pub total_frames: usize,
    pub fraction: f64,
    pub reject: bool,
}

/// Rejects when strictly more than half of the frames carry a non-empty
/// motion mask.
pub fn semantic_dynamic_filter(masks: &[Mask]) -> Result<SemanticStats, CurationError> {
    if masks.is_empty() {
        return Err(CurationError::MissingMasks("no masks given".into()));
    }
    let with = masks.iter().filter(|m| m.any()).count();
    let fraction = with as f64 / masks.len() as f64;
    Ok(SemanticStats {
        frames_with_mask: with,
        total_frames: masks.len(),
        fraction,
        reject: fraction > 0.5,
    })
}

// ---------------------------------------------------------------------------
// Step 3

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub theta_i: f64,
    pub theta_c: f64,
    pub score: f64,
}

/// Per-frame score from the whole-image and central mask proportions.
///
/// The four tabulated cells are extended to the whole unit square: a large
/// mask with little central coverage and a small mask concentrated in the
/// center both score 1.5. An empty mask scores 0.
pub fn score_from_thetas(theta_i: f64, theta_c: f64, empty: bool) -> f64 {
    if empty {
        return 0.0;
    }
    let large = theta_i >= 0.12;
    if theta_c >= 0.35 {
        if large {
            2.0
        } else {
            1.5
        }
    } else if theta_c >= 0.2 {
        if large {
            1.5
        } else {
            1.0
        }
    } else if large {
        1.5
    } else {
        0.5
    }
}

/// Row/column range `[start, end)` of the central band along an axis of
/// length `n`: integer positions in `[n/4, n - n/4)`.
fn central_range(n: usize) -> (usize, usize) {
    let q = 0.25 * n as f64;
    (q.ceil() as usize, (n as f64 - q).ceil() as usize)
}

pub fn dynamic_score_frame(mask: &Mask) -> FrameScore {
    let (w, h) = (mask.width(), mask.height());
    if w == 0 || h == 0 {
        return FrameScore {
            theta_i: 0.0,
            theta_c: 0.0,
            score: 0.0,
        };
    }
    let total = mask.count();
    let (r0, r1) = central_range(h);
    let (c0, c1) = central_range(w);
    let mut central = 0usize;
    for y in r0..r1 {
        for x in c0..c1 {
            central += mask.get(x, y) as usize;
        }
    }
    let theta_i = total as f64 / (w * h) as f64;
    let theta_c = (central as f64 / (0.5 * h as f64 * 0.5 * w as f64)).min(1.0);
    FrameScore {
        theta_i,
        theta_c,
        score: score_from_thetas(theta_i, theta_c, total == 0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicScore {
    pub frames: Vec<FrameScore>,
    pub total: f64,
    pub threshold: f64,
    pub dynamic: bool,
}

pub fn dynamic_score_sequence(masks: &[Mask]) -> Result<DynamicScore, CurationError> {
    dynamic_score_sequence_with(masks, 0.25)
}

pub fn dynamic_score_sequence_with(
    masks: &[Mask],
    ratio: f64,
) -> Result<DynamicScore, CurationError> {
    if masks.is_empty() {
        return Err(CurationError::EmptyClip);
    }
    let frames: Vec<FrameScore> = masks.iter().map(dynamic_score_frame).collect();
    let total: f64 = frames.iter().map(|f| f.score).sum();
    let threshold = ratio * masks.len() as f64;
    Ok(DynamicScore {
        frames,
        total,
        threshold,
        dynamic: total >= threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonRigidParams {
    pub ransac: FundamentalRansacParams,
    pub sampson_threshold: f64,
    pub grid_stride: usize,
}

impl Default for NonRigidParams {
    fn default() -> Self {
        CurationConfig::default().nonrigid_params()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonRigidMasks {
    pub masks: Vec<Mask>,
    /// Flow indices whose epipolar geometry was degenerate (e.g. no camera
    /// motion); their masks are all-false.
    pub degenerate: Vec<usize>,
}

/// Marks pixels whose flow violates the dominant epipolar geometry.
pub fn nonrigid_mask(
    flow: &FlowField,
    params: &NonRigidParams,
    seed: u64,
) -> Result<Option<Mask>, CurationError> {
    let stride = params.grid_stride.max(1);
    let (w, h) = (flow.width(), flow.height());
    let target = |x: usize, y: usize| {
        let (du, dv) = flow.get(x, y);
        Point2::new(x as f64 + du as f64, y as f64 + dv as f64)
    };
    let mut corrs: Vec<Correspondence> = Vec::new();
    for y in (0..h).step_by(stride) {
        for x in (0..w).step_by(stride) {
            let q = target(x, y);
            if q.x.is_finite() && q.y.is_finite() {
                corrs.push((Point2::new(x as f64, y as f64), q));
            }
        }
    }
    let fit = match ransac_fundamental(&corrs, &params.ransac, seed) {
        Ok(fit) => fit,
        Err(FitError::DegenerateConfiguration) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    Ok(Some(Mask::from_fn(w, h, |x, y| {
        let q = target(x, y);
        sampson_distance(&fit.f, &Point2::new(x as f64, y as f64), &q)
            .is_ok_and(|d| d > params.sampson_threshold)
    })))
}

pub fn nonrigid_masks_from_flow(
    flows: &[FlowField],
    params: &NonRigidParams,
    seed: u64,
) -> Result<NonRigidMasks, CurationError> {
    if flows.is_empty() {
        return Err(CurationError::InvalidInput("no flow fields".into()));
    }
    let results: Vec<Result<Option<Mask>, CurationError>> = flows
        .par_iter()
        .enumerate()
        .map(|(k, f)| nonrigid_mask(f, params, rng::derive_seed(seed, k as u64)))
        .collect();
    let mut masks = Vec::with_capacity(flows.len());
    let mut degenerate = Vec::new();
    for (k, (r, f)) in results.into_iter().zip(flows).enumerate() {
        match r? {
            Some(m) => masks.push(m),
            None => {
                log::warn!("flow {k}: degenerate epipolar geometry, mask left empty");
                degenerate.push(k);
                masks.push(Mask::filled(f.width(), f.height(), false));
            }
        }
    }
    Ok(NonRigidMasks { masks, degenerate })
}

// ---------------------------------------------------------------------------
// Step 4

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallViewpointParams {
    pub radius_threshold: f64,
    pub count_threshold: usize,
    pub mean_motion_threshold: f64,
    pub ransac: CircleRansacParams,
}

impl Default for SmallViewpointParams {
    fn default() -> Self {
        CurationConfig::default().small_viewpoint_params()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallViewpointStats {
    pub usable_tracks: usize,
    pub skipped_tracks: usize,
    pub small_count: usize,
    pub mean_radius: f64,
    pub radii: Vec<f64>,
    pub reject: bool,
}

/// Fits a circle to each track's visible positions and rejects the clip
/// when many trajectories are small and the mean radius is small.
pub fn small_viewpoint_filter(
    tracks: &TrackSet,
    params: &SmallViewpointParams,
    seed: u64,
) -> Result<SmallViewpointStats, CurationError> {
    let fits: Vec<Option<Result<f64, FitError>>> = tracks
        .tracks
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let pts = t.visible_points();
            (pts.len() >= 3).then(|| {
                ransac_circle(&pts, &params.ransac, rng::derive_seed(seed, i as u64))
                    .map(|f| f.radius)
            })
        })
        .collect();
    let mut radii = Vec::new();
    for r in fits.into_iter().flatten() {
        radii.push(r?);
    }
    if radii.is_empty() {
        return Err(CurationError::NoUsableTracks);
    }
    let small_count = radii
        .iter()
        .filter(|&&r| r <= params.radius_threshold)
        .count();
    let mean_radius = radii.iter().sum::<f64>() / radii.len() as f64;
    Ok(SmallViewpointStats {
        usable_tracks: radii.len(),
        skipped_tracks: tracks.tracks.len() - radii.len(),
        small_count,
        mean_radius,
        reject: small_count > params.count_threshold && mean_radius < params.mean_motion_threshold,
        radii,
    })
}

// ---------------------------------------------------------------------------
// Whole clip

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    SemanticDynamic,
    NonrigidDynamic,
    SmallViewpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Passed,
    Rejected,
    /// The input this step needs was not supplied.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport<T> {
    pub status: StepStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<T>,
}

impl<T> StepReport<T> {
    fn skipped() -> Self {
        Self {
            status: StepStatus::Skipped,
            stats: None,
        }
    }

    fn decided(reject: bool, stats: T) -> Self {
        Self {
            status: if reject {
                StepStatus::Rejected
            } else {
                StepStatus::Passed
            },
            stats: Some(stats),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DownsampleStats {
    pub input_frames: usize,
    pub kept_frames: usize,
    pub input_width: usize,
    pub input_height: usize,
    pub width: usize,
    pub height: usize,
    /// Spatial scale applied to pixel coordinates.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonrigidStats {
    pub score: DynamicScore,
    pub degenerate_pairs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub schema_version: u32,
    pub downsample: DownsampleStats,
    /// Steps after a rejection are not run and are left out.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semantic: Option<StepReport<SemanticStats>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonrigid: Option<StepReport<NonrigidStats>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub small_viewpoint: Option<StepReport<SmallViewpointStats>>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<RejectReason>,
}

/// Runs the four curation steps in order, stopping at the first rejection.
///
/// Semantic masks are subsampled along with the frames. The motion score
/// uses the flow leaving each retained frame. Track coordinates are scaled
/// to the downsampled resolution before circle fitting.
pub fn curate_clip(bundle: &ClipBundle, config: &CurationConfig) -> Result<CurationReport, StepError> {
    bundle.validate().map_err(StepError::at(Step::Ingest))?;
    let first = &bundle.frames[0];
    let kept = downsample_clip(&bundle.frames, config.temporal_rate, config.target_short_side)
        .map_err(StepError::at(Step::Downsample))?;
    let indices = kept_indices(bundle.frames.len(), config.temporal_rate);
    let scale = kept[0].width() as f64 / first.width() as f64;
    let downsample = DownsampleStats {
        input_frames: bundle.frames.len(),
        kept_frames: kept.len(),
        input_width: first.width(),
        input_height: first.height(),
        width: kept[0].width(),
        height: kept[0].height(),
        scale,
    };
    let mut report = CurationReport {
        schema_version: 1,
        downsample,
        semantic: None,
        nonrigid: None,
        small_viewpoint: None,
        verdict: Verdict::Pass,
        reason: None,
    };
    let reject = |mut r: CurationReport, reason| {
        r.verdict = Verdict::Reject;
        r.reason = Some(reason);
        r
    };

    // Step 2
    let semantic = match &bundle.semantic_masks {
        None => StepReport::skipped(),
        Some(masks) => {
            let sel: Vec<Mask> = indices.iter().map(|&i| masks[i].clone()).collect();
            let stats = semantic_dynamic_filter(&sel).map_err(StepError::at(Step::Semantic))?;
            StepReport::decided(stats.reject, stats)
        }
    };
    let rejected = semantic.status == StepStatus::Rejected;
    report.semantic = Some(semantic);
    if rejected {
        return Ok(reject(report, RejectReason::SemanticDynamic));
    }

    // Step 3
    let nonrigid = match &bundle.flows {
        Some(flows) if !flows.is_empty() => {
            let sel: Vec<FlowField> = indices
                .iter()
                .filter(|&&i| i < flows.len())
                .map(|&i| flows[i].clone())
                .collect();
            let masks = nonrigid_masks_from_flow(&sel, &config.nonrigid_params(), config.seed)
                .map_err(StepError::at(Step::Nonrigid))?;
            let score = dynamic_score_sequence_with(&masks.masks, config.dynamic_ratio)
                .map_err(StepError::at(Step::Nonrigid))?;
            StepReport::decided(
                score.dynamic,
                NonrigidStats {
                    score,
                    degenerate_pairs: masks.degenerate,
                },
            )
        }
        _ => StepReport::skipped(),
    };
    let rejected = nonrigid.status == StepStatus::Rejected;
    report.nonrigid = Some(nonrigid);
    if rejected {
        return Ok(reject(report, RejectReason::NonrigidDynamic));
    }

    // Step 4
    let small = match &bundle.tracks {
        None => StepReport::skipped(),
        Some(tracks) => {
            tracks
                .validate(first.width(), first.height())
                .map_err(StepError::at(Step::SmallViewpoint))?;
            let scaled = tracks.map_coords(|x, y| (x * scale, y * scale));
            let stats = small_viewpoint_filter(
                &scaled,
                &config.small_viewpoint_params(),
                rng::derive_seed(config.seed, 0x5eed),
            )
            .map_err(StepError::at(Step::SmallViewpoint))?;
            StepReport::decided(stats.reject, stats)
        }
    };
    let rejected = small.status == StepStatus::Rejected;
    report.small_viewpoint = Some(small);
    if rejected {
        return Ok(reject(report, RejectReason::SmallViewpoint));
    }
    Ok(report)
}
