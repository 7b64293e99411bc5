//! Iterative novel-view generation: take the latest view's depth, align it
//! against randomly chosen anchor views, warp it to the next chunk of
//! trajectory cameras and let a generator complete the warps.

mod generate;
mod metrics;
mod run;

pub use generate::{
    fill_holes, hole_fill_generate, AnchorView, BoxError, ExecGenerator, GenerationRequest,
    Generator, HoleFillGenerator, OracleGenerator,
};
pub use metrics::{gaussian_taps, psnr, ssim, SsimParams, PSNR_CAP};
pub use run::{run, GeneratorSpec, PipelineConfig, RunSummary, ViewSummary};

use std::fmt;
use std::path::PathBuf;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camgeo::{forward_warp, Camera, WarpResult};
use crate::depthalign::{
    align_sparse, lwlr_recover, synth_matches, AlignError, AlignParams, LwlrParams, MatchSet,
    SparseGuidance,
};
use crate::io;
use crate::raster::{DepthMap, Image};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Depth,
    Matches,
    Align,
    Lwlr,
    Warp,
    Generate,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Depth => "depth",
            Stage::Matches => "matches",
            Stage::Align => "align",
            Stage::Lwlr => "lwlr",
            Stage::Warp => "warp",
            Stage::Generate => "generate",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no generated views to choose anchors from")]
    EmptyState,
    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: BoxError,
    },
}

impl PipelineError {
    pub fn stage(stage: Stage, source: impl Into<BoxError>) -> Self {
        PipelineError::Stage {
            stage,
            source: source.into(),
        }
    }

    pub fn stage_name(&self) -> Stage {
        match self {
            PipelineError::EmptyState => Stage::Align,
            PipelineError::Config { .. } => Stage::Config,
            PipelineError::Stage { stage, .. } => *stage,
        }
    }
}

/// Cameras to visit, in order; view 0 is the given input view.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub cameras: Vec<Camera>,
    /// Views generated per iteration.
    pub chunk: usize,
    /// Anchor views per iteration, the input view included.
    pub anchors: usize,
}

impl Trajectory {
    pub fn new(cameras: Vec<Camera>, chunk: usize, anchors: usize) -> Result<Self, PipelineError> {
        let bad = |pointer: &str, message: &str| {
            Err(PipelineError::Config {
                pointer: pointer.into(),
                message: message.into(),
            })
        };
        if cameras.len() < 2 {
            return bad("/trajectory", "need the input camera and at least one target");
        }
        if chunk == 0 {
            return bad("/chunk", "must be >= 1");
        }
        if anchors == 0 {
            return bad("/anchors", "must be >= 1");
        }
        Ok(Self {
            cameras,
            chunk,
            anchors,
        })
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }
}

/// `{0}` plus up to `k - 1` distinct uniform draws from `1..generated`,
/// sorted.
pub fn select_anchors(
    generated: usize,
    k: usize,
    seed: u64,
    iteration: u64,
) -> Result<Vec<usize>, PipelineError> {
    if generated == 0 {
        return Err(PipelineError::EmptyState);
    }
    let others = generated - 1;
    let draws = k.saturating_sub(1).min(others);
    let mut rng = rng::stream(seed, Purpose::Anchors, iteration);
    let mut out: Vec<usize> = index::sample(&mut rng, others, draws)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    out.push(0);
    out.sort_unstable();
    Ok(out)
}

/// Per-view monocular depth estimates.
pub trait DepthSource {
    fn depth(&mut self, view: usize, image: &Image) -> Result<DepthMap, BoxError>;
}

/// Reads `depth_XXXX.pfm` from a directory.
#[derive(Debug, Clone)]
pub struct DirectoryDepth {
    pub dir: PathBuf,
}

impl DepthSource for DirectoryDepth {
    fn depth(&mut self, view: usize, image: &Image) -> Result<DepthMap, BoxError> {
        let d = io::read_depth_pfm(&self.dir.join(format!("depth_{view:04}.pfm")))?;
        if d.width() != image.width() || d.height() != image.height() {
            return Err(format!(
                "depth {}x{} does not match image {}x{}",
                d.width(),
                d.height(),
                image.width(),
                image.height()
            )
            .into());
        }
        Ok(d)
    }
}

/// In-memory ground-truth depth.
#[derive(Debug, Clone)]
pub struct OracleDepth {
    pub maps: Vec<DepthMap>,
}

impl DepthSource for OracleDepth {
    fn depth(&mut self, view: usize, _image: &Image) -> Result<DepthMap, BoxError> {
        self.maps
            .get(view)
            .cloned()
            .ok_or_else(|| format!("no oracle depth for view {view}").into())
    }
}

/// Keypoint matches from a source view to anchor views.
pub trait MatchSource {
    fn matches(
        &mut self,
        source: usize,
        image: &Image,
        anchors: &[usize],
        cameras: &[Camera],
    ) -> Result<MatchSet, BoxError>;
}

/// Reads `matches_XXXX.csv` (keyed by source view) and keeps rows whose
/// anchor is selected.
#[derive(Debug, Clone)]
pub struct DirectoryMatches {
    pub dir: PathBuf,
}

impl MatchSource for DirectoryMatches {
    fn matches(
        &mut self,
        source: usize,
        _image: &Image,
        anchors: &[usize],
        _cameras: &[Camera],
    ) -> Result<MatchSet, BoxError> {
        let all = io::read_matches_csv(&self.dir.join(format!("matches_{source:04}.csv")))?;
        Ok(MatchSet {
            matches: all
                .matches
                .into_iter()
                .filter(|m| anchors.contains(&m.anchor_view))
                .collect(),
        })
    }
}

/// Exact matches reprojected through ground-truth depth.
pub struct SyntheticMatches {
    pub ground_truth: Box<dyn DepthSource>,
    pub count: usize,
    pub seed: u64,
}

impl MatchSource for SyntheticMatches {
    fn matches(
        &mut self,
        source: usize,
        image: &Image,
        anchors: &[usize],
        cameras: &[Camera],
    ) -> Result<MatchSet, BoxError> {
        let gt = self.ground_truth.depth(source, image)?;
        let anchors: Vec<(usize, Camera)> = anchors.iter().map(|&a| (a, cameras[a])).collect();
        let seed = rng::derive_seed(self.seed, source as u64);
        match synth_matches(&gt, &cameras[source], &anchors, self.count, seed) {
            Ok(m) => Ok(m),
            Err(AlignError::NoValidPixels) => Ok(MatchSet::default()),
            Err(e) => Err(e.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepParams {
    pub seed: u64,
    pub align: AlignParams,
    pub lwlr: LwlrParams,
}

/// Generated views so far plus the aligned depth of every view used as a
/// warp source.
#[derive(Debug, Clone)]
pub struct PipelineState {
    pub images: Vec<Image>,
    pub depths: Vec<Option<DepthMap>>,
    pub iteration: u64,
}

impl PipelineState {
    pub fn new(input: Image) -> Self {
        Self {
            images: vec![input],
            depths: vec![None],
            iteration: 0,
        }
    }

    pub fn generated(&self) -> usize {
        self.images.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum AlignmentOutcome {
    Aligned { points: usize, dropped: usize },
    Skipped { reason: String },
}

/// Everything one iteration produced, for persistence and reporting.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub iteration: u64,
    pub source: usize,
    pub anchors: Vec<usize>,
    pub targets: Vec<usize>,
    pub alignment: AlignmentOutcome,
    pub guidance: Option<SparseGuidance>,
    pub source_depth: DepthMap,
    pub warps: Vec<WarpResult>,
}

/// Runs one iteration. `state` is modified only if every stage succeeds.
pub fn pipeline_step(
    state: &mut PipelineState,
    trajectory: &Trajectory,
    depth: &mut dyn DepthSource,
    matches: Option<&mut dyn MatchSource>,
    generator: &mut dyn Generator,
    params: &StepParams,
) -> Result<StepOutput, PipelineError> {
    let n = state.generated();
    let remaining = trajectory.len().saturating_sub(n);
    if remaining == 0 {
        return Err(PipelineError::Config {
            pointer: "/trajectory".into(),
            message: "trajectory already exhausted".into(),
        });
    }
    let source = n - 1;
    let src_img = &state.images[source];
    let estimate = depth
        .depth(source, src_img)
        .map_err(|e| PipelineError::stage(Stage::Depth, e))?;
    let anchors = select_anchors(n, trajectory.anchors, params.seed, state.iteration)?;
    let others: Vec<usize> = anchors.iter().copied().filter(|&a| a != source).collect();

    let (aligned, alignment, guidance) = match (others.is_empty(), matches) {
        (true, _) => (
            estimate,
            AlignmentOutcome::Skipped {
                reason: "no anchor other than the source view".into(),
            },
            None,
        ),
        (false, None) => (
            estimate,
            AlignmentOutcome::Skipped {
                reason: "no match source configured".into(),
            },
            None,
        ),
        (false, Some(ms)) => {
            let set = ms
                .matches(source, src_img, &others, &trajectory.cameras)
                .map_err(|e| PipelineError::stage(Stage::Matches, e))?
                .resample_depth(&estimate);
            let size = (estimate.width(), estimate.height());
            match align_sparse(&set, &trajectory.cameras[source], &trajectory.cameras, size, &params.align) {
                Ok(g) => {
                    let scaled = lwlr_recover(&estimate, &g, &params.lwlr)
                        .map_err(|e| PipelineError::stage(Stage::Lwlr, e))?;
                    let outcome = AlignmentOutcome::Aligned {
                        points: g.points.len(),
                        dropped: g.dropped,
                    };
                    (scaled.depth, outcome, Some(g))
                }
                Err(AlignError::EmptyGuidance) => (
                    estimate,
                    AlignmentOutcome::Skipped {
                        reason: "no guidance point survived alignment".into(),
                    },
                    None,
                ),
                Err(e) => return Err(PipelineError::stage(Stage::Align, e)),
            }
        }
    };

    let targets: Vec<usize> = (n..n + remaining.min(trajectory.chunk)).collect();
    let src_cam = trajectory.cameras[source];
    let warps: Vec<WarpResult> = targets
        .par_iter()
        .map(|&t| forward_warp(src_img, &aligned, &src_cam, &trajectory.cameras[t]))
        .collect::<Result<_, _>>()
        .map_err(|e| PipelineError::stage(Stage::Warp, e))?;

    let request = GenerationRequest {
        targets: targets.clone(),
        target_cameras: targets.iter().map(|&t| trajectory.cameras[t]).collect(),
        warped: warps.iter().map(|w| w.image.clone()).collect(),
        masks: warps.iter().map(|w| w.mask.clone()).collect(),
        anchors: anchors
            .iter()
            .map(|&a| AnchorView {
                index: a,
                image: state.images[a].clone(),
                camera: trajectory.cameras[a],
            })
            .collect(),
    };
    let images = generator
        .generate(&request)
        .map_err(|e| PipelineError::stage(Stage::Generate, e))?;
    if images.len() != targets.len() {
        return Err(PipelineError::stage(
            Stage::Generate,
            format!("expected {} images, got {}", targets.len(), images.len()),
        ));
    }
    if let Some(bad) = images.iter().find(|im| !im.same_shape(src_img)) {
        return Err(PipelineError::stage(
            Stage::Generate,
            format!(
                "generated {}x{}x{} image, expected {}x{}x{}",
                bad.width(),
                bad.height(),
                bad.channels(),
                src_img.width(),
                src_img.height(),
                src_img.channels()
            ),
        ));
    }

    state.depths[source] = Some(aligned.clone());
    for img in images {
        state.images.push(img);
        state.depths.push(None);
    }
    let iteration = state.iteration;
    state.iteration += 1;
    Ok(StepOutput {
        iteration,
        source,
        anchors,
        targets,
        alignment,
        guidance,
        source_depth: aligned,
        warps,
    })
}
