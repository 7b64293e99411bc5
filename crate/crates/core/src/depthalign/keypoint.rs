use nalgebra::{Point2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AlignError, GuidancePoint, KeypointMatches, MatchSet, SparseGuidance};
use crate::camgeo::{unproject_ray, Camera, GeometryError, RelativePose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignParams {
    pub iterations: usize,
    /// Initial gradient step in log-depth.
    pub initial_step: f64,
    /// Keypoints with a larger RMS residual (pixels) are discarded.
    pub outlier_px: f64,
    pub max_keypoints: usize,
}

impl Default for AlignParams {
    fn default() -> Self {
        Self {
            iterations: 200,
            initial_step: 0.1,
            outlier_px: 2.0,
            max_keypoints: 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignStatus {
    Converged,
    /// Depth unobservable or the loss never decreased; the input depth is
    /// returned unchanged.
    NoDescent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeypointAlignment {
    pub depth: f64,
    pub alpha: f64,
    pub beta: f64,
    /// RMS reprojection error over the anchors, in pixels.
    pub residual: f64,
    pub status: AlignStatus,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
struct AnchorTerm {
    /// Source ray rotated into the anchor frame; the point is `d * dir + offset`.
    dir: Vector3<f64>,
    offset: Vector3<f64>,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    target: Point2<f64>,
}

impl AnchorTerm {
    #[inline]
    fn project(&self, d: f64) -> Option<(Point2<f64>, Vector3<f64>)> {
        let p = self.dir * d + self.offset;
        (p.z > 0.0).then(|| {
            (
                Point2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy),
                p,
            )
        })
    }

    /// Pixel derivative with respect to the depth `d`.
    #[inline]
    fn dpixel_ddepth(&self, p: &Vector3<f64>) -> (f64, f64) {
        let z2 = p.z * p.z;
        (
            self.fx * (self.dir.x * p.z - p.x * self.dir.z) / z2,
            self.fy * (self.dir.y * p.z - p.y * self.dir.z) / z2,
        )
    }
}

/// Reprojection loss of one keypoint as a function of log-depth
/// `s = ln d`. Pixel errors are normalized by the image size.
#[derive(Debug, Clone)]
pub struct KeypointProblem {
    terms: Vec<AnchorTerm>,
    width: f64,
    height: f64,
}

impl KeypointProblem {
    pub fn new(
        src_px: Point2<f64>,
        src: &Camera,
        anchors: &[(Camera, Point2<f64>)],
        image_size: (usize, usize),
    ) -> Self {
        let ray = unproject_ray(&src_px, src.k());
        let terms = anchors
            .iter()
            .map(|(cam, target)| {
                let rel = RelativePose::between(src, cam);
                let k = cam.k();
                AnchorTerm {
                    dir: rel.r * ray,
                    offset: rel.t,
                    fx: k[(0, 0)],
                    fy: k[(1, 1)],
                    cx: k[(0, 2)],
                    cy: k[(1, 2)],
                    target: *target,
                }
            })
            .collect();
        Self {
            terms,
            width: image_size.0 as f64,
            height: image_size.1 as f64,
        }
    }

    /// Loss at log-depth `s`; infinite when the point falls behind an anchor.
    pub fn loss(&self, s: f64) -> f64 {
        let d = s.exp();
        let mut l = 0.0;
        for t in &self.terms {
            match t.project(d) {
                Some((px, _)) => {
                    let eu = (px.x - t.target.x) / self.width;
                    let ev = (px.y - t.target.y) / self.height;
                    l += eu * eu + ev * ev;
                }
                None => return f64::INFINITY,
            }
        }
        l
    }

    /// Analytic derivative of [`Self::loss`] with respect to `s`.
    pub fn gradient(&self, s: f64) -> f64 {
        let d = s.exp();
        let mut g = 0.0;
        for t in &self.terms {
            let Some((px, p)) = t.project(d) else {
                return f64::NAN;
            };
            let (du, dv) = t.dpixel_ddepth(&p);
            let eu = (px.x - t.target.x) / self.width;
            let ev = (px.y - t.target.y) / self.height;
            g += 2.0 * (eu * du / self.width + ev * dv / self.height);
        }
        g * d
    }

    /// Root of summed squared pixel motion per unit log-depth; zero when
    /// the depth cannot be observed from the anchors.
    pub fn sensitivity(&self, s: f64) -> f64 {
        let d = s.exp();
        self.terms
            .iter()
            .filter_map(|t| t.project(d))
            .zip(&self.terms)
            .map(|((_, p), t)| {
                let (du, dv) = t.dpixel_ddepth(&p);
                (du * du + dv * dv) * d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// RMS pixel error at depth `d`.
    pub fn residual_px(&self, d: f64) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            match t.project(d) {
                Some((px, _)) => acc += (px - t.target).norm_squared(),
                None => return f64::INFINITY,
            }
        }
        (acc / self.terms.len().max(1) as f64).sqrt()
    }
}

/// Finds the depth of one source keypoint that best reprojects onto its
/// anchor matches, by backtracking gradient descent in log-depth.
///
/// Scale and shift are not separately identifiable from reprojection, so
/// the result is reported as `alpha = d* / d`, `beta = 0`.
pub fn align_keypoint(
    depth: f64,
    src_px: Point2<f64>,
    src: &Camera,
    anchors: &[(Camera, Point2<f64>)],
    image_size: (usize, usize),
    params: &AlignParams,
) -> Result<KeypointAlignment, AlignError> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(GeometryError::NonPositiveDepth(depth).into());
    }
    if anchors.is_empty() {
        return Err(AlignError::InvalidInput("keypoint without anchors".into()));
    }
    let problem = KeypointProblem::new(src_px, src, anchors, image_size);
    let s0 = depth.ln();
    let l0 = problem.loss(s0);
    if !l0.is_finite() {
        return Err(GeometryError::BehindCamera(0.0).into());
    }
    let unchanged = |iterations| KeypointAlignment {
        depth,
        alpha: 1.0,
        beta: 0.0,
        residual: problem.residual_px(depth),
        status: AlignStatus::NoDescent,
        iterations,
    };
    if problem.sensitivity(s0) < 1e-9 {
        return Ok(unchanged(0));
    }

    let mut s = s0;
    let mut l = l0;
    let mut step = params.initial_step;
    let mut iterations = 0;
    for it in 0..params.iterations {
        iterations = it + 1;
        if l == 0.0 {
            break;
        }
        let g = problem.gradient(s);
        if !g.is_finite() || g == 0.0 {
            break;
        }
        let mut accepted = false;
        for _ in 0..64 {
            let cand = s - step * g;
            let lc = problem.loss(cand);
            if lc <= l - 1e-4 * step * g * g {
                s = cand;
                l = lc;
                step *= 2.0;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    if !(l < l0) && l0 > 1e-24 {
        return Ok(unchanged(iterations));
    }
    let d = s.exp();
    Ok(KeypointAlignment {
        depth: d,
        alpha: d / depth,
        beta: 0.0,
        residual: problem.residual_px(d),
        status: AlignStatus::Converged,
        iterations,
    })
}

/// Aligns every keypoint independently and keeps the well-fitted ones.
///
/// `cameras` is indexed by view id; `anchor_view` in each match refers to it.
pub fn align_sparse(
    matches: &MatchSet,
    src: &Camera,
    cameras: &[Camera],
    image_size: (usize, usize),
    params: &AlignParams,
) -> Result<SparseGuidance, AlignError> {
    let keypoints = matches.keypoints();
    if keypoints.len() > params.max_keypoints {
        return Err(AlignError::TooManyKeypoints {
            got: keypoints.len(),
            cap: params.max_keypoints,
        });
    }
    for kp in &keypoints {
        for (view, _) in &kp.observations {
            if *view >= cameras.len() {
                return Err(AlignError::InvalidInput(format!(
                    "match refers to view {view}, only {} cameras",
                    cameras.len()
                )));
            }
        }
    }
    let solve = |kp: &KeypointMatches| -> Option<GuidancePoint> {
        let anchors: Vec<(Camera, Point2<f64>)> = kp
            .observations
            .iter()
            .map(|(v, px)| (cameras[*v], *px))
            .collect();
        let a = align_keypoint(kp.depth, kp.src, src, &anchors, image_size, params).ok()?;
        (a.status == AlignStatus::Converged && a.residual <= params.outlier_px).then_some(
            GuidancePoint {
                u: kp.src.x,
                v: kp.src.y,
                source_depth: kp.depth,
                depth: a.depth,
                alpha: a.alpha,
                beta: a.beta,
                residual: a.residual,
            },
        )
    };
    let solved: Vec<Option<GuidancePoint>> = keypoints.par_iter().map(solve).collect();
    let points: Vec<GuidancePoint> = solved.iter().flatten().copied().collect();
    if points.is_empty() {
        return Err(AlignError::EmptyGuidance);
    }
    Ok(SparseGuidance {
        dropped: keypoints.len() - points.len(),
        points,
    })
}
