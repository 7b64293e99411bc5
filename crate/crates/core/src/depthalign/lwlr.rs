use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AlignError, SparseGuidance};
use crate::raster::{DepthMap, INVALID_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LwlrParams {
    /// Gaussian kernel bandwidth, in pixel distances divided by `max(H, W)`.
    pub bandwidth: f64,
    /// Ridge penalty on the shift.
    pub lambda: f64,
}

impl Default for LwlrParams {
    fn default() -> Self {
        Self {
            bandwidth: 0.2,
            lambda: 1e-4,
        }
    }
}

/// Dense depth recovered from sparse guidance, together with the per-pixel
/// affine maps that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledDepth {
    pub depth: DepthMap,
    pub scale: DepthMap,
    pub shift: DepthMap,
}

const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy)]
struct Row {
    u: f64,
    v: f64,
    /// Unaligned depth at the guidance pixel.
    x: f64,
    /// Aligned depth.
    y: f64,
}

struct Problem {
    rows: Vec<Row>,
    norm: f64,
    inv_two_b2: f64,
    lambda: f64,
}

impl Problem {
    fn new(
        guidance: &SparseGuidance,
        depth: &DepthMap,
        params: &LwlrParams,
    ) -> Result<Self, AlignError> {
        if guidance.points.is_empty() {
            return Err(AlignError::EmptyGuidance);
        }
        if !(params.bandwidth > 0.0) || !(params.lambda >= 0.0) {
            return Err(AlignError::InvalidInput(format!(
                "need bandwidth > 0 and lambda >= 0, got {} and {}",
                params.bandwidth, params.lambda
            )));
        }
        let rows = guidance
            .points
            .iter()
            .map(|g| Row {
                u: g.u,
                v: g.v,
                x: depth.sample_nearest(g.u, g.v).unwrap_or(g.source_depth),
                y: g.depth,
            })
            .collect();
        Ok(Self {
            rows,
            norm: depth.width().max(depth.height()) as f64,
            inv_two_b2: 1.0 / (2.0 * params.bandwidth * params.bandwidth),
            lambda: params.lambda,
        })
    }

    fn solve(&self, x: usize, y: usize) -> Result<(f64, f64), AlignError> {
        let (qu, qv) = (x as f64, y as f64);
        // Normal equations [[a, b], [b, c]] [scale, shift] = [r0, r1].
        let (mut a, mut b, mut c, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for row in &self.rows {
            let du = (row.u - qu) / self.norm;
            let dv = (row.v - qv) / self.norm;
            let w = kernel_weight((du * du + dv * dv) * self.inv_two_b2);
            a += w * row.x * row.x;
            b += w * row.x;
            c += w;
            r0 += w * row.x * row.y;
            r1 += w * row.y;
        }
        c += self.lambda;
        let half_tr = 0.5 * (a + c);
        let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let ev_max = half_tr + disc;
        let det = a * c - b * b;
        if !(ev_max > 0.0) || !(det > 0.0) || ev_max * ev_max / det > MAX_CONDITION {
            return Err(AlignError::SingularSystem { x, y });
        }
        Ok(((c * r0 - b * r1) / det, (a * r1 - b * r0) / det))
    }
}

/// Gaussian kernel `exp(-q) / sqrt(2 pi)` where `q = dist^2 / (2 b^2)`.
#[inline]
fn kernel_weight(q: f64) -> f64 {
    const INV_SQRT_TAU: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_TAU * (-q).exp()
}

/// Weighted least-squares `(scale, shift)` at pixel `(x, y)`.
pub fn lwlr_pixel(
    x: usize,
    y: usize,
    guidance: &SparseGuidance,
    depth: &DepthMap,
    params: &LwlrParams,
) -> Result<(f64, f64), AlignError> {
    Problem::new(guidance, depth, params)?.solve(x, y)
}

/// Solves the regression at every pixel. Guided pixels take their aligned
/// depth verbatim; pixels with invalid input depth stay invalid.
pub fn lwlr_recover(
    depth: &DepthMap,
    guidance: &SparseGuidance,
    params: &LwlrParams,
) -> Result<ScaledDepth, AlignError> {
    let problem = Problem::new(guidance, depth, params)?;
    let (w, h) = (depth.width(), depth.height());
    let rows: Vec<Vec<(f64, f64)>> = (0..h)
        .into_par_iter()
        .map(|y| (0..w).map(|x| problem.solve(x, y)).collect())
        .collect::<Result<_, _>>()?;

    let mut scale = DepthMap::invalid(w, h);
    let mut shift = DepthMap::invalid(w, h);
    let mut out = DepthMap::invalid(w, h);
    for (y, row) in rows.iter().enumerate() {
        for (x, &(s, t)) in row.iter().enumerate() {
            scale.set(x, y, s);
            shift.set(x, y, t);
            let d = depth.get(x, y);
            let v = if DepthMap::is_valid_value(d) { s * d + t } else { INVALID_DEPTH };
            out.set(x, y, if DepthMap::is_valid_value(v) { v } else { INVALID_DEPTH });
        }
    }
    let mut guided = vec![false; w * h];
    for g in &guidance.points {
        let (gx, gy) = (g.u.round(), g.v.round());
        if gx < 0.0 || gy < 0.0 || gx >= w as f64 || gy >= h as f64 {
            continue;
        }
        let (gx, gy) = (gx as usize, gy as usize);
        if !std::mem::replace(&mut guided[gy * w + gx], true) {
            out.set(gx, gy, g.depth);
        }
    }
    Ok(ScaledDepth {
        depth: out,
        scale,
        shift,
    })
}
