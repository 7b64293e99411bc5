use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CondError;
use crate::raster::Mask;
use crate::rng::{self, Purpose};

/// Random free-form mask made of thick random-walk strokes and rectangles.
/// Lengths are fractions of the shorter image side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrregularMaskParams {
    pub strokes: usize,
    pub rects: usize,
    pub stroke_width: (f64, f64),
    pub stroke_vertices: (usize, usize),
    pub stroke_step: (f64, f64),
    pub rect_size: (f64, f64),
    /// Accepted range of the masked fraction.
    pub fraction: (f64, f64),
    pub max_tries: usize,
}

impl Default for IrregularMaskParams {
    fn default() -> Self {
        Self {
            strokes: 4,
            rects: 2,
            stroke_width: (0.04, 0.12),
            stroke_vertices: (4, 10),
            stroke_step: (0.08, 0.25),
            rect_size: (0.15, 0.45),
            fraction: (0.1, 0.6),
            max_tries: 16,
        }
    }
}

fn stamp_disk(mask: &mut Mask, cx: f64, cy: f64, r: f64) {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let x0 = ((cx - r).floor() as i64).max(0);
    let x1 = ((cx + r).ceil() as i64).min(w - 1);
    let y0 = ((cy - r).floor() as i64).max(0);
    let y1 = ((cy + r).ceil() as i64).min(h - 1);
    let r2 = r * r;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy <= r2 {
                mask.set(x as usize, y as usize, true);
            }
        }
    }
}

fn draw(mask: &mut Mask, p: &IrregularMaskParams, rng: &mut impl Rng) {
    let (w, h) = (mask.width() as f64, mask.height() as f64);
    let side = w.min(h);
    let range = |rng: &mut dyn rand::RngCore, (lo, hi): (f64, f64)| {
        if hi > lo {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    };
    for _ in 0..p.strokes {
        let radius = 0.5 * side * range(rng, p.stroke_width);
        let n = if p.stroke_vertices.1 > p.stroke_vertices.0 {
            rng.gen_range(p.stroke_vertices.0..=p.stroke_vertices.1)
        } else {
            p.stroke_vertices.0
        };
        let (mut x, mut y) = (rng.gen_range(0.0..w), rng.gen_range(0.0..h));
        let mut angle = rng.gen_range(0.0..std::f64::consts::TAU);
        for _ in 0..n {
            angle += rng.gen_range(-1.2..1.2);
            let len = side * range(rng, p.stroke_step);
            let (nx, ny) = (
                (x + len * angle.cos()).clamp(0.0, w - 1.0),
                (y + len * angle.sin()).clamp(0.0, h - 1.0),
            );
            let steps = ((len / radius.max(0.5)).ceil() as usize * 2).max(1);
            for s in 0..=steps {
                let a = s as f64 / steps as f64;
                stamp_disk(mask, x + a * (nx - x), y + a * (ny - y), radius);
            }
            x = nx;
            y = ny;
        }
    }
    for _ in 0..p.rects {
        let rw = side * range(rng, p.rect_size);
        let rh = side * range(rng, p.rect_size);
        let x0 = rng.gen_range(0.0..(w - rw).max(1.0)) as usize;
        let y0 = rng.gen_range(0.0..(h - rh).max(1.0)) as usize;
        let x1 = ((x0 as f64 + rw) as usize).min(mask.width());
        let y1 = ((y0 as f64 + rh) as usize).min(mask.height());
        for y in y0..y1 {
            for x in x0..x1 {
                mask.set(x, y, true);
            }
        }
    }
}

/// Draws masks until the masked fraction lands in `params.fraction`.
pub fn irregular_mask(
    seed: u64,
    height: usize,
    width: usize,
    params: &IrregularMaskParams,
) -> Result<Mask, CondError> {
    if height < 8 || width < 8 {
        return Err(CondError::InvalidParameter(format!(
            "mask size {width}x{height} below 8x8"
        )));
    }
    let (lo, hi) = params.fraction;
    for attempt in 0..params.max_tries.max(1) {
        let mut rng = rng::stream(seed, Purpose::IrregularMask, attempt as u64);
        let mut mask = Mask::filled(width, height, false);
        draw(&mut mask, params, &mut rng);
        let f = mask.fraction();
        if f >= lo && f <= hi {
            return Ok(mask);
        }
    }
    Err(CondError::MaskFractionUnreachable {
        lo,
        hi,
        tries: params.max_tries,
    })
}
