//! WebAssembly bindings for a single-page demo of the core library:
//! the visual-condition schedule, forward warping of a synthetic scene and
//! dense depth recovery from sparse guidance.

use nalgebra::{Point2, Rotation3, Vector3};
use wasm_bindgen::prelude::*;

use viewsynth::camgeo::{forward_warp, unproject_ray, Camera};
use viewsynth::depthalign::{lwlr_recover, GuidancePoint, LwlrParams, SparseGuidance};
use viewsynth::pipeline::fill_holes;
use viewsynth::vcond::{Schedule, ScheduleParams};
use viewsynth::{DepthMap, Image, Mask};

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// `W_t`, `f(t)` and `log10 SNR(t)` for `t = 0..=T`, interleaved as
/// `[w_0, f_0, snr_0, w_1, ...]`.
pub fn schedule_table(t_decay_end: f64, v_decay_end: f64, b_w: f64) -> Result<Vec<f64>, String> {
    let sched = Schedule::new(ScheduleParams {
        t_decay_end,
        v_decay_end,
        b_w,
        ..ScheduleParams::default()
    })
    .map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(3 * (sched.num_timesteps() as usize + 1));
    for t in 0..=sched.num_timesteps() {
        let snr = sched.snr(t).map_err(|e| e.to_string())?;
        out.extend([sched.w_of_t(t), sched.f_of_t(t) as f64, snr.log10()]);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = scheduleCurves)]
pub fn schedule_curves(t_decay_end: f64, v_decay_end: f64, b_w: f64) -> Result<Vec<f64>, JsError> {
    schedule_table(t_decay_end, v_decay_end, b_w).map_err(js_err)
}

fn camera(width: usize, height: usize, yaw: f64, t: Vector3<f64>) -> Result<Camera, String> {
    let f = 0.9 * width as f64;
    Camera::from_parts(
        f,
        f,
        (width as f64 - 1.0) / 2.0,
        (height as f64 - 1.0) / 2.0,
        Rotation3::from_euler_angles(0.0, yaw, 0.0),
        t,
    )
    .map_err(|e| e.to_string())
}

/// A tilted checkered plane with a box standing in front of it, seen from
/// the origin.
fn scene(width: usize, height: usize, cam: &Camera) -> (Image, DepthMap) {
    let mut img = Image::zeros(width, height, 3);
    let mut depth = DepthMap::invalid(width, height);
    for y in 0..height {
        for x in 0..width {
            let ray = unproject_ray(&Point2::new(x as f64, y as f64), cam.k());
            // Plane z = 5 + 0.3 x, and a box face at z = 3 for |x|, |y| < 0.6.
            let d_plane = 5.0 / (1.0 - 0.3 * ray.x);
            let on_box = (ray.x * 3.0).abs() < 0.6 && (ray.y * 3.0 + 0.3).abs() < 0.6;
            let (d, color) = if on_box {
                let p = ray * 3.0;
                let stripe = ((p.x * 6.0).floor() as i64).rem_euclid(2) as f32;
                (3.0, [0.85, 0.35 + 0.3 * stripe, 0.2])
            } else {
                let p = ray * d_plane;
                let check = (((p.x * 2.0).floor() + (p.y * 2.0).floor()) as i64).rem_euclid(2) as f32;
                let g = 0.3 + 0.4 * check;
                (d_plane, [g * 0.6, g, g * 0.9 + 0.1])
            };
            depth.set(x, y, d);
            img.pixel_mut(x, y).copy_from_slice(&color);
        }
    }
    (img, depth)
}

fn to_rgba(img: &Image, holes: Option<&Mask>) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.width() * img.height() * 4);
    for y in 0..img.height() {
        for x in 0..img.width() {
            if holes.is_some_and(|m| !m.get(x, y)) {
                out.extend([255, 0, 255, 255]);
                continue;
            }
            for &v in img.pixel(x, y) {
                out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
            out.push(255);
        }
    }
    out
}

/// Synthetic source view that can be warped into a moving camera.
#[wasm_bindgen]
pub struct WarpDemo {
    width: usize,
    height: usize,
    src: Camera,
    image: Image,
    depth: DepthMap,
    coverage: f64,
}

impl WarpDemo {
    pub fn create(width: usize, height: usize) -> Result<WarpDemo, String> {
        if width < 8 || height < 8 || width * height > 1 << 20 {
            return Err(format!("unsupported size {width}x{height}"));
        }
        let src = camera(width, height, 0.0, Vector3::zeros())?;
        let (image, depth) = scene(width, height, &src);
        Ok(WarpDemo {
            width,
            height,
            src,
            image,
            depth,
            coverage: 1.0,
        })
    }

    /// RGBA of the source warped into a camera displaced by `(tx, ty, tz)`
    /// and panned by `yaw` radians. Holes are magenta unless `fill` is set.
    pub fn warp(&mut self, tx: f64, ty: f64, tz: f64, yaw: f64, fill: bool) -> Result<Vec<u8>, String> {
        let dst = camera(self.width, self.height, yaw, Vector3::new(tx, ty, tz))?;
        let out = forward_warp(&self.image, &self.depth, &self.src, &dst).map_err(|e| e.to_string())?;
        self.coverage = out.mask.fraction();
        Ok(if fill {
            to_rgba(&fill_holes(&out.image, &out.mask, Some(&self.image)).0, None)
        } else {
            to_rgba(&out.image, Some(&out.mask))
        })
    }
}

#[wasm_bindgen]
impl WarpDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(width: usize, height: usize) -> Result<WarpDemo, JsError> {
        Self::create(width, height).map_err(js_err)
    }

    #[wasm_bindgen(js_name = sourceRgba)]
    pub fn source_rgba(&self) -> Vec<u8> {
        to_rgba(&self.image, None)
    }

    #[wasm_bindgen(js_name = render)]
    pub fn render(&mut self, tx: f64, ty: f64, tz: f64, yaw: f64, fill: bool) -> Result<Vec<u8>, JsError> {
        self.warp(tx, ty, tz, yaw, fill).map_err(js_err)
    }

    /// Fraction of target pixels hit by the last warp.
    #[wasm_bindgen(getter)]
    pub fn coverage(&self) -> f64 {
        self.coverage
    }
}

/// Outcome of [`lwlr_demo`]: RGBA panels and the error statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LwlrDemoResult {
    pub input_rgba: Vec<u8>,
    pub recovered_rgba: Vec<u8>,
    pub truth_rgba: Vec<u8>,
    pub input_error: f64,
    pub recovered_error: f64,
}

fn depth_rgba(d: &DepthMap, lo: f64, hi: f64, marks: &[(usize, usize)]) -> Vec<u8> {
    let mut out = Vec::with_capacity(d.width() * d.height() * 4);
    for y in 0..d.height() {
        for x in 0..d.width() {
            let v = ((d.get(x, y) - lo) / (hi - lo)).clamp(0.0, 1.0);
            // Near is warm, far is cool.
            let (r, g, b) = (1.0 - v, 0.4 + 0.4 * (1.0 - (2.0 * v - 1.0).abs()), v);
            out.extend([(r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8, 255]);
        }
    }
    for &(x, y) in marks {
        let i = 4 * (y * d.width() + x);
        out[i..i + 4].copy_from_slice(&[255, 255, 255, 255]);
    }
    out
}

fn mean_rel_error(a: &DepthMap, truth: &DepthMap) -> f64 {
    let n = truth.data().len() as f64;
    a.data()
        .iter()
        .zip(truth.data())
        .map(|(x, t)| ((x - t) / t).abs())
        .sum::<f64>()
        / n
}

/// A relative depth map that is off from the truth by a spatially varying
/// scale and shift, repaired from `points` guidance pixels.
pub fn lwlr_demo(
    width: usize,
    height: usize,
    points: usize,
    bandwidth: f64,
    seed: u64,
) -> Result<LwlrDemoResult, String> {
    if width * height > 1 << 18 || width < 4 || height < 4 {
        return Err(format!("unsupported size {width}x{height}"));
    }
    if points == 0 || points > width * height {
        return Err(format!("need between 1 and {} points", width * height));
    }
    let truth = DepthMap::from_fn(width, height, |x, y| {
        let (u, v) = (x as f64 / width as f64, y as f64 / height as f64);
        2.0 + 1.5 * u + (6.0 * v).sin() * 0.4 + if (u - 0.6).hypot(v - 0.5) < 0.2 { -0.8 } else { 0.0 }
    });
    // truth = s * input + b, with s and b drifting across the frame.
    let scale = |x: usize, y: usize| 0.6 + 0.8 * x as f64 / width as f64 + 0.2 * y as f64 / height as f64;
    let shift = |x: usize, _y: usize| 0.3 * (x as f64 / width as f64 * 3.0).cos();
    let input = DepthMap::from_fn(width, height, |x, y| (truth.get(x, y) - shift(x, y)) / scale(x, y));

    let mut rng = viewsynth::rng::stream(seed, viewsynth::rng::Purpose::Generic, 0);
    let picked = rand::seq::index::sample(&mut rng, width * height, points);
    let guidance = SparseGuidance {
        points: picked
            .iter()
            .map(|i| {
                let (x, y) = (i % width, i / width);
                let (d, t) = (input.get(x, y), truth.get(x, y));
                GuidancePoint {
                    u: x as f64,
                    v: y as f64,
                    source_depth: d,
                    depth: t,
                    alpha: t / d,
                    beta: 0.0,
                    residual: 0.0,
                }
            })
            .collect(),
        dropped: 0,
    };
    let params = LwlrParams {
        bandwidth,
        ..LwlrParams::default()
    };
    let rec = lwlr_recover(&input, &guidance, &params).map_err(|e| e.to_string())?;
    let marks: Vec<(usize, usize)> = picked.iter().map(|i| (i % width, i / width)).collect();
    let (lo, hi) = truth
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    Ok(LwlrDemoResult {
        input_rgba: depth_rgba(&input, lo, hi, &marks),
        recovered_rgba: depth_rgba(&rec.depth, lo, hi, &[]),
        truth_rgba: depth_rgba(&truth, lo, hi, &[]),
        input_error: mean_rel_error(&input, &truth),
        recovered_error: mean_rel_error(&rec.depth, &truth),
    })
}

/// JS view of [`LwlrDemoResult`].
#[wasm_bindgen]
pub struct LwlrDemo {
    inner: LwlrDemoResult,
}

#[wasm_bindgen]
impl LwlrDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(width: usize, height: usize, points: usize, bandwidth: f64, seed: u64) -> Result<LwlrDemo, JsError> {
        lwlr_demo(width, height, points, bandwidth, seed)
            .map(|inner| LwlrDemo { inner })
            .map_err(js_err)
    }

    #[wasm_bindgen(js_name = inputRgba)]
    pub fn input_rgba(&self) -> Vec<u8> {
        self.inner.input_rgba.clone()
    }

    #[wasm_bindgen(js_name = recoveredRgba)]
    pub fn recovered_rgba(&self) -> Vec<u8> {
        self.inner.recovered_rgba.clone()
    }

    #[wasm_bindgen(js_name = truthRgba)]
    pub fn truth_rgba(&self) -> Vec<u8> {
        self.inner.truth_rgba.clone()
    }

    #[wasm_bindgen(getter, js_name = inputError)]
    pub fn input_error(&self) -> f64 {
        self.inner.input_error
    }

    #[wasm_bindgen(getter, js_name = recoveredError)]
    pub fn recovered_error(&self) -> f64 {
        self.inner.recovered_error
    }
}
