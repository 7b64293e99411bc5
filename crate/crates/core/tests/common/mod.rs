//! Synthetic scenes shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Rotation3, Vector3};
use viewsynth::camgeo::{unproject_ray, Camera};
use viewsynth::{DepthMap, Image};

/// Slanted textured plane `z = z0 + a x + b y` in world coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Plane {
    pub z0: f64,
    pub a: f64,
    pub b: f64,
}

impl Plane {
    pub const DEFAULT: Plane = Plane {
        z0: 4.0,
        a: 0.15,
        b: 0.1,
    };

    /// Ray depth of the plane at pixel `(x, y)`, or `None` when the plane is
    /// behind the camera there.
    pub fn depth_at(&self, cam: &Camera, x: f64, y: f64) -> Option<f64> {
        let r = unproject_ray(&nalgebra::Point2::new(x, y), cam.k());
        let n = cam.rotation() * Vector3::new(-self.a, -self.b, 1.0);
        let d = (self.z0 + n.dot(&cam.translation())) / n.dot(&r);
        (d.is_finite() && d > 0.0).then_some(d)
    }

    pub fn depth_map(&self, cam: &Camera, w: usize, h: usize) -> DepthMap {
        DepthMap::from_fn(w, h, |x, y| {
            self.depth_at(cam, x as f64, y as f64).unwrap_or(f64::NAN)
        })
    }

    /// 8-bit texture sampled at the plane point seen through each pixel.
    pub fn render(&self, cam: &Camera, w: usize, h: usize) -> Image {
        let mut img = Image::zeros(w, h, 3);
        for y in 0..h {
            for x in 0..w {
                let Some(d) = self.depth_at(cam, x as f64, y as f64) else {
                    continue;
                };
                let p = unproject_ray(&nalgebra::Point2::new(x as f64, y as f64), cam.k()) * d;
                let pw = cam.camera_to_world(&p);
                let px = img.pixel_mut(x, y);
                for (c, v) in px.iter_mut().enumerate() {
                    let f = 0.5
                        + 0.25 * (7.0 * pw.x + 2.0 * c as f64).sin()
                        + 0.2 * (5.0 * pw.y - 1.3 * c as f64).cos();
                    *v = ((f.clamp(0.0, 1.0) * 255.0).round() / 255.0) as f32;
                }
            }
        }
        img
    }
}

pub fn camera(f: f64, w: usize, h: usize, yaw: f64, t: Vector3<f64>) -> Camera {
    Camera::from_parts(
        f,
        f,
        (w as f64 - 1.0) / 2.0,
        (h as f64 - 1.0) / 2.0,
        Rotation3::from_euler_angles(0.0, yaw, 0.0),
        t,
    )
    .expect("valid camera")
}

/// Sideways dolly with a slight pan, `n` views.
pub fn trajectory(n: usize, w: usize, h: usize) -> Vec<Camera> {
    (0..n)
        .map(|i| {
            let s = i as f64;
            camera(0.875 * w as f64, w, h, 0.004 * s, Vector3::new(-0.03 * s, 0.005 * s, 0.0))
        })
        .collect()
}
