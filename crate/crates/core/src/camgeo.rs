//! Pinhole cameras, pixel reprojection between views and z-buffered forward
//! warping.
//!
//! Pixel `(u, v)` addresses the center of cell `(u, v)`: `u` is the column,
//! `v` the row. Extrinsics are world-to-camera.

use nalgebra::{Matrix3, Matrix4, Point2, Rotation3, Vector3};
use thiserror::Error;

use crate::raster::{DepthMap, Image, Mask, INVALID_DEPTH};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("point is behind the target camera (z = {0})")]
    BehindCamera(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Pinhole camera: intrinsics `k` (zero skew) and world-to-camera rigid
/// transform `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    k: Matrix3<f64>,
    t: Matrix4<f64>,
}

impl Camera {
    pub fn new(k: Matrix3<f64>, t: Matrix4<f64>) -> Result<Self, GeometryError> {
        if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "fx = {}, fy = {} must be positive",
                k[(0, 0)],
                k[(1, 1)]
            )));
        }
        if k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 || k[(2, 2)] != 1.0 {
            return Err(GeometryError::InvalidIntrinsics(
                "last row must be (0, 0, 1)".into(),
            ));
        }
        if k[(0, 1)] != 0.0 || k[(1, 0)] != 0.0 {
            return Err(GeometryError::InvalidIntrinsics("skew must be zero".into()));
        }
        if !k.iter().chain(t.iter()).all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics("non-finite entry".into()));
        }
        let r = t.fixed_view::<3, 3>(0, 0).into_owned();
        let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
        if ortho >= 1e-9 {
            return Err(GeometryError::InvalidRotation(format!(
                "|R^T R - I| = {ortho:e}"
            )));
        }
        if r.determinant() <= 0.0 {
            return Err(GeometryError::InvalidRotation(format!(
                "det(R) = {}",
                r.determinant()
            )));
        }
        if t[(3, 0)] != 0.0 || t[(3, 1)] != 0.0 || t[(3, 2)] != 0.0 || t[(3, 3)] != 1.0 {
            return Err(GeometryError::InvalidRotation(
                "last row of T must be (0, 0, 0, 1)".into(),
            ));
        }
        Ok(Self { k, t })
    }

    pub fn from_parts(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: Rotation3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        let k = Matrix3::new(fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0);
        let mut t = Matrix4::identity();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(rotation.matrix());
        t.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
        Self::new(k, t)
    }

    /// Camera at the world origin looking down +z.
    pub fn identity_pose(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        Self::from_parts(fx, fy, cx, cy, Rotation3::identity(), Vector3::zeros())
    }

    pub fn k(&self) -> &Matrix3<f64> {
        &self.k
    }

    pub fn t(&self) -> &Matrix4<f64> {
        &self.t
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.t.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.t.fixed_view::<3, 1>(0, 3).into_owned()
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * p + self.translation()
    }

    pub fn camera_to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation().transpose() * (p - self.translation())
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation().transpose() * self.translation())
    }
}

/// Rigid motion taking source-camera coordinates to target-camera
/// coordinates: `x_dst = r * x_src + t`.
#[derive(Debug, Clone, Copy)]
pub struct RelativePose {
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
}

impl RelativePose {
    pub fn between(src: &Camera, dst: &Camera) -> Self {
        let rs = src.rotation();
        let ts = src.translation();
        let rd = dst.rotation();
        let td = dst.translation();
        let r = rd * rs.transpose();
        let t = td - r * ts;
        Self { r, t }
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.r * p + self.t
    }
}

/// Pinhole projection of a camera-frame point.
pub fn project(p: &Vector3<f64>, k: &Matrix3<f64>) -> Result<Point2<f64>, GeometryError> {
    if !(p.z > 0.0) {
        return Err(GeometryError::NonPositiveDepth(p.z));
    }
    Ok(project_unchecked(p, k))
}

#[inline]
pub(crate) fn project_unchecked(p: &Vector3<f64>, k: &Matrix3<f64>) -> Point2<f64> {
    Point2::new(
        k[(0, 0)] * (p.x / p.z) + k[(0, 2)],
        k[(1, 1)] * (p.y / p.z) + k[(1, 2)],
    )
}

/// Back-projects pixel `px` at `depth` (camera z) into the camera frame.
pub fn unproject(
    px: &Point2<f64>,
    depth: f64,
    k: &Matrix3<f64>,
) -> Result<Vector3<f64>, GeometryError> {
    if !(depth > 0.0) {
        return Err(GeometryError::NonPositiveDepth(depth));
    }
    Ok(unproject_ray(px, k) * depth)
}

/// Ray through pixel `px` with unit z component.
#[inline]
pub fn unproject_ray(px: &Point2<f64>, k: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        (px.x - k[(0, 2)]) / k[(0, 0)],
        (px.y - k[(1, 2)]) / k[(1, 1)],
        1.0,
    )
}

/// Maps a source pixel with known depth into the target view. Returns the
/// target pixel and the point's depth in the target camera.
pub fn reproject_pixel(
    px: &Point2<f64>,
    depth: f64,
    src: &Camera,
    dst: &Camera,
) -> Result<(Point2<f64>, f64), GeometryError> {
    let p_src = unproject(px, depth, src.k())?;
    let p_dst = RelativePose::between(src, dst).apply(&p_src);
    if !(p_dst.z > 0.0) {
        return Err(GeometryError::BehindCamera(p_dst.z));
    }
    Ok((project_unchecked(&p_dst, dst.k()), p_dst.z))
}

/// Output of [`forward_warp`]. `mask` is true where a source pixel landed;
/// elsewhere `image` is 0 and `depth` is invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpResult {
    pub image: Image,
    pub mask: Mask,
    pub depth: DepthMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WarpOptions {
    /// Splat each point to the 2x2 block around its position instead of the
    /// single nearest pixel.
    pub splat_2x2: bool,
}

/// Splats every valid source pixel into the target view, resolving
/// collisions with a z-buffer (smaller target depth wins; on exact ties the
/// earlier source pixel in row-major order is kept).
pub fn forward_warp(
    src_image: &Image,
    src_depth: &DepthMap,
    src: &Camera,
    dst: &Camera,
) -> Result<WarpResult, GeometryError> {
    forward_warp_with(src_image, src_depth, src, dst, WarpOptions::default())
}

pub fn forward_warp_with(
    src_image: &Image,
    src_depth: &DepthMap,
    src: &Camera,
    dst: &Camera,
    opts: WarpOptions,
) -> Result<WarpResult, GeometryError> {
    let (w, h, ch) = (src_image.width(), src_image.height(), src_image.channels());
    if src_depth.width() != w || src_depth.height() != h {
        return Err(GeometryError::ShapeMismatch(format!(
            "image {}x{} vs depth {}x{}",
            w,
            h,
            src_depth.width(),
            src_depth.height()
        )));
    }
    let rel = RelativePose::between(src, dst);
    let mut out = Image::zeros(w, h, ch);
    let mut mask = Mask::filled(w, h, false);
    let mut zbuf = DepthMap::invalid(w, h);

    let mut splat = |tx: i64, ty: i64, z: f64, color: &[f32]| {
        if tx < 0 || ty < 0 || tx >= w as i64 || ty >= h as i64 {
            return;
        }
        let (tx, ty) = (tx as usize, ty as usize);
        if mask.get(tx, ty) && zbuf.get(tx, ty) <= z {
            return;
        }
        mask.set(tx, ty, true);
        zbuf.set(tx, ty, z);
        out.pixel_mut(tx, ty).copy_from_slice(color);
    };

    for y in 0..h {
        for x in 0..w {
            let d = src_depth.get(x, y);
            if !DepthMap::is_valid_value(d) {
                continue;
            }
            let p = unproject_ray(&Point2::new(x as f64, y as f64), src.k()) * d;
            let q = rel.apply(&p);
            if !(q.z > 0.0) {
                continue;
            }
            let uv = project_unchecked(&q, dst.k());
            if !(uv.x.is_finite() && uv.y.is_finite()) {
                continue;
            }
            let color = src_image.pixel(x, y);
            if opts.splat_2x2 {
                let x0 = uv.x.floor() as i64;
                let y0 = uv.y.floor() as i64;
                for dy in 0..2 {
                    for dx in 0..2 {
                        splat(x0 + dx, y0 + dy, q.z, color);
                    }
                }
            } else {
                splat(uv.x.round() as i64, uv.y.round() as i64, q.z, color);
            }
        }
    }
    // Keep the invariant explicit: uncovered pixels hold the fill value.
    debug_assert!(mask
        .data()
        .iter()
        .zip(zbuf.data())
        .all(|(&m, &z)| m || z == INVALID_DEPTH));
    Ok(WarpResult {
        image: out,
        mask,
        depth: zbuf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cam100() -> Camera {
        Camera::identity_pose(100.0, 100.0, 50.0, 50.0).unwrap()
    }

    fn translated(c: &Camera, t: Vector3<f64>) -> Camera {
        Camera::from_parts(
            c.k()[(0, 0)],
            c.k()[(1, 1)],
            c.k()[(0, 2)],
            c.k()[(1, 2)],
            Rotation3::identity(),
            t,
        )
        .unwrap()
    }

    #[test]
    fn reproject_identity() {
        let c = cam100();
        let (px, d) = reproject_pixel(&Point2::new(10.0, 20.0), 2.0, &c, &c).unwrap();
        assert_abs_diff_eq!(px.x, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(px.y, 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn reproject_forward_motion() {
        let src = cam100();
        let dst = translated(&src, Vector3::new(0.0, 0.0, -1.0));
        let (px, d) = reproject_pixel(&Point2::new(50.0, 50.0), 4.0, &src, &dst).unwrap();
        assert_abs_diff_eq!(px.x, 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(px.y, 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d, 3.0, epsilon = 1e-12);

        let (px, d) = reproject_pixel(&Point2::new(60.0, 50.0), 4.0, &src, &dst).unwrap();
        // X = (0.4, 0, 4) -> (0.4, 0, 3) -> u = 100 * 0.4 / 3 + 50
        assert_abs_diff_eq!(px.x, 100.0 * 0.4 / 3.0 + 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(px.x, 63.333_333_333_333, epsilon = 1e-9);
        assert_abs_diff_eq!(px.y, 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn reproject_errors() {
        let src = cam100();
        assert_eq!(
            reproject_pixel(&Point2::new(1.0, 1.0), 0.0, &src, &src),
            Err(GeometryError::NonPositiveDepth(0.0))
        );
        let dst = translated(&src, Vector3::new(0.0, 0.0, -5.0));
        assert!(matches!(
            reproject_pixel(&Point2::new(50.0, 50.0), 2.0, &src, &dst),
            Err(GeometryError::BehindCamera(_))
        ));
    }

    #[test]
    fn project_unproject() {
        let k = cam100().k().to_owned();
        let p = unproject(&Point2::new(50.0, 50.0), 3.0, &k).unwrap();
        assert_eq!(p, Vector3::new(0.0, 0.0, 3.0));
        let px = project(&Vector3::new(1.0, 0.0, 2.0), &k).unwrap();
        assert_abs_diff_eq!(px.x, 100.0, epsilon = 1e-12);
        let px0 = Point2::new(13.5, 77.25);
        let back = project(&unproject(&px0, 3.7, &k).unwrap(), &k).unwrap();
        assert_abs_diff_eq!(back.x, px0.x, epsilon = 1e-9);
        assert_abs_diff_eq!(back.y, px0.y, epsilon = 1e-9);
        assert!(project(&Vector3::new(0.0, 0.0, 0.0), &k).is_err());
        assert!(unproject(&px0, -1.0, &k).is_err());
    }

    #[test]
    fn camera_validation() {
        let k = Matrix3::new(100.0, 0.0, 5.0, 0.0, 100.0, 5.0, 0.0, 0.0, 1.0);
        let mut t = Matrix4::identity();
        t[(0, 0)] = -1.0;
        assert!(matches!(
            Camera::new(k, t),
            Err(GeometryError::InvalidRotation(_))
        ));
        let mut k2 = k;
        k2[(0, 0)] = 0.0;
        assert!(matches!(
            Camera::new(k2, Matrix4::identity()),
            Err(GeometryError::InvalidIntrinsics(_))
        ));
    }

    #[test]
    fn warp_identity_is_exact() {
        let img = Image::from_fn(12, 9, 3, |x, y, c| ((x * 31 + y * 17 + c * 7) % 97) as f32 / 97.0);
        let depth = DepthMap::from_fn(12, 9, |x, y| 1.0 + 0.1 * x as f64 + 0.05 * y as f64);
        let c = Camera::identity_pose(20.0, 20.0, 6.0, 4.5).unwrap();
        let out = forward_warp(&img, &depth, &c, &c).unwrap();
        assert!(out.mask.data().iter().all(|&m| m));
        assert_eq!(out.image, img);
    }

    #[test]
    fn warp_zbuffer_keeps_nearest() {
        // With unit focal length, pixel x at depth d lands on x + tx / d + cx.
        // Columns 0 and 1 collide when tx / d0 = 1 + tx / d1.
        let k = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        let src = Camera::new(k, Matrix4::identity()).unwrap();
        let cases = [
            // (depths, tx, cx, landing column, expected color)
            ([3.0, 2.0], -6.0, 3.0, 1usize, 0.75f32),
            ([2.0, 3.0], 6.0, 0.0, 3usize, 0.25f32),
        ];
        for (depths, tx, cx, col, color) in cases {
            let dst = Camera::from_parts(
                1.0,
                1.0,
                cx,
                0.0,
                Rotation3::identity(),
                Vector3::new(tx, 0.0, 0.0),
            )
            .unwrap();
            let img = Image::from_fn(4, 1, 1, |x, _, _| [0.25, 0.75, 0.0, 0.0][x]);
            let mut d = vec![f64::NAN; 4];
            d[..2].copy_from_slice(&depths);
            let depth = DepthMap::new(4, 1, d).unwrap();
            let out = forward_warp(&img, &depth, &src, &dst).unwrap();
            assert_eq!(out.mask.count(), 1);
            assert!(out.mask.get(col, 0));
            assert_eq!(out.image.get(col, 0, 0), color);
            assert_eq!(out.depth.get(col, 0), 2.0);
        }
    }

    #[test]
    fn warp_rejects_shape_mismatch() {
        let img = Image::zeros(4, 4, 3);
        let depth = DepthMap::invalid(4, 3);
        let c = cam100();
        assert!(matches!(
            forward_warp(&img, &depth, &c, &c),
            Err(GeometryError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn splat_2x2_covers_more() {
        let img = Image::filled(16, 16, 1, 0.5);
        let depth = DepthMap::from_fn(16, 16, |_, _| 4.0);
        let src = Camera::identity_pose(16.0, 16.0, 8.0, 8.0).unwrap();
        let dst = translated(&src, Vector3::new(0.0, 0.0, 2.0));
        let single = forward_warp(&img, &depth, &src, &dst).unwrap();
        let quad =
            forward_warp_with(&img, &depth, &src, &dst, WarpOptions { splat_2x2: true }).unwrap();
        assert!(quad.mask.count() > single.mask.count());
    }
}
