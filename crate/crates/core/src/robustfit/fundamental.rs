use nalgebra::{DMatrix, Matrix3, Point2, Vector3};
use rand::seq::index;

use super::FitError;
use crate::rng::{self, Purpose};

/// Pixel in the first image and its match in the second.
pub type Correspondence = (Point2<f64>, Point2<f64>);

/// Relative singular value below which a minimal design matrix is treated as
/// having more than one null direction.
const RANK_EPS: f64 = 1e-10;

/// Rank-2 fundamental matrix with unit Frobenius norm, mapping points of the
/// first image to epipolar lines in the second: `x2^T F x1 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrix(Matrix3<f64>);

impl FundamentalMatrix {
    /// Projects `m` onto the nearest rank-2 matrix and normalizes it.
    pub fn new(m: Matrix3<f64>) -> Result<Self, FitError> {
        let svd = m.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(FitError::DegenerateConfiguration),
        };
        let mut s = svd.singular_values;
        let imin = s.imin();
        s[imin] = 0.0;
        let r2 = u * Matrix3::from_diagonal(&s) * v_t;
        Self::normalized(r2)
    }

    fn normalized(m: Matrix3<f64>) -> Result<Self, FitError> {
        let n = m.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(FitError::DegenerateConfiguration);
        }
        let mut f = m / n;
        // Fix the overall sign so equal models compare equal.
        let imax = f.iamax_full();
        if f[imax] < 0.0 {
            f = -f;
        }
        Ok(Self(f))
    }

    /// Wraps a matrix as-is, without rank projection or normalization.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }
}

/// First-order geometric (Sampson) error of a correspondence, in squared
/// pixels.
pub fn sampson_distance(
    f: &FundamentalMatrix,
    x1: &Point2<f64>,
    x2: &Point2<f64>,
) -> Result<f64, FitError> {
    let a = Vector3::new(x1.x, x1.y, 1.0);
    let b = Vector3::new(x2.x, x2.y, 1.0);
    let m = f.matrix();
    let fa = m * a;
    let ftb = m.transpose() * b;
    let num = b.dot(&fa);
    let den = fa.x * fa.x + fa.y * fa.y + ftb.x * ftb.x + ftb.y * ftb.y;
    if den < 1e-300 {
        return Err(FitError::ZeroGradient);
    }
    Ok(num * num / den)
}

/// Similarity taking the points' centroid to the origin and their RMS
/// distance from it to sqrt(2).
fn normalizing_transform<'a>(pts: impl Iterator<Item = &'a Point2<f64>> + Clone) -> Option<Matrix3<f64>> {
    let n = pts.clone().count() as f64;
    let (sx, sy) = pts.clone().fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
    let (cx, cy) = (sx / n, sy / n);
    let ms = pts
        .map(|p| (p.x - cx).powi(2) + (p.y - cy).powi(2))
        .sum::<f64>()
        / n;
    if !(ms > 0.0) {
        return None;
    }
    let s = (2.0 / ms).sqrt();
    Some(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

/// Normalized eight-point estimate from `>= 8` correspondences (least
/// squares when more are given), followed by rank-2 projection.
pub fn eight_point(corrs: &[Correspondence]) -> Result<FundamentalMatrix, FitError> {
    if corrs.len() < 8 {
        return Err(FitError::TooFewCorrespondences(corrs.len()));
    }
    let t1 = normalizing_transform(corrs.iter().map(|c| &c.0))
        .ok_or(FitError::DegenerateConfiguration)?;
    let t2 = normalizing_transform(corrs.iter().map(|c| &c.1))
        .ok_or(FitError::DegenerateConfiguration)?;

    let rows = corrs.len().max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (r, (p1, p2)) in corrs.iter().enumerate() {
        let x1 = t1 * Vector3::new(p1.x, p1.y, 1.0);
        let x2 = t2 * Vector3::new(p2.x, p2.y, 1.0);
        for i in 0..3 {
            for j in 0..3 {
                a[(r, 3 * i + j)] = x2[i] * x1[j];
            }
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(FitError::DegenerateConfiguration)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smax = svd.singular_values[order[order.len() - 1]];
    let second = svd.singular_values[order[1]];
    if !(smax > 0.0) || second / smax < RANK_EPS {
        return Err(FitError::DegenerateConfiguration);
    }
    let null = v_t.row(order[0]);
    let fhat = Matrix3::from_row_slice(null.transpose().as_slice());
    let fhat = FundamentalMatrix::new(fhat)?;
    FundamentalMatrix::normalized(t2.transpose() * fhat.matrix() * t1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalRansacParams {
    pub iterations: usize,
    /// Sampson distance threshold in squared pixels.
    pub inlier_tol: f64,
}

impl Default for FundamentalRansacParams {
    fn default() -> Self {
        Self {
            iterations: 1000,
            inlier_tol: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalFit {
    pub f: FundamentalMatrix,
    pub inliers: Vec<bool>,
    pub inlier_count: usize,
}

fn score(f: &FundamentalMatrix, corrs: &[Correspondence], tol: f64) -> (usize, Vec<bool>) {
    let flags: Vec<bool> = corrs
        .iter()
        .map(|(a, b)| sampson_distance(f, a, b).is_ok_and(|d| d <= tol))
        .collect();
    (flags.iter().filter(|&&x| x).count(), flags)
}

/// RANSAC over random 8-point samples; the candidate with the most inliers
/// (earliest on ties) is refit on its inlier set.
pub fn ransac_fundamental(
    corrs: &[Correspondence],
    params: &FundamentalRansacParams,
    seed: u64,
) -> Result<FundamentalFit, FitError> {
    if corrs.len() < 8 {
        return Err(FitError::TooFewCorrespondences(corrs.len()));
    }
    if params.iterations == 0 {
        return Err(FitError::InvalidParameter("iterations must be >= 1".into()));
    }
    if !(params.inlier_tol > 0.0) {
        return Err(FitError::InvalidParameter("inlier_tol must be > 0".into()));
    }
    let mut rng = rng::stream(seed, Purpose::RansacFundamental, 0);
    let mut best: Option<(usize, FundamentalMatrix, Vec<bool>)> = None;
    let mut sample = Vec::with_capacity(8);
    let iterations = if corrs.len() == 8 { 1 } else { params.iterations };
    for _ in 0..iterations {
        sample.clear();
        sample.extend(
            index::sample(&mut rng, corrs.len(), 8)
                .iter()
                .map(|i| corrs[i]),
        );
        let Ok(f) = eight_point(&sample) else {
            continue;
        };
        let (count, flags) = score(&f, corrs, params.inlier_tol);
        if best.as_ref().is_none_or(|(c, _, _)| count > *c) {
            best = Some((count, f, flags));
        }
    }
    let (count, f, flags) = best.ok_or(FitError::DegenerateConfiguration)?;

    if count >= 8 {
        let inlier_set: Vec<Correspondence> = corrs
            .iter()
            .zip(&flags)
            .filter(|(_, &m)| m)
            .map(|(c, _)| *c)
            .collect();
        if let Ok(refit) = eight_point(&inlier_set) {
            let (rc, rflags) = score(&refit, corrs, params.inlier_tol);
            if rc >= count {
                return Ok(FundamentalFit {
                    f: refit,
                    inliers: rflags,
                    inlier_count: rc,
                });
            }
        }
    }
    Ok(FundamentalFit {
        f,
        inliers: flags,
        inlier_count: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camgeo::{reproject_pixel, Camera};
    use nalgebra::{Rotation3, Vector3};
    use rand::Rng;

    fn stereo_pair() -> (Camera, Camera) {
        let a = Camera::identity_pose(300.0, 300.0, 160.0, 120.0).unwrap();
        let b = Camera::from_parts(
            300.0,
            300.0,
            160.0,
            120.0,
            Rotation3::from_euler_angles(0.02, -0.05, 0.01),
            Vector3::new(-0.4, 0.05, 0.1),
        )
        .unwrap();
        (a, b)
    }

    fn synthetic(n: usize, seed: u64) -> Vec<Correspondence> {
        let (a, b) = stereo_pair();
        let mut rng = crate::rng::stream(seed, Purpose::Generic, 0);
        let mut out = Vec::new();
        while out.len() < n {
            let p = Point2::new(rng.gen_range(0.0..320.0), rng.gen_range(0.0..240.0));
            let d = rng.gen_range(2.0..8.0);
            let (q, _) = reproject_pixel(&p, d, &a, &b).unwrap();
            out.push((p, q));
        }
        out
    }

    #[test]
    fn sampson_pure_translation_example() {
        let f = FundamentalMatrix::from_matrix_unchecked(Matrix3::new(
            0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0,
        ));
        let d = sampson_distance(&f, &Point2::new(0.0, 0.0), &Point2::new(0.0, 1.0)).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        // Normalizing F does not change the distance.
        let g = FundamentalMatrix::new(*f.matrix()).unwrap();
        let d2 = sampson_distance(&g, &Point2::new(0.0, 0.0), &Point2::new(0.0, 1.0)).unwrap();
        assert!((d2 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sampson_zero_gradient() {
        let f = FundamentalMatrix::from_matrix_unchecked(Matrix3::zeros());
        assert_eq!(
            sampson_distance(&f, &Point2::new(1.0, 2.0), &Point2::new(3.0, 4.0)),
            Err(FitError::ZeroGradient)
        );
    }

    #[test]
    fn sampson_is_second_order_in_noise() {
        let corrs = synthetic(50, 1);
        let f = eight_point(&corrs).unwrap();
        let (p, q) = corrs[0];
        let eps = 1e-4;
        let dir = nalgebra::Vector2::new(0.6, -0.8);
        let d1 = sampson_distance(&f, &p, &(q + dir * eps)).unwrap();
        let d2 = sampson_distance(&f, &p, &(q + dir * 2.0 * eps)).unwrap();
        let ratio = d2 / d1;
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn exact_data_gives_zero_sampson() {
        let corrs = synthetic(200, 2);
        let fit = ransac_fundamental(
            &corrs,
            &FundamentalRansacParams {
                iterations: 200,
                inlier_tol: 0.25,
            },
            7,
        )
        .unwrap();
        assert_eq!(fit.inlier_count, 200);
        for (a, b) in &corrs {
            assert!(sampson_distance(&fit.f, a, b).unwrap() < 1e-6);
        }
        let m = fit.f.matrix();
        assert!((m.norm() - 1.0).abs() < 1e-12);
        let s = m.singular_values();
        assert!(s.min() / s.max() < 1e-8);
    }

    #[test]
    fn displaced_points_are_outliers() {
        let mut corrs = synthetic(200, 3);
        let mut rng = crate::rng::stream(4, Purpose::Generic, 0);
        for c in corrs.iter_mut().take(40) {
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            c.1 += nalgebra::Vector2::new(a.cos(), a.sin()) * 10.0;
        }
        let fit = ransac_fundamental(
            &corrs,
            &FundamentalRansacParams {
                iterations: 500,
                inlier_tol: 0.25,
            },
            11,
        )
        .unwrap();
        let excluded = fit.inliers[..40].iter().filter(|&&f| !f).count();
        assert!(excluded >= 36, "excluded {excluded}");
        assert!(fit.inliers[40..].iter().all(|&f| f));
    }

    #[test]
    fn too_few_and_degenerate() {
        let corrs = synthetic(7, 5);
        assert_eq!(
            ransac_fundamental(&corrs, &FundamentalRansacParams::default(), 0),
            Err(FitError::TooFewCorrespondences(7))
        );
        // No motion: every skew-symmetric matrix explains the data.
        let still: Vec<Correspondence> = synthetic(30, 6).into_iter().map(|(a, _)| (a, a)).collect();
        assert_eq!(
            ransac_fundamental(&still, &FundamentalRansacParams::default(), 0),
            Err(FitError::DegenerateConfiguration)
        );
    }
}
