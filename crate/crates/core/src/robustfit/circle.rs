use nalgebra::Point2;
use rand::seq::index;

use super::FitError;
use crate::rng::{self, Purpose};

/// Triangle area below which three points count as collinear.
const COLLINEAR_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point2<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircleFit {
    pub center: Point2<f64>,
    pub radius: f64,
    pub inlier_count: usize,
    pub inlier_flags: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleRansacParams {
    pub iterations: usize,
    /// Inlier band half-width around the circle, in pixels.
    pub inlier_tol: f64,
}

impl Default for CircleRansacParams {
    fn default() -> Self {
        Self {
            iterations: 200,
            inlier_tol: 1.0,
        }
    }
}

/// Circle through three points.
pub fn circumcircle(
    p1: &Point2<f64>,
    p2: &Point2<f64>,
    p3: &Point2<f64>,
) -> Result<Circle, FitError> {
    let b = p2 - p1;
    let c = p3 - p1;
    let cross = b.x * c.y - b.y * c.x;
    if !(cross.abs() * 0.5 > COLLINEAR_AREA) {
        return Err(FitError::DegenerateSample);
    }
    let d = 2.0 * cross;
    let b2 = b.norm_squared();
    let c2 = c.norm_squared();
    let ux = (c.y * b2 - b.y * c2) / d;
    let uy = (b.x * c2 - c.x * b2) / d;
    Ok(Circle {
        center: Point2::new(p1.x + ux, p1.y + uy),
        radius: (ux * ux + uy * uy).sqrt(),
    })
}

fn inliers(points: &[Point2<f64>], circle: &Circle, tol: f64) -> (usize, Vec<bool>) {
    let flags: Vec<bool> = points
        .iter()
        .map(|p| ((p - circle.center).norm() - circle.radius).abs() <= tol)
        .collect();
    (flags.iter().filter(|&&f| f).count(), flags)
}

/// Smallest circle having the farthest point pair as diameter. Used when
/// every sampled triple is collinear (a stationary or straight track).
fn diameter_circle(points: &[Point2<f64>]) -> Circle {
    let mut best = (0usize, 0usize, -1.0f64);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = (points[i] - points[j]).norm_squared();
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    let (a, b) = (points[best.0], points[best.1]);
    Circle {
        center: Point2::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)),
        radius: 0.5 * best.2.max(0.0).sqrt(),
    }
}

/// RANSAC circle fit: samples triples, keeps the candidate with the most
/// inliers, breaking ties by smaller radius and then by earlier iteration.
///
/// Sampling indexes the input order, so the result is a deterministic
/// function of `(points, params, seed)`.
pub fn ransac_circle(
    points: &[Point2<f64>],
    params: &CircleRansacParams,
    seed: u64,
) -> Result<CircleFit, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    if params.iterations == 0 {
        return Err(FitError::InvalidParameter("iterations must be >= 1".into()));
    }
    if !(params.inlier_tol > 0.0) {
        return Err(FitError::InvalidParameter("inlier_tol must be > 0".into()));
    }

    let mut best: Option<(usize, f64, Circle)> = None;
    let mut consider = |circle: Circle| {
        let (count, _) = inliers(points, &circle, params.inlier_tol);
        let better = match &best {
            None => true,
            Some((bc, br, _)) => count > *bc || (count == *bc && circle.radius < *br),
        };
        if better {
            best = Some((count, circle.radius, circle));
        }
    };

    if points.len() == 3 {
        if let Ok(c) = circumcircle(&points[0], &points[1], &points[2]) {
            consider(c);
        }
    } else {
        let mut rng = rng::stream(seed, Purpose::RansacCircle, 0);
        for _ in 0..params.iterations {
            let idx = index::sample(&mut rng, points.len(), 3);
            let (i, j, k) = (idx.index(0), idx.index(1), idx.index(2));
            if let Ok(c) = circumcircle(&points[i], &points[j], &points[k]) {
                consider(c);
            }
        }
    }

    let circle = match best {
        Some((_, _, c)) => c,
        None => diameter_circle(points),
    };
    let (inlier_count, inlier_flags) = inliers(points, &circle, params.inlier_tol);
    Ok(CircleFit {
        center: circle.center,
        radius: circle.radius,
        inlier_count,
        inlier_flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn on_circle(cx: f64, cy: f64, r: f64, n: usize) -> Vec<Point2<f64>> {
        (0..n)
            .map(|i| {
                let a = i as f64 / n as f64 * std::f64::consts::TAU;
                Point2::new(cx + r * a.cos(), cy + r * a.sin())
            })
            .collect()
    }

    #[test]
    fn circumcircle_examples() {
        let c = circumcircle(
            &Point2::new(0.0, 0.0),
            &Point2::new(2.0, 0.0),
            &Point2::new(1.0, 1.0),
        )
        .unwrap();
        assert_abs_diff_eq!(c.center.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.center.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.radius, 1.0, epsilon = 1e-12);

        let c = circumcircle(
            &Point2::new(1.0, 0.0),
            &Point2::new(0.0, 1.0),
            &Point2::new(-1.0, 0.0),
        )
        .unwrap();
        assert_abs_diff_eq!(c.center.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.center.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.radius, 1.0, epsilon = 1e-12);

        assert_eq!(
            circumcircle(
                &Point2::new(0.0, 0.0),
                &Point2::new(1.0, 0.0),
                &Point2::new(0.5, 1e-15)
            ),
            Err(FitError::DegenerateSample)
        );
    }

    #[test]
    fn exact_circle_recovered() {
        let pts = on_circle(5.0, 5.0, 12.0, 100);
        let fit = ransac_circle(
            &pts,
            &CircleRansacParams {
                iterations: 100,
                inlier_tol: 0.5,
            },
            3,
        )
        .unwrap();
        assert!(fit.radius >= 11.99 && fit.radius <= 12.01);
        assert_eq!(fit.inlier_count, 100);
    }

    #[test]
    fn circle_with_outliers() {
        for seed in 0..10u64 {
            let mut pts = on_circle(50.0, 50.0, 12.0, 70);
            let mut rng = crate::rng::stream(seed, Purpose::Generic, 0);
            for _ in 0..30 {
                pts.push(Point2::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)));
            }
            let fit = ransac_circle(
                &pts,
                &CircleRansacParams {
                    iterations: 500,
                    inlier_tol: 1.0,
                },
                seed,
            )
            .unwrap();
            assert!(fit.inlier_count >= 65, "seed {seed}: {}", fit.inlier_count);
            assert_eq!(
                fit.inlier_count,
                fit.inlier_flags.iter().filter(|&&f| f).count()
            );
        }
    }

    #[test]
    fn three_points_single_candidate() {
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(1.0, 1.0),
        ];
        let fit = ransac_circle(&pts, &CircleRansacParams::default(), 0).unwrap();
        assert_eq!(fit.inlier_count, 3);
        assert_abs_diff_eq!(fit.radius, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)];
        assert!(matches!(
            ransac_circle(&pts, &CircleRansacParams::default(), 0),
            Err(FitError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn stationary_track_has_zero_radius() {
        let pts = vec![Point2::new(4.0, 4.0); 10];
        let fit = ransac_circle(&pts, &CircleRansacParams::default(), 0).unwrap();
        assert_eq!(fit.radius, 0.0);
        assert_eq!(fit.inlier_count, 10);
    }

    #[test]
    fn deterministic_for_seed() {
        let mut pts = on_circle(0.0, 0.0, 7.0, 20);
        pts.push(Point2::new(30.0, 1.0));
        let p = CircleRansacParams::default();
        assert_eq!(ransac_circle(&pts, &p, 9), ransac_circle(&pts, &p, 9));
    }

    proptest! {
        #[test]
        fn circumcircle_equivariance(
            ax in -50.0..50.0f64, ay in -50.0..50.0f64,
            bx in -50.0..50.0f64, by in -50.0..50.0f64,
            cx in -50.0..50.0f64, cy in -50.0..50.0f64,
            vx in -100.0..100.0f64, vy in -100.0..100.0f64,
            s in 0.1..10.0f64,
        ) {
            let (a, b, c) = (Point2::new(ax, ay), Point2::new(bx, by), Point2::new(cx, cy));
            let area = ((b - a).x * (c - a).y - (b - a).y * (c - a).x).abs() * 0.5;
            prop_assume!(area > 1.0);
            let base = circumcircle(&a, &b, &c).unwrap();
            prop_assume!(base.radius < 1e4);
            for p in [a, b, c] {
                prop_assert!(((p - base.center).norm() - base.radius).abs() < 1e-9 * base.radius.max(1.0));
            }
            let v = nalgebra::Vector2::new(vx, vy);
            let moved = circumcircle(&(a + v), &(b + v), &(c + v)).unwrap();
            prop_assert!((moved.center - (base.center + v)).norm() < 1e-9 * base.radius.max(1.0));
            let scaled = circumcircle(
                &Point2::from(a.coords * -s),
                &Point2::from(b.coords * -s),
                &Point2::from(c.coords * -s),
            ).unwrap();
            prop_assert!((scaled.radius - s * base.radius).abs() < 1e-9 * (s * base.radius).max(1.0));
        }
    }
}
