use nalgebra::Point2;
use rand::seq::index;

use super::{AlignError, Match, MatchSet};
use crate::camgeo::{reproject_pixel, Camera};
use crate::raster::DepthMap;
use crate::rng::{self, Purpose};

/// Exact correspondences obtained by reprojecting `n` randomly chosen valid
/// pixels of `depth` into each anchor `(view id, camera)`. Only in-bounds
/// pairs are kept.
pub fn synth_matches(
    depth: &DepthMap,
    src: &Camera,
    anchors: &[(usize, Camera)],
    n: usize,
    seed: u64,
) -> Result<MatchSet, AlignError> {
    if n == 0 {
        return Err(AlignError::InvalidInput("n must be >= 1".into()));
    }
    let (w, h) = (depth.width(), depth.height());
    let valid: Vec<usize> = (0..w * h)
        .filter(|&i| DepthMap::is_valid_value(depth.data()[i]))
        .collect();
    let mut rng = rng::stream(seed, Purpose::SynthMatches, 0);
    let mut picked: Vec<usize> = index::sample(&mut rng, valid.len(), n.min(valid.len()))
        .into_iter()
        .map(|i| valid[i])
        .collect();
    picked.sort_unstable();

    let in_bounds = |p: &Point2<f64>| {
        p.x >= -0.5 && p.y >= -0.5 && p.x < w as f64 - 0.5 && p.y < h as f64 - 0.5
    };
    let mut matches = Vec::new();
    for i in picked {
        let src_px = Point2::new((i % w) as f64, (i / w) as f64);
        let d = depth.data()[i];
        for (view, cam) in anchors {
            if let Ok((dst, _)) = reproject_pixel(&src_px, d, src, cam) {
                if in_bounds(&dst) {
                    matches.push(Match {
                        src: src_px,
                        anchor_view: *view,
                        dst,
                        src_depth: d,
                    });
                }
            }
        }
    }
    if matches.is_empty() {
        return Err(AlignError::NoValidPixels);
    }
    Ok(MatchSet { matches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depthalign::{align_keypoint, AlignParams};
    use nalgebra::{Rotation3, Vector3};

    fn cam(yaw: f64, tx: f64) -> Camera {
        Camera::from_parts(
            500.0,
            500.0,
            319.5,
            239.5,
            Rotation3::from_euler_angles(0.0, yaw, 0.0),
            Vector3::new(tx, 0.0, 0.0),
        )
        .unwrap()
    }

    #[test]
    fn identity_anchor_maps_to_itself() {
        let depth = DepthMap::from_fn(32, 24, |x, _| 2.0 + x as f64 * 0.1);
        let c = Camera::identity_pose(30.0, 30.0, 16.0, 12.0).unwrap();
        let m = synth_matches(&depth, &c, &[(0, c)], 50, 7).unwrap();
        assert_eq!(m.matches.len(), 50);
        for x in &m.matches {
            assert!((x.src - x.dst).norm() < 1e-9);
        }
    }

    #[test]
    fn plane_matches_have_zero_residual() {
        let depth = DepthMap::from_fn(640, 480, |_, y| 3.0 + y as f64 * 0.002);
        let src = cam(0.0, 0.0);
        // Moving straight back keeps every reprojection inside the frame.
        let dst = Camera::from_parts(
            500.0,
            500.0,
            319.5,
            239.5,
            Rotation3::identity(),
            Vector3::new(0.0, 0.0, 0.2),
        )
        .unwrap();
        let m = synth_matches(&depth, &src, &[(1, dst)], 1024, 11).unwrap();
        assert_eq!(m.matches.len(), 1024);
        for kp in m.keypoints().iter().step_by(64) {
            let a = align_keypoint(
                kp.depth,
                kp.src,
                &src,
                &[(dst, kp.observations[0].1)],
                (640, 480),
                &AlignParams::default(),
            )
            .unwrap();
            assert!(a.residual < 1e-6);
        }
    }

    #[test]
    fn anchor_facing_away() {
        let depth = DepthMap::from_fn(32, 24, |_, _| 2.0);
        let src = Camera::identity_pose(30.0, 30.0, 16.0, 12.0).unwrap();
        let away = Camera::from_parts(
            30.0,
            30.0,
            16.0,
            12.0,
            Rotation3::from_euler_angles(0.0, std::f64::consts::PI, 0.0),
            Vector3::zeros(),
        )
        .unwrap();
        assert_eq!(
            synth_matches(&depth, &src, &[(1, away)], 10, 0),
            Err(AlignError::NoValidPixels)
        );
    }
}
