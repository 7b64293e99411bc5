use nalgebra::{Point2, Rotation3, Vector3};
use proptest::prelude::*;
use viewsynth::camgeo::Camera;
use viewsynth::curation::{Track, TrackPoint, TrackSet};
use viewsynth::depthalign::{Match, MatchSet};
use viewsynth::{io, DepthMap};

fn finite() -> impl Strategy<Value = f64> {
    -1e6f64..1e6
}

fn camera() -> impl Strategy<Value = Camera> {
    (
        (10.0f64..2000.0, 10.0f64..2000.0, 0.0f64..1000.0, 0.0f64..1000.0),
        (-3.1f64..3.1, -1.5f64..1.5, -3.1f64..3.1),
        (finite(), finite(), finite()),
    )
        .prop_map(|((fx, fy, cx, cy), (r, p, y), (tx, ty, tz))| {
            Camera::from_parts(fx, fy, cx, cy, Rotation3::from_euler_angles(r, p, y), Vector3::new(tx, ty, tz))
                .expect("valid camera")
        })
}

proptest! {
    #[test]
    fn cameras_round_trip(cams in proptest::collection::vec(camera(), 1..6)) {
        let back = io::decode_cameras(&io::encode_cameras(&cams)).unwrap();
        prop_assert_eq!(back, cams);
    }

    #[test]
    fn tracks_round_trip(
        raw in proptest::collection::vec(
            (0u64..50, proptest::collection::vec((finite(), finite(), any::<bool>()), 1..10)),
            0..8,
        )
    ) {
        let mut seen = std::collections::HashSet::new();
        let tracks = TrackSet {
            tracks: raw
                .into_iter()
                .filter(|(id, _)| seen.insert(*id))
                .map(|(id, pts)| Track {
                    id,
                    points: pts
                        .into_iter()
                        .enumerate()
                        .map(|(f, (x, y, visible))| TrackPoint { frame: f as u32, x, y, visible })
                        .collect(),
                })
                .collect(),
        };
        let back = io::decode_tracks_csv(&io::encode_tracks_csv(&tracks)).unwrap();
        prop_assert_eq!(back, tracks);
    }

    #[test]
    fn matches_round_trip(
        raw in proptest::collection::vec((finite(), finite(), 0usize..9, finite(), finite(), 1e-3f64..1e4), 0..30)
    ) {
        let set = MatchSet {
            matches: raw
                .into_iter()
                .map(|(sx, sy, anchor_view, dx, dy, src_depth)| Match {
                    src: Point2::new(sx, sy),
                    anchor_view,
                    dst: Point2::new(dx, dy),
                    src_depth,
                })
                .collect(),
        };
        let back = io::decode_matches_csv(&io::encode_matches_csv(&set)).unwrap();
        prop_assert_eq!(back, set);
    }

    #[test]
    fn depth_pfm_keeps_single_precision(
        w in 1usize..12,
        h in 1usize..12,
        seed in any::<u64>(),
    ) {
        let depth = DepthMap::from_fn(w, h, |x, y| {
            let v = ((seed ^ (x as u64 * 31 + y as u64 * 7)) % 10_000) as f64 / 100.0;
            if v < 1.0 { f64::NAN } else { v as f32 as f64 }
        });
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("d.pfm");
        io::write_depth_pfm(&path, &depth).unwrap();
        let back = io::read_depth_pfm(&path).unwrap();
        for (a, b) in depth.data().iter().zip(back.data()) {
            prop_assert!(a.to_bits() == b.to_bits() || (!DepthMap::is_valid_value(*a) && !DepthMap::is_valid_value(*b)));
        }
    }
}

#[test]
fn truncated_payloads_are_rejected() {
    let img = viewsynth::Image::filled(4, 3, 3, 0.25);
    let bytes = io::encode_pfm(&img).unwrap();
    assert!(matches!(
        io::decode_pfm(&bytes[..bytes.len() - 1]),
        Err(io::IoError::TruncatedPayload { .. })
    ));
    let ppm = io::encode_ppm(&img).unwrap();
    assert!(io::decode_ppm(&ppm[..ppm.len() - 2]).is_err());
    let flo = io::encode_flo(&viewsynth::FlowField::new(2, 2, vec![0.0; 8]).unwrap());
    assert!(io::decode_flo(&flo[..flo.len() - 4]).is_err());
}

#[test]
fn bad_rows_report_their_line() {
    let text = b"src_x,src_y,anchor_view,dst_x,dst_y,src_depth\n1,2,1,3,4,2.0\n1,2,1,3,4,-1\n";
    match io::decode_matches_csv(text) {
        Err(io::IoError::RowParse { line, .. }) => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
}
