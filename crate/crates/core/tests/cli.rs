mod common;

use std::path::Path;
use std::process::{Command, Output};

use nalgebra::Vector3;
use viewsynth::depthalign::synth_matches;
use viewsynth::{io, DepthMap, Image, Mask};

use common::Plane;

const W: usize = 64;
const H: usize = 48;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viewsynth"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// Cameras, ground-truth frames and depths for a small trajectory.
fn scene(dir: &Path, n: usize) -> Vec<Image> {
    let cams = common::trajectory(n, W, H);
    std::fs::create_dir_all(dir.join("gt")).unwrap();
    std::fs::create_dir_all(dir.join("depth")).unwrap();
    io::write_cameras(&dir.join("cameras.json"), &cams).unwrap();
    cams.iter()
        .enumerate()
        .map(|(i, cam)| {
            let img = Plane::DEFAULT.render(cam, W, H);
            io::write_ppm(&dir.join(format!("gt/view_{i:04}.ppm")), &img).unwrap();
            io::write_depth_pfm(
                &dir.join(format!("depth/depth_{i:04}.pfm")),
                &Plane::DEFAULT.depth_map(cam, W, H),
            )
            .unwrap();
            img
        })
        .collect()
}

#[test]
fn metrics_prints_capped_psnr() {
    let tmp = tempfile::tempdir().unwrap();
    let img = tmp.path().join("a.ppm");
    io::write_ppm(&img, &Image::filled(16, 16, 3, 0.5)).unwrap();
    let o = bin(&["metrics", "--ref", p(&img), "--test", p(&img), "--psnr"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "99.00");
    let o = bin(&["metrics", "--ref", p(&img), "--test", p(&img)]);
    assert_eq!(stdout(&o), "psnr 99.00\nssim 1.000000\n");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(bin(&["metrics", "--bogus"]).status.code(), Some(2));
    assert_eq!(bin(&[]).status.code(), Some(2));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn domain_errors_report_stage_as_json() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, br#"{"trajectory": "c.json", "chunk": "x"}"#).unwrap();
    let o = bin(&["--json-errors", "pipeline", "run", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).expect("json on stderr");
    assert_eq!(err["stage"], "config");
}

#[test]
fn warp_then_metrics_on_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    scene(dir, 2);
    let out = dir.join("warp");
    let o = bin(&[
        "warp",
        "--image",
        p(&dir.join("gt/view_0000.ppm")),
        "--depth",
        p(&dir.join("depth/depth_0000.pfm")),
        "--cameras",
        p(&dir.join("cameras.json")),
        "--src",
        "0",
        "--dst",
        "0",
        "--out-dir",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mask = io::read_pgm(&out.join("mask.pgm")).unwrap();
    assert_eq!(mask.count(), W * H);
    let o = bin(&[
        "metrics",
        "--ref",
        p(&dir.join("gt/view_0000.ppm")),
        "--test",
        p(&out.join("warp.ppm")),
        "--psnr",
    ]);
    assert_eq!(stdout(&o).trim(), "99.00");
}

#[test]
fn align_then_lwlr_recovers_scaled_depth() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let src = common::camera(56.0, W, H, 0.0, Vector3::zeros());
    let anchor = common::camera(56.0, W, H, 0.0, Vector3::new(0.02, 0.0, 0.3));
    io::write_cameras(&dir.join("cameras.json"), &[src, anchor]).unwrap();
    let gt = Plane::DEFAULT.depth_map(&src, W, H);
    let matches = synth_matches(&gt, &src, &[(1, anchor)], 64, 3).unwrap();
    io::write_matches_csv(&dir.join("matches.csv"), &matches).unwrap();
    // The stored depth is off by a global factor of two.
    let scaled = DepthMap::from_fn(W, H, |x, y| 0.5 * gt.get(x, y));
    io::write_depth_pfm(&dir.join("depth.pfm"), &scaled).unwrap();

    let o = bin(&[
        "align",
        "--depth",
        p(&dir.join("depth.pfm")),
        "--matches",
        p(&dir.join("matches.csv")),
        "--cameras",
        p(&dir.join("cameras.json")),
        "--source",
        "0",
        "--out",
        p(&dir.join("guidance.json")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = bin(&[
        "lwlr",
        "--depth",
        p(&dir.join("depth.pfm")),
        "--guidance",
        p(&dir.join("guidance.json")),
        "--out-dir",
        p(&dir.join("lwlr")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = io::read_depth_pfm(&dir.join("lwlr/depth.pfm")).unwrap();
    let worst = rec
        .data()
        .iter()
        .zip(gt.data())
        .map(|(a, b)| ((a - b) / b).abs())
        .fold(0.0f64, f64::max);
    // PFM stores f32, so compare at single precision.
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn vcond_writes_condition_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    scene(dir, 3);
    let out = dir.join("cond");
    let o = bin(&[
        "--seed",
        "4",
        "vcond",
        "--frames-dir",
        p(&dir.join("gt")),
        "--t",
        "1000",
        "--refs",
        "0",
        "--out-dir",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("condition.json")).unwrap()).unwrap();
    assert_eq!(meta["t_prime"], 200);
    assert_eq!(meta["w_t"], 1.0);
    // The reference keeps its clean pixels; the mask of a reference is empty.
    let reference = io::read_pfm(&out.join("cond_00_c0.pfm")).unwrap();
    let gt = io::read_ppm(&dir.join("gt/view_0000.ppm")).unwrap();
    assert_eq!(reference.get(5, 7, 0), gt.get(5, 7, 0));
    let mask0 = io::read_pfm(&out.join("mask_00.pfm")).unwrap();
    assert!(mask0.data().iter().all(|&v| v == 0.0));
}

#[test]
fn curate_reports_a_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    scene(dir, 4);
    let masks = dir.join("masks");
    std::fs::create_dir_all(&masks).unwrap();
    for i in 0..4 {
        io::write_pgm(&masks.join(format!("m_{i}.pgm")), &Mask::filled(W, H, false)).unwrap();
    }
    let o = bin(&[
        "curate",
        "--frames-dir",
        p(&dir.join("gt")),
        "--masks-dir",
        p(&masks),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["verdict"], "pass");
    assert_eq!(report["semantic"]["status"], "passed");
}

#[test]
fn pipeline_run_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    scene(dir, 6);
    let run = |name: &str| {
        let cfg = dir.join(format!("{name}.json"));
        let body = serde_json::json!({
            "trajectory": "cameras.json",
            "input_view": "gt/view_0000.ppm",
            "depth_dir": "depth",
            "synth_matches": 64,
            "ground_truth_dir": "gt",
            "generator": "holefill",
            "output_dir": name,
            "chunk": 2,
            "anchors": 2,
        });
        std::fs::write(&cfg, serde_json::to_vec_pretty(&body).unwrap()).unwrap();
        let o = bin(&["--seed", "9", "pipeline", "run", "--config", p(&cfg)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(dir.join(name).join("summary.json")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    let summary: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(summary["views"], 6);
    assert_eq!(summary["seed"], 9);
    for i in 0..6 {
        assert_eq!(
            std::fs::read(dir.join(format!("a/view_{i:04}.ppm"))).unwrap(),
            std::fs::read(dir.join(format!("b/view_{i:04}.ppm"))).unwrap()
        );
    }
}
