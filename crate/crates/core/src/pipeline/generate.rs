use std::path::PathBuf;
use std::process::Command;

use crate::camgeo::Camera;
use crate::io;
use crate::raster::{Image, Mask};

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

/// An already generated view handed to the generator for consistency.
#[derive(Debug, Clone)]
pub struct AnchorView {
    pub index: usize,
    pub image: Image,
    pub camera: Camera,
}

/// Everything a generator sees for one chunk of target views.
#[derive(Debug, Clone)]
pub struct GenerationRequest {
    /// Trajectory indices of the views to produce.
    pub targets: Vec<usize>,
    pub target_cameras: Vec<Camera>,
    pub warped: Vec<Image>,
    /// True where the warp covered the target pixel.
    pub masks: Vec<Mask>,
    /// The input view (index 0) comes first.
    pub anchors: Vec<AnchorView>,
}

/// Completes warped views. Implementations must return one image per target
/// with the warped image's dimensions.
pub trait Generator {
    fn name(&self) -> &str;
    fn generate(&mut self, request: &GenerationRequest) -> Result<Vec<Image>, BoxError>;
}

/// Returns ground-truth frames, ignoring the warps.
#[derive(Debug, Clone)]
pub struct OracleGenerator {
    pub frames: Vec<Image>,
}

impl Generator for OracleGenerator {
    fn name(&self) -> &str {
        "oracle"
    }

    fn generate(&mut self, request: &GenerationRequest) -> Result<Vec<Image>, BoxError> {
        request
            .targets
            .iter()
            .map(|&t| {
                self.frames
                    .get(t)
                    .cloned()
                    .ok_or_else(|| format!("no ground-truth frame for view {t}").into())
            })
            .collect()
    }
}

/// Fills uncovered pixels from their covered neighbours.
#[derive(Debug, Clone, Copy, Default)]
pub struct HoleFillGenerator;

impl Generator for HoleFillGenerator {
    fn name(&self) -> &str {
        "holefill"
    }

    fn generate(&mut self, request: &GenerationRequest) -> Result<Vec<Image>, BoxError> {
        let anchor0 = request.anchors.first().map(|a| &a.image);
        Ok(hole_fill_generate(&request.warped, &request.masks, anchor0)?)
    }
}

/// Repeatedly gives every uncovered pixel that touches the covered region the
/// mean of its covered 8-neighbours, until the frame is full. Returns the
/// filled image and the final coverage, which is all true.
///
/// A frame with no covered pixel is filled with the per-channel mean of
/// `fallback` (or zeros without one).
pub fn fill_holes(img: &Image, mask: &Mask, fallback: Option<&Image>) -> (Image, Mask) {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut out = img.clone();
    let mut covered = mask.clone();
    if !covered.any() {
        let means = match fallback {
            Some(f) if f.channels() == ch => f.channel_means(),
            _ => vec![0.0; ch],
        };
        for px in out.data_mut().chunks_exact_mut(ch) {
            for (v, m) in px.iter_mut().zip(&means) {
                *v = *m as f32;
            }
        }
        return (out, Mask::filled(w, h, true));
    }
    let mut frontier: Vec<(usize, usize)> = Vec::new();
    let mut acc = vec![0f64; ch];
    loop {
        frontier.clear();
        for y in 0..h {
            for x in 0..w {
                if !covered.get(x, y) {
                    frontier.push((x, y));
                }
            }
        }
        if frontier.is_empty() {
            break;
        }
        let mut updates: Vec<(usize, usize, Vec<f32>)> = Vec::new();
        for &(x, y) in &frontier {
            acc.iter_mut().for_each(|a| *a = 0.0);
            let mut n = 0usize;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if covered.get(nx, ny) {
                        n += 1;
                        for (a, v) in acc.iter_mut().zip(out.pixel(nx, ny)) {
                            *a += *v as f64;
                        }
                    }
                }
            }
            if n > 0 {
                updates.push((x, y, acc.iter().map(|a| (a / n as f64) as f32).collect()));
            }
        }
        for (x, y, px) in updates {
            out.pixel_mut(x, y).copy_from_slice(&px);
            covered.set(x, y, true);
        }
    }
    (out, covered)
}

/// Hole-fills each warped frame; covered pixels are returned unchanged.
pub fn hole_fill_generate(
    warped: &[Image],
    masks: &[Mask],
    anchor0: Option<&Image>,
) -> Result<Vec<Image>, String> {
    if warped.len() != masks.len() {
        return Err(format!("{} warps but {} masks", warped.len(), masks.len()));
    }
    warped
        .iter()
        .zip(masks)
        .map(|(img, m)| {
            if img.width() != m.width() || img.height() != m.height() {
                return Err("mask size differs from warped image".to_string());
            }
            Ok(fill_holes(img, m, anchor0).0)
        })
        .collect()
}

/// Runs an external command that exchanges files with the pipeline.
///
/// Before the call, `{input}` holds `warp_XX.ppm`, `mask_XX.pgm`,
/// `anchor_XX.ppm`, `cameras.json` (targets then anchors) and
/// `request.json`. The command must write `out_XX.ppm` to `{output}`.
/// Placeholders `{input}`, `{output}` and `{count}` are substituted in the
/// template, which is run with `sh -c`.
#[derive(Debug, Clone)]
pub struct ExecGenerator {
    pub template: String,
    pub workdir: PathBuf,
    calls: usize,
}

impl ExecGenerator {
    pub fn new(template: impl Into<String>, workdir: impl Into<PathBuf>) -> Self {
        Self {
            template: template.into(),
            workdir: workdir.into(),
            calls: 0,
        }
    }
}

impl Generator for ExecGenerator {
    fn name(&self) -> &str {
        "exec"
    }

    fn generate(&mut self, request: &GenerationRequest) -> Result<Vec<Image>, BoxError> {
        let call_dir = self.workdir.join(format!("exec_{:03}", self.calls));
        self.calls += 1;
        let (input, output) = (call_dir.join("in"), call_dir.join("out"));
        std::fs::create_dir_all(&input)?;
        std::fs::create_dir_all(&output)?;
        for (i, (img, m)) in request.warped.iter().zip(&request.masks).enumerate() {
            io::write_ppm(&input.join(format!("warp_{i:02}.ppm")), img)?;
            io::write_pgm(&input.join(format!("mask_{i:02}.pgm")), m)?;
        }
        for (i, a) in request.anchors.iter().enumerate() {
            io::write_ppm(&input.join(format!("anchor_{i:02}.ppm")), &a.image)?;
        }
        let cams: Vec<Camera> = request
            .target_cameras
            .iter()
            .copied()
            .chain(request.anchors.iter().map(|a| a.camera))
            .collect();
        io::write_cameras(&input.join("cameras.json"), &cams)?;
        io::write_json(
            &input.join("request.json"),
            &serde_json::json!({
                "targets": request.targets,
                "anchors": request.anchors.iter().map(|a| a.index).collect::<Vec<_>>(),
            }),
        )?;
        let cmd = self
            .template
            .replace("{input}", &input.display().to_string())
            .replace("{output}", &output.display().to_string())
            .replace("{count}", &request.targets.len().to_string());
        let status = Command::new("sh").arg("-c").arg(&cmd).status()?;
        if !status.success() {
            return Err(format!("generator command exited with {status}").into());
        }
        (0..request.targets.len())
            .map(|i| Ok(io::read_ppm(&output.join(format!("out_{i:02}.ppm")))?))
            .collect()
    }
}
