//! Command-line front end. [`dispatch`] parses arguments, runs one
//! subcommand and maps the outcome to an exit code: 0 on success, 1 on a
//! domain error, 2 on a usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::camgeo::{forward_warp_with, WarpOptions};
use crate::curation::{curate_clip, ClipBundle, CurationConfig, CurationError, Step, StepError};
use crate::depthalign::{align_sparse, lwlr_recover, AlignParams, LwlrParams, SparseGuidance};
use crate::io::{self, IoError};
use crate::pipeline::{self, PipelineConfig, PipelineError, SsimParams};
use crate::raster::{Image, Mask};
use crate::rng::{self, Purpose};
use crate::vcond::{self, IrregularMaskParams, Schedule, ScheduleParams, ViewSet};

#[derive(Debug, Parser)]
#[command(name = "viewsynth", version, about = "Clip curation, visual conditions, depth alignment and warping")]
pub struct Cli {
    /// Seed for every random stream; overrides seeds in config files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Report domain errors as JSON on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide whether a clip is a static scene with enough camera motion.
    Curate(CurateArgs),
    /// Build the visual condition for a set of frames at timestep t.
    Vcond(VcondArgs),
    /// Align keypoint depths against anchor views.
    Align(AlignArgs),
    /// Recover a dense scaled depth map from sparse guidance.
    Lwlr(LwlrArgs),
    /// Forward-warp an image into another camera.
    Warp(WarpArgs),
    /// Iterative novel-view generation.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Compare two images.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    /// Directory of `.ppm` frames, in file-name order.
    #[arg(long)]
    pub frames_dir: PathBuf,
    /// Directory of `.pgm` dynamic-object masks, one per frame.
    #[arg(long)]
    pub masks_dir: Option<PathBuf>,
    /// Directory of `.flo` flows, one per consecutive frame pair.
    #[arg(long)]
    pub flows_dir: Option<PathBuf>,
    /// Point tracks CSV.
    #[arg(long)]
    pub tracks: Option<PathBuf>,
    /// Curation config JSON.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VcondArgs {
    /// Directory of `.ppm` frames.
    #[arg(long)]
    pub frames_dir: PathBuf,
    /// Diffusion timestep.
    #[arg(long)]
    pub t: u32,
    /// Comma-separated reference frame indices.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub refs: Vec<usize>,
    /// Directory of `.pgm` masks; random irregular masks are drawn when absent.
    #[arg(long)]
    pub masks_dir: Option<PathBuf>,
    /// Schedule parameters JSON.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Reuse the latent noise for the corrupted views.
    #[arg(long)]
    pub shared_noise: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Source-view depth PFM; match depths are resampled from it.
    #[arg(long)]
    pub depth: PathBuf,
    #[arg(long)]
    pub matches: PathBuf,
    /// Camera JSON indexed by view id.
    #[arg(long)]
    pub cameras: PathBuf,
    /// View id of the source camera.
    #[arg(long)]
    pub source: usize,
    /// Alignment parameters JSON.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Guidance JSON output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LwlrArgs {
    #[arg(long)]
    pub depth: PathBuf,
    #[arg(long)]
    pub guidance: PathBuf,
    #[arg(long, default_value_t = LwlrParams::default().bandwidth)]
    pub bandwidth: f64,
    #[arg(long, default_value_t = LwlrParams::default().lambda)]
    pub lambda: f64,
    /// Receives `depth.pfm`, `scale.pfm` and `shift.pfm`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct WarpArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub depth: PathBuf,
    #[arg(long)]
    pub cameras: PathBuf,
    #[arg(long)]
    pub src: usize,
    #[arg(long)]
    pub dst: usize,
    #[arg(long)]
    pub splat_2x2: bool,
    /// Receives `warp.ppm`, `mask.pgm` and `depth.pfm`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum PipelineCommand {
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub psnr: bool,
    #[arg(long)]
    pub ssim: bool,
}

/// A failed subcommand, tagged with the stage that failed.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub stage: String,
    pub message: String,
}

impl CliError {
    fn new(stage: impl ToString, err: impl std::fmt::Display) -> Self {
        Self {
            stage: stage.to_string(),
            message: err.to_string(),
        }
    }
}

impl From<StepError> for CliError {
    fn from(e: StepError) -> Self {
        CliError::new(e.step, e.source)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::new(e.stage_name(), e)
    }
}

fn ingest(e: impl std::fmt::Display) -> CliError {
    CliError::new(Step::Ingest, e)
}

/// Files in `dir` with extension `ext`, sorted by name.
fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, IoError> {
    let entries = std::fs::read_dir(dir).map_err(|source| IoError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == ext))
        .collect();
    files.sort();
    Ok(files)
}

fn read_all<T>(dir: &Path, ext: &str, read: fn(&Path) -> Result<T, IoError>) -> Result<Vec<T>, IoError> {
    list_files(dir, ext)?.iter().map(|p| read(p)).collect()
}

fn curate(args: &CurateArgs, seed: Option<u64>, out: &mut dyn Write) -> Result<(), CliError> {
    let mut config: CurationConfig = match &args.config {
        Some(p) => io::read_config(p).map_err(ingest)?,
        None => CurationConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    let frames = read_all(&args.frames_dir, "ppm", io::read_ppm).map_err(ingest)?;
    let semantic_masks = match &args.masks_dir {
        Some(d) => Some(read_all(d, "pgm", io::read_pgm).map_err(ingest)?),
        None => None,
    };
    let flows = match &args.flows_dir {
        Some(d) => Some(read_all(d, "flo", io::read_flo).map_err(ingest)?),
        None => None,
    };
    let tracks = match &args.tracks {
        Some(p) => Some(io::read_tracks_csv(p).map_err(ingest)?),
        None => None,
    };
    let bundle = ClipBundle {
        frames,
        semantic_masks,
        flows,
        tracks,
    };
    let report = curate_clip(&bundle, &config)?;
    match &args.out {
        Some(p) => io::write_json(p, &report).map_err(|e| CliError::new("output", e))?,
        None => {
            let text = serde_json::to_string_pretty(&report).expect("serializable report");
            writeln!(out, "{text}").map_err(|e| CliError::new("output", e))?;
        }
    }
    Ok(())
}

fn vcond_cmd(args: &VcondArgs, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let stage = |e: &dyn std::fmt::Display| CliError::new("vcond", e);
    let params: ScheduleParams = match &args.schedule {
        Some(p) => io::read_config(p).map_err(|e| CliError::new("config", e))?,
        None => ScheduleParams::default(),
    };
    let sched = Schedule::new(params).map_err(|e| CliError::new("config", e))?;
    let frames = read_all(&args.frames_dir, "ppm", io::read_ppm).map_err(ingest)?;
    let first = frames
        .first()
        .ok_or_else(|| ingest(CurationError::EmptyClip))?
        .clone();
    let (w, h, ch) = (first.width(), first.height(), first.channels());
    let masks: Vec<Mask> = match &args.masks_dir {
        Some(d) => read_all(d, "pgm", io::read_pgm).map_err(ingest)?,
        None => (0..frames.len())
            .map(|i| {
                if args.refs.contains(&i) {
                    Ok(Mask::filled(w, h, false))
                } else {
                    vcond::irregular_mask(rng::derive_seed(seed, i as u64), h, w, &IrregularMaskParams::default())
                }
            })
            .collect::<Result<_, _>>()
            .map_err(|e| stage(&e))?,
    };
    let n = frames.len();
    let views = ViewSet::new(frames, &args.refs, masks).map_err(|e| stage(&e))?;
    let latent_noise: Vec<Image> = (0..n)
        .map(|i| vcond::standard_normal(seed, Purpose::LatentNoise, i as u64, w, h, ch))
        .collect();
    let cond_noise: Vec<Image> = if args.shared_noise {
        latent_noise.clone()
    } else {
        (0..n)
            .map(|i| vcond::standard_normal(seed, Purpose::ConditionNoise, i as u64, w, h, ch))
            .collect()
    };
    let x_t: Vec<Image> = views
        .frames()
        .iter()
        .zip(&latent_noise)
        .map(|(f, e)| vcond::add_noise(f, args.t, e, &sched))
        .collect::<Result<_, _>>()
        .map_err(|e| stage(&e))?;
    let cond = vcond::build_condition(&views, &x_t, args.t, &cond_noise, &sched).map_err(|e| stage(&e))?;

    let write_err = |e: IoError| CliError::new("output", e);
    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::new("output", e))?;
    for (i, (f, m)) in cond.frames.iter().zip(&cond.masks).enumerate() {
        for c in 0..f.channels() {
            let plane = Image::from_fn(w, h, 1, |x, y, _| f.get(x, y, c));
            io::write_pfm(&args.out_dir.join(format!("cond_{i:02}_c{c}.pfm")), &plane).map_err(write_err)?;
        }
        let mask = Image::from_fn(w, h, 1, |x, y, _| if m.get(x, y) { 1.0 } else { 0.0 });
        io::write_pfm(&args.out_dir.join(format!("mask_{i:02}.pfm")), &mask).map_err(write_err)?;
    }
    let sidecar = serde_json::json!({
        "schema_version": 1,
        "t": cond.t,
        "t_prime": cond.t_prime,
        "w_t": cond.w,
        "seed": seed,
        "frames": n,
        "references": views.reference_indices(),
        "shared_noise": args.shared_noise,
    });
    io::write_json(&args.out_dir.join("condition.json"), &sidecar).map_err(write_err)?;
    writeln!(out, "t={} t'={} w={}", cond.t, cond.t_prime, cond.w).map_err(|e| CliError::new("output", e))?;
    Ok(())
}

fn align_cmd(args: &AlignArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let depth = io::read_depth_pfm(&args.depth).map_err(ingest)?;
    let matches = io::read_matches_csv(&args.matches).map_err(ingest)?;
    let cameras = io::read_cameras(&args.cameras).map_err(ingest)?;
    let params: AlignParams = match &args.params {
        Some(p) => io::read_config(p).map_err(|e| CliError::new("config", e))?,
        None => AlignParams::default(),
    };
    let src = cameras
        .get(args.source)
        .ok_or_else(|| ingest(format!("no camera for source view {}", args.source)))?;
    let set = matches.resample_depth(&depth);
    let g = align_sparse(&set, src, &cameras, (depth.width(), depth.height()), &params)
        .map_err(|e| CliError::new("align", e))?;
    io::write_json(&args.out, &g).map_err(|e| CliError::new("output", e))?;
    writeln!(out, "{} guidance points, {} dropped", g.points.len(), g.dropped)
        .map_err(|e| CliError::new("output", e))?;
    Ok(())
}

fn lwlr_cmd(args: &LwlrArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let depth = io::read_depth_pfm(&args.depth).map_err(ingest)?;
    let guidance: SparseGuidance = io::read_json(&args.guidance).map_err(ingest)?;
    let params = LwlrParams {
        bandwidth: args.bandwidth,
        lambda: args.lambda,
    };
    let r = lwlr_recover(&depth, &guidance, &params).map_err(|e| CliError::new("lwlr", e))?;
    let write_err = |e: IoError| CliError::new("output", e);
    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::new("output", e))?;
    io::write_depth_pfm(&args.out_dir.join("depth.pfm"), &r.depth).map_err(write_err)?;
    io::write_pfm(&args.out_dir.join("scale.pfm"), &r.scale.to_image()).map_err(write_err)?;
    io::write_pfm(&args.out_dir.join("shift.pfm"), &r.shift.to_image()).map_err(write_err)?;
    writeln!(out, "{}x{} depth recovered from {} points", depth.width(), depth.height(), guidance.points.len())
        .map_err(|e| CliError::new("output", e))?;
    Ok(())
}

fn warp_cmd(args: &WarpArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let image = io::read_ppm(&args.image).map_err(ingest)?;
    let depth = io::read_depth_pfm(&args.depth).map_err(ingest)?;
    let cameras = io::read_cameras(&args.cameras).map_err(ingest)?;
    let cam = |i: usize| {
        cameras
            .get(i)
            .copied()
            .ok_or_else(|| ingest(format!("no camera for view {i}")))
    };
    let opts = WarpOptions {
        splat_2x2: args.splat_2x2,
    };
    let r = forward_warp_with(&image, &depth, &cam(args.src)?, &cam(args.dst)?, opts)
        .map_err(|e| CliError::new("warp", e))?;
    let write_err = |e: IoError| CliError::new("output", e);
    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::new("output", e))?;
    io::write_ppm(&args.out_dir.join("warp.ppm"), &r.image).map_err(write_err)?;
    io::write_pgm(&args.out_dir.join("mask.pgm"), &r.mask).map_err(write_err)?;
    io::write_depth_pfm(&args.out_dir.join("depth.pfm"), &r.depth).map_err(write_err)?;
    writeln!(out, "coverage {:.6}", r.mask.fraction()).map_err(|e| CliError::new("output", e))?;
    Ok(())
}

fn pipeline_cmd(cmd: &PipelineCommand, seed: Option<u64>, out: &mut dyn Write) -> Result<(), CliError> {
    let PipelineCommand::Run { config } = cmd;
    let mut cfg = PipelineConfig::from_file(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let summary = pipeline::run(&cfg)?;
    writeln!(out, "{} views written to {}", summary.views, cfg.output_dir.display())
        .map_err(|e| CliError::new("output", e))?;
    Ok(())
}

fn metrics_cmd(args: &MetricsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let a = io::read_ppm(&args.reference).map_err(ingest)?;
    let b = io::read_ppm(&args.test).map_err(ingest)?;
    let both = args.psnr == args.ssim;
    let mut lines = Vec::new();
    if args.psnr || both {
        let p = pipeline::psnr(&a, &b, 1.0).map_err(|e| CliError::new("metrics", e))?;
        lines.push(if both { format!("psnr {p:.2}") } else { format!("{p:.2}") });
    }
    if args.ssim || both {
        let s = pipeline::ssim(&a, &b, &SsimParams::default()).map_err(|e| CliError::new("metrics", e))?;
        lines.push(if both { format!("ssim {s:.6}") } else { format!("{s:.6}") });
    }
    for l in lines {
        writeln!(out, "{l}").map_err(|e| CliError::new("output", e))?;
    }
    Ok(())
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Curate(a) => curate(a, cli.seed, out),
        Command::Vcond(a) => vcond_cmd(a, seed, out),
        Command::Align(a) => align_cmd(a, out),
        Command::Lwlr(a) => lwlr_cmd(a, out),
        Command::Warp(a) => warp_cmd(a, out),
        Command::Pipeline(c) => pipeline_cmd(c, cli.seed, out),
        Command::Metrics(a) => metrics_cmd(a, out),
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            if cli.json_errors {
                let _ = writeln!(err, "{}", serde_json::to_string(&e).expect("plain strings"));
            } else {
                let _ = writeln!(err, "error [{}]: {}", e.stage, e.message);
            }
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = dispatch(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        let (code, _, err) = run(&["viewsynth", "metrics", "--bogus"]);
        assert_eq!(code, 2);
        assert!(err.contains("Usage"));
        assert_eq!(run(&["viewsynth"]).0, 2);
    }

    #[test]
    fn help_exits_0() {
        let (code, out, _) = run(&["viewsynth", "--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("curate"));
    }

    #[test]
    fn missing_masks_dir_is_ingest_error() {
        let dir = tempfile::tempdir().unwrap();
        let frames = dir.path().join("frames");
        std::fs::create_dir(&frames).unwrap();
        io::write_ppm(&frames.join("f0.ppm"), &Image::zeros(8, 8, 3)).unwrap();
        let frames = frames.to_str().unwrap();
        let (code, _, err) = run(&[
            "viewsynth",
            "--json-errors",
            "curate",
            "--frames-dir",
            frames,
            "--masks-dir",
            "/nonexistent/masks",
        ]);
        assert_eq!(code, 1);
        let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
        assert_eq!(v["stage"], "ingest");
    }
}
