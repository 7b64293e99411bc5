use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    psnr, ssim, AlignmentOutcome, DirectoryDepth, DirectoryMatches, ExecGenerator,
    Generator, HoleFillGenerator, MatchSource, OracleGenerator, PipelineError, PipelineState,
    SsimParams, Stage, StepOutput, StepParams, SyntheticMatches, Trajectory,
};
use crate::depthalign::{AlignParams, LwlrParams};
use crate::io;
use crate::raster::Image;

/// Which generator completes the warped views.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GeneratorSpec {
    Oracle,
    HoleFill,
    /// Shell command template, see [`ExecGenerator`].
    Exec(String),
}

impl TryFrom<String> for GeneratorSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        match s.as_str() {
            "oracle" => Ok(Self::Oracle),
            "holefill" => Ok(Self::HoleFill),
            _ => match s.strip_prefix("exec:") {
                Some(cmd) if !cmd.trim().is_empty() => Ok(Self::Exec(cmd.to_string())),
                _ => Err(format!(
                    "unknown generator `{s}`, expected oracle, holefill or exec:<command>"
                )),
            },
        }
    }
}

impl From<GeneratorSpec> for String {
    fn from(g: GeneratorSpec) -> String {
        match g {
            GeneratorSpec::Oracle => "oracle".into(),
            GeneratorSpec::HoleFill => "holefill".into(),
            GeneratorSpec::Exec(cmd) => format!("exec:{cmd}"),
        }
    }
}

fn default_chunk() -> usize {
    15
}

fn default_anchors() -> usize {
    3
}

fn default_true() -> bool {
    true
}

/// `pipeline run` configuration. Relative paths are resolved against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Camera JSON; view 0 is the input view.
    pub trajectory: PathBuf,
    /// PPM of view 0.
    pub input_view: PathBuf,
    /// Holds `depth_XXXX.pfm` per view.
    pub depth_dir: PathBuf,
    /// Holds `matches_XXXX.csv` keyed by source view.
    #[serde(default)]
    pub matches_dir: Option<PathBuf>,
    /// Draw this many exact matches per iteration from ground-truth depth
    /// instead of reading them.
    #[serde(default)]
    pub synth_matches: Option<usize>,
    /// Ground-truth depth for synthetic matches; defaults to `depth_dir`.
    #[serde(default)]
    pub gt_depth_dir: Option<PathBuf>,
    /// Holds `view_XXXX.ppm`; needed by the oracle generator, enables metrics.
    #[serde(default)]
    pub ground_truth_dir: Option<PathBuf>,
    pub generator: GeneratorSpec,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_chunk")]
    pub chunk: usize,
    #[serde(default = "default_anchors")]
    pub anchors: usize,
    #[serde(default)]
    pub align: AlignParams,
    #[serde(default)]
    pub lwlr: LwlrParams,
    /// Write warps, masks, depths and guidance for every iteration.
    #[serde(default = "default_true")]
    pub save_intermediates: bool,
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let mut cfg: PipelineConfig = io::read_config(path).map_err(|e| match e {
            io::IoError::Config(c) => PipelineError::Config {
                pointer: c.pointer,
                message: c.message,
            },
            other => PipelineError::stage(Stage::Config, other),
        })?;
        cfg.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes every relative path relative to `base`.
    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.trajectory);
        fix(&mut self.input_view);
        fix(&mut self.depth_dir);
        fix(&mut self.output_dir);
        for p in [&mut self.matches_dir, &mut self.gt_depth_dir, &mut self.ground_truth_dir]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: u64,
    pub source: usize,
    pub anchors: Vec<usize>,
    pub targets: Vec<usize>,
    pub alignment: AlignmentOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSummary {
    pub view: usize,
    /// Fraction of pixels covered by the warp; absent for the input view.
    pub coverage: Option<f64>,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub stage: Stage,
    pub message: String,
}

/// Written to `summary.json`. Wall-clock timings go to `timings.json` so
/// this file is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub generator: String,
    pub seed: u64,
    pub views: usize,
    pub iterations: Vec<IterationSummary>,
    pub per_view: Vec<ViewSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorSummary>,
}

#[derive(Debug, Serialize)]
struct Timings {
    total_ms: f64,
    iterations_ms: Vec<f64>,
}

fn out_err(e: impl Into<super::BoxError>) -> PipelineError {
    PipelineError::stage(Stage::Output, e)
}

fn load_ground_truth(dir: &Path, n: usize) -> Result<Vec<Image>, PipelineError> {
    (0..n)
        .map(|i| {
            io::read_ppm(&dir.join(format!("view_{i:04}.ppm")))
                .map_err(|e| PipelineError::stage(Stage::Config, e))
        })
        .collect()
}

fn persist(out_dir: &Path, step: &StepOutput, save: bool) -> Result<(), PipelineError> {
    if !save {
        return Ok(());
    }
    io::write_depth_pfm(&out_dir.join(format!("depth_{:04}.pfm", step.source)), &step.source_depth)
        .map_err(out_err)?;
    if let Some(g) = &step.guidance {
        io::write_json(&out_dir.join(format!("guidance_{:04}.json", step.source)), g)
            .map_err(out_err)?;
    }
    for (t, w) in step.targets.iter().zip(&step.warps) {
        io::write_ppm(&out_dir.join(format!("warp_{t:04}.ppm")), &w.image).map_err(out_err)?;
        io::write_pgm(&out_dir.join(format!("mask_{t:04}.pgm")), &w.mask).map_err(out_err)?;
    }
    Ok(())
}

/// Runs the loop until the trajectory is exhausted, writing
/// `view_XXXX.ppm` for every view plus `summary.json` and `timings.json`.
/// On a stage failure the files written so far are kept and the summary
/// records the error.
pub fn run(config: &PipelineConfig) -> Result<RunSummary, PipelineError> {
    let started = Instant::now();
    let cameras = io::read_cameras(&config.trajectory).map_err(|e| PipelineError::Config {
        pointer: "/trajectory".into(),
        message: e.to_string(),
    })?;
    let trajectory = Trajectory::new(cameras, config.chunk, config.anchors)?;
    let input = io::read_ppm(&config.input_view).map_err(|e| PipelineError::Config {
        pointer: "/input_view".into(),
        message: e.to_string(),
    })?;
    if config.matches_dir.is_some() && config.synth_matches.is_some() {
        return Err(PipelineError::Config {
            pointer: "/synth_matches".into(),
            message: "set either matches_dir or synth_matches, not both".into(),
        });
    }
    let ground_truth = match &config.ground_truth_dir {
        Some(dir) => Some(load_ground_truth(dir, trajectory.len())?),
        None => None,
    };

    let mut generator: Box<dyn Generator> = match &config.generator {
        GeneratorSpec::Oracle => Box::new(OracleGenerator {
            frames: ground_truth.clone().ok_or_else(|| PipelineError::Config {
                pointer: "/ground_truth_dir".into(),
                message: "the oracle generator needs ground-truth views".into(),
            })?,
        }),
        GeneratorSpec::HoleFill => Box::new(HoleFillGenerator),
        GeneratorSpec::Exec(cmd) => Box::new(ExecGenerator::new(cmd.clone(), config.output_dir.join("exec"))),
    };
    let mut depth = DirectoryDepth {
        dir: config.depth_dir.clone(),
    };
    let mut matches: Option<Box<dyn MatchSource>> = match (&config.matches_dir, config.synth_matches) {
        (Some(dir), _) => Some(Box::new(DirectoryMatches { dir: dir.clone() })),
        (None, Some(count)) => Some(Box::new(SyntheticMatches {
            ground_truth: Box::new(DirectoryDepth {
                dir: config.gt_depth_dir.clone().unwrap_or_else(|| config.depth_dir.clone()),
            }),
            count,
            seed: config.seed,
        })),
        (None, None) => None,
    };
    let params = StepParams {
        seed: config.seed,
        align: config.align,
        lwlr: config.lwlr,
    };

    std::fs::create_dir_all(&config.output_dir).map_err(out_err)?;
    let out_dir = &config.output_dir;
    io::write_ppm(&out_dir.join("view_0000.ppm"), &input).map_err(out_err)?;

    let mut state = PipelineState::new(input);
    let mut coverage: Vec<Option<f64>> = vec![None];
    let mut iterations = Vec::new();
    let mut iteration_ms = Vec::new();
    let mut failure = None;
    while state.generated() < trajectory.len() {
        let t0 = Instant::now();
        let step = super::pipeline_step(
            &mut state,
            &trajectory,
            &mut depth,
            matches.as_mut().map(|m| &mut **m as &mut dyn MatchSource),
            generator.as_mut(),
            &params,
        );
        let step = match step {
            Ok(s) => s,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        log::info!(
            "iteration {}: source {} -> views {:?}",
            step.iteration,
            step.source,
            step.targets
        );
        for (t, w) in step.targets.iter().zip(&step.warps) {
            io::write_ppm(&out_dir.join(format!("view_{t:04}.ppm")), &state.images[*t])
                .map_err(out_err)?;
            coverage.push(Some(w.mask.fraction()));
        }
        persist(out_dir, &step, config.save_intermediates)?;
        iterations.push(IterationSummary {
            iteration: step.iteration,
            source: step.source,
            anchors: step.anchors.clone(),
            targets: step.targets.clone(),
            alignment: step.alignment.clone(),
        });
        iteration_ms.push(t0.elapsed().as_secs_f64() * 1e3);
    }

    let per_view = (0..state.generated())
        .map(|i| {
            let (p, s) = match &ground_truth {
                Some(gt) => (
                    psnr(&state.images[i], &gt[i], 1.0).ok(),
                    ssim(&state.images[i], &gt[i], &SsimParams::default()).ok(),
                ),
                None => (None, None),
            };
            ViewSummary {
                view: i,
                coverage: coverage[i],
                psnr: p,
                ssim: s,
            }
        })
        .collect();
    let summary = RunSummary {
        schema_version: 1,
        generator: String::from(config.generator.clone()),
        seed: config.seed,
        views: state.generated(),
        iterations,
        per_view,
        error: failure.as_ref().map(|e| ErrorSummary {
            stage: e.stage_name(),
            message: e.to_string(),
        }),
    };
    io::write_json(&out_dir.join("summary.json"), &summary).map_err(out_err)?;
    io::write_json(
        &out_dir.join("timings.json"),
        &Timings {
            total_ms: started.elapsed().as_secs_f64() * 1e3,
            iterations_ms: iteration_ms,
        },
    )
    .map_err(out_err)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_spec_parsing() {
        let g: GeneratorSpec = serde_json::from_str("\"exec:cp -r {input} {output}\"").unwrap();
        assert_eq!(g, GeneratorSpec::Exec("cp -r {input} {output}".into()));
        assert_eq!(serde_json::to_string(&GeneratorSpec::HoleFill).unwrap(), "\"holefill\"");
        assert!(serde_json::from_str::<GeneratorSpec>("\"exec:\"").is_err());
        assert!(serde_json::from_str::<GeneratorSpec>("\"mvd\"").is_err());
    }

    #[test]
    fn config_errors_carry_pointer() {
        let e = io::parse_config::<PipelineConfig>(
            br#"{"trajectory":"t.json","input_view":"v.ppm","depth_dir":"d",
                "generator":"holefill","output_dir":"o","chunk":"many"}"#,
        )
        .unwrap_err();
        assert_eq!(e.pointer, "/chunk");
        let e = io::parse_config::<PipelineConfig>(
            br#"{"trajectory":"t.json","input_view":"v.ppm","depth_dir":"d",
                "generator":"holefill","output_dir":"o","align":{"iterations":-1}}"#,
        )
        .unwrap_err();
        assert_eq!(e.pointer, "/align/iterations");
    }
}
