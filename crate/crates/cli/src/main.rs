use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use berrysize::crf::Label;
use berrysize::imaging::save_png;
use berrysize::pipeline::{error_json, list_images, read_diameters_csv, read_manual_csv, run_batch, run_pipeline, RunOptions};
use berrysize::synth::{evaluate_detection, render_scene, GroundTruth, SceneSpec};
use berrysize::{Error, PipelineConfig, Result};
use clap::{Args, Parser, Subcommand};

/// Detects grapevine berries in images and reports their diameters.
#[derive(Parser)]
#[command(name = "berrysize", version, about)]
struct Cli {
    /// Log verbosity (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyse a single image
    Analyze {
        image: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Analyse every image of a directory (or the listed files)
    Batch {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// Images analysed concurrently
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
    /// Render a synthetic berry scene with its ground truth
    Synth {
        #[arg(long, default_value = "synth")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2500)]
        width: usize,
        #[arg(long, default_value_t = 1667)]
        height: usize,
        /// Disk count range, `min,max`
        #[arg(long, default_value = "20,40")]
        disks: String,
        /// Disk radius range in pixels, `min,max`
        #[arg(long, default_value = "15,45")]
        radius: String,
        /// Label width in pixels, fixing the scene scale
        #[arg(long, default_value_t = 78.0)]
        scale_px: f64,
        #[arg(long, default_value_t = 3)]
        clusters: usize,
        #[arg(long, default_value_t = 6)]
        distractors: usize,
        #[arg(long, default_value_t = 0.3)]
        occlusion: f64,
        #[arg(long, default_value_t = 0.0)]
        low_contrast: f64,
    },
    /// Score a `diameters.csv` against a truth file from `synth`
    Eval {
        detections: PathBuf,
        truth: PathBuf,
        /// Matching tolerance in pixels
        #[arg(long, default_value_t = 3.0)]
        tol: f64,
    },
    /// Print the effective configuration
    DumpConfig {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Width of the 13 mm scale label in pixels
    #[arg(long)]
    scale_px: Option<f64>,
    /// Radius range in pixels, `min,max`
    #[arg(long)]
    radius_px: Option<String>,
    /// Key-value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// CSV with `mean_diameter_mm` (and optionally `image`) columns
    #[arg(long)]
    manual: Option<PathBuf>,
    /// Directory of berry patches used when too few references are found
    #[arg(long)]
    ref_patches: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// `potts` or `literal`
    #[arg(long)]
    pairwise: Option<String>,
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(b) = self.scale_px {
            cfg.scale_px = Some(b);
        }
        if let Some(r) = &self.radius_px {
            cfg.set("radius_px", r)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = &self.pairwise {
            cfg.set("pairwise", p)?;
        }
        Ok(cfg)
    }

    fn options(&self) -> Result<RunOptions> {
        Ok(RunOptions {
            manual: match &self.manual {
                Some(p) => read_manual_csv(p)?,
                None => Vec::new(),
            },
            ref_patches: self.ref_patches.clone(),
        })
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("json value serialises");
    fs::write(path, text).map_err(|source| Error::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_pair<T: std::str::FromStr>(name: &str, v: &str) -> Result<(T, T)> {
    let bad = || Error::InvalidArgument(format!("--{name} expects 'min,max', got '{v}'"));
    let (a, b) = v.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

/// Runs a subcommand; the returned code is the process exit status.
fn run(cmd: Command) -> std::result::Result<i32, (Error, Option<PathBuf>)> {
    match cmd {
        Command::Analyze { image, common } => {
            let out = common.out.clone();
            let fail = |e| (e, Some(out.clone()));
            let cfg = common.config().map_err(fail)?;
            let opts = common.options().map_err(fail)?;
            let report = run_pipeline(&image, &cfg, &common.out, &opts).map_err(fail)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
            Ok(0)
        }
        Command::Batch { inputs, common, workers } => {
            let out = common.out.clone();
            let fail = |e| (e, Some(out.clone()));
            let cfg = common.config().map_err(fail)?;
            let opts = common.options().map_err(fail)?;
            let mut images = Vec::new();
            for p in &inputs {
                if p.is_dir() {
                    images.extend(list_images(p).map_err(fail)?);
                } else {
                    images.push(p.clone());
                }
            }
            if images.is_empty() {
                return Err(fail(Error::InvalidArgument("no images to analyse".into())));
            }
            let report = run_batch(&images, &cfg, &common.out, &opts, workers).map_err(fail)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("batch report serialises"));
            Ok(report.exit_code())
        }
        Command::Synth {
            out,
            seed,
            width,
            height,
            disks,
            radius,
            scale_px,
            clusters,
            distractors,
            occlusion,
            low_contrast,
        } => {
            let fail = |e| (e, None);
            if !(scale_px > 0.0) {
                return Err(fail(Error::InvalidArgument(format!("--scale-px must be positive, got {scale_px}"))));
            }
            let spec = SceneSpec {
                width,
                height,
                mm_per_px: berrysize::sizing::LABEL_WIDTH_MM / scale_px,
                clusters,
                disks: parse_pair("disks", &disks).map_err(fail)?,
                radius_px: parse_pair("radius", &radius).map_err(fail)?,
                distractors,
                occlusion_fraction: occlusion,
                low_contrast_fraction: low_contrast,
                seed,
                ..SceneSpec::default()
            };
            let (img, truth) = render_scene(&spec).map_err(fail)?;
            fs::create_dir_all(&out).map_err(|source| fail(Error::Unwritable { path: out.clone(), source }))?;
            save_png(&img, &out.join("scene.png")).map_err(fail)?;
            let json = serde_json::to_value(&truth).expect("truth serialises");
            write_json(&out.join("truth.json"), &json).map_err(fail)?;
            println!(
                "{}",
                serde_json::json!({
                    "image": out.join("scene.png"),
                    "truth": out.join("truth.json"),
                    "disks": truth.disks.len(),
                    "mean_diameter_mm": truth.mean_diameter_mm(),
                })
            );
            Ok(0)
        }
        Command::Eval { detections, truth, tol } => {
            let fail = |e| (e, None);
            let text = fs::read_to_string(&truth).map_err(|source| fail(Error::Unreadable { path: truth.clone(), source }))?;
            let gt: GroundTruth = serde_json::from_str(&text)
                .map_err(|e| fail(Error::InvalidArgument(format!("{}: {e}", truth.display()))))?;
            let berries: Vec<_> = read_diameters_csv(&detections)
                .map_err(fail)?
                .into_iter()
                .filter(|(_, l)| *l == Label::Berry)
                .map(|(c, _)| c)
                .collect();
            let score = evaluate_detection(&berries, &gt.circles(), tol).map_err(fail)?;
            let mean_mm = (!berries.is_empty())
                .then(|| berries.iter().map(|c| 2.0 * c.radius).sum::<f64>() / berries.len() as f64 * gt.mm_per_px);
            println!(
                "{}",
                serde_json::json!({
                    "score": score,
                    "mean_diameter_mm": mean_mm,
                    "truth_mean_diameter_mm": gt.mean_diameter_mm(),
                })
            );
            Ok(0)
        }
        Command::DumpConfig { common } => {
            let cfg = common.config().map_err(|e| (e, None))?;
            print!("{}", cfg.to_text());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let code = match run(cli.command) {
        Ok(code) => code,
        Err((err, out)) => {
            let json = error_json(&err);
            println!("{json}");
            if let Some(dir) = out {
                if fs::create_dir_all(&dir).is_ok() {
                    if let Err(e) = write_json(&dir.join("error.json"), &json) {
                        eprintln!("{e}");
                    }
                }
            }
            err.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
