use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use headpose::features::Measure;
use headpose::imaging::save_image;
use headpose::pose::PoseAngles;
use headpose::Error;
use headpose_cli::commands::{self, SynthOptions, TrainingSet};
use headpose_cli::{exit, Overrides, PipelineConfig};

#[derive(Parser)]
#[command(name = "headpose", version, about = "Estimate head pose from a single image")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train feature models from labeled images.
    Train(TrainArgs),
    /// Locate the features in an image and estimate the head pose.
    Detect(DetectArgs),
    /// Solve the pose for three given image points.
    Pose(PoseArgs),
    /// Render a synthetic fixture with its ground truth, config and samples.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Distance measure, overriding the config.
    #[arg(long, value_parser = parse_measure)]
    measure: Option<Measure>,
    /// Peaks kept per feature, overriding the config.
    #[arg(long = "top-k")]
    top_k: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<PipelineConfig> {
        let mut config = PipelineConfig::load(&self.config)?;
        config.apply(&Overrides { measure: self.measure, top_k: self.top_k })?;
        Ok(config)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Labeled samples (JSON list of image, mask and per-feature anchors).
    #[arg(long)]
    samples: PathBuf,
    /// Also estimate a constellation model from the anchors and write it here.
    #[arg(long = "constellation-out")]
    constellation_out: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Input image (P5 or P6).
    image: PathBuf,
    /// Silhouette mask (P5); the full frame is searched when omitted.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Write a P6 copy of the input with the result drawn on it.
    #[arg(long)]
    overlay: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PoseArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Left eye (image left) as "x,y".
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    left: (f64, f64),
    /// Right eye as "x,y".
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    right: (f64, f64),
    /// Mouth as "x,y".
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    mouth: (f64, f64),
    /// Shift vector "dx,dy"; a frontal view is assumed when omitted.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    shift: Option<(f64, f64)>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Uniform noise amplitude added to every sample.
    #[arg(long, default_value_t = 0)]
    noise: u8,
    #[arg(long, default_value_t = 320)]
    width: usize,
    #[arg(long, default_value_t = 240)]
    height: usize,
    /// Focal length in pixels.
    #[arg(long, default_value_t = 300.0)]
    focal: f64,
    /// Fixed rotation "yaw,pitch,roll" in degrees; random when omitted.
    #[arg(long, value_parser = parse_angles, allow_hyphen_values = true)]
    angles: Option<PoseAngles>,
}

fn parse_measure(s: &str) -> Result<Measure, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_numbers(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {s:?}"));
    }
    parts
        .iter()
        .map(|p| p.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| format!("{p:?} is not a finite number")))
        .collect()
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let v = parse_numbers(s, 2)?;
    Ok((v[0], v[1]))
}

fn parse_angles(s: &str) -> Result<PoseAngles, String> {
    let v = parse_numbers(s, 3)?;
    Ok(PoseAngles { yaw: v[0], pitch: v[1], roll: v[2] })
}

fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|source| Error::Write { path: path.to_path_buf(), source })
            .map_err(Into::into),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(args) => {
            let config = args.config.load()?;
            let set = TrainingSet::load(&args.samples)?;
            for t in commands::train(&config, &set)? {
                println!("{}: {} sample(s) -> {}", t.name, t.training_count, t.model.display());
            }
            if let Some(path) = args.constellation_out {
                let model = commands::estimate_constellation(&config, &set).context("constellation model")?;
                let text = serde_json::to_string_pretty(&model)? + "\n";
                fs::write(&path, text).map_err(|source| Error::Write { path, source })?;
            }
        }
        Command::Detect(args) => {
            let config = args.config.load()?;
            let detection = commands::detect(&config, &args.image, args.mask.as_deref())?;
            if let Some(path) = &args.overlay {
                save_image(&detection.overlay(), path)?;
            }
            emit(&detection.report.to_json(), args.out.as_deref())?;
        }
        Command::Pose(args) => {
            let config = args.config.load()?;
            let report = commands::pose(&config, args.left, args.right, args.mouth, args.shift)?;
            emit(&report.to_json(), args.out.as_deref())?;
        }
        Command::Synth(args) => {
            let options = SynthOptions {
                seed: args.seed,
                noise: args.noise,
                canvas: (args.width, args.height),
                focal_length: args.focal,
                angles: args.angles,
            };
            let files = commands::synth(&options, &args.out_dir)?;
            for p in [&files.image, &files.mask, &files.truth, &files.samples, &files.config] {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("headpose: {err:#}");
            ExitCode::from(exit::for_anyhow(&err) as u8)
        }
    }
}
