//! `lidarpipe`: inspect KITTI frames, encode them into pillar or voxel
//! tensors, render BEV and camera projections, evaluate detections and
//! benchmark the encoders.
//!
//! Exit codes: 0 on success, 1 on internal errors, 2 on bad input or usage.

mod commands;
mod config;
mod dataset;

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lidarpipe::bev::Palette;
use lidarpipe::eval::{ApMode, Metric};

use commands::{BenchArgs, Encoder, EvalArgs, FrameArgs, InspectArgs, VoxelArgs};
use config::RunConfig;
use dataset::Dataset;

/// Marks an error as a failure of this program or its environment rather
/// than of the user's input.
#[derive(Debug)]
pub struct Internal(String);

impl fmt::Display for Internal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Internal {}

impl Internal {
    pub fn wrap<E>(err: E, msg: String) -> anyhow::Error
    where
        E: std::error::Error + Send + Sync + 'static,
    {
        anyhow::Error::new(err).context(Internal(msg))
    }
}

#[derive(Parser, Debug)]
#[command(name = "lidarpipe", version, about = "LiDAR preprocessing and KITTI evaluation toolkit")]
struct Cli {
    /// Dataset root holding velodyne/, label_2/ and calib/.
    #[arg(long, env = "LIDARPIPE_DATA", global = true)]
    data: Option<PathBuf>,
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: lidarpipe-out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for per-frame processing (0 = all cores).
    #[arg(long, default_value_t = 0, global = true)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Frames {
    /// Frame ids, e.g. 000123 or 123; default is every frame in the dataset.
    frames: Vec<String>,
    /// File listing frame ids, one per line.
    #[arg(long, conflicts_with = "frames")]
    split: Option<PathBuf>,
}

impl Frames {
    fn into_args(self) -> FrameArgs {
        FrameArgs { frames: self.frames, split: self.split }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print point counts, label counts and calibration of frames.
    Inspect {
        #[command(flatten)]
        frames: Frames,
        /// Print the category histogram of the labels instead.
        #[arg(long)]
        counts: bool,
    },
    /// Encode frames into pillar pseudo images (pillars/<id>.bin).
    Pillars {
        #[command(flatten)]
        frames: Frames,
        /// Capacity of the pillar tensor.
        #[arg(long)]
        max_pillars: Option<usize>,
        /// Points kept per pillar.
        #[arg(long)]
        max_points: Option<usize>,
    },
    /// Voxelize frames, apply one VFE layer and write sparse tensors (voxels/<id>.bin).
    Voxelize {
        #[command(flatten)]
        frames: Frames,
        /// JSON file with VFE weights; default is a fixed built-in pattern.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Output width of the built-in VFE layer.
        #[arg(long)]
        c_out: Option<usize>,
        /// Directory of per-frame image feature maps to fuse (<id>.bin).
        #[arg(long)]
        image_features: Option<PathBuf>,
    },
    /// Render bird's-eye-view height images (bev/<id>.ppm).
    Bev {
        #[command(flatten)]
        frames: Frames,
        /// Height colormap: turbo or viridis.
        #[arg(long)]
        palette: Option<Palette>,
        /// Meters per pixel.
        #[arg(long)]
        resolution: Option<f64>,
    },
    /// Draw points projected into the camera, colored by depth (project/<id>.ppm).
    Project {
        #[command(flatten)]
        frames: Frames,
        /// Image width in pixels.
        #[arg(long)]
        width: Option<usize>,
        /// Image height in pixels.
        #[arg(long)]
        height: Option<usize>,
        /// Depth in meters at the top of the palette.
        #[arg(long)]
        max_depth: Option<f64>,
        /// Depth colormap: turbo or viridis.
        #[arg(long)]
        palette: Option<Palette>,
    },
    /// Compute average precision of detections against labels.
    Eval {
        /// Detection directory with one <id>.txt per frame.
        #[arg(long)]
        det: PathBuf,
        /// Label directory [default: <data>/label_2].
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Calibration directory [default: <data>/calib].
        #[arg(long)]
        calib: Option<PathBuf>,
        /// Overlap metrics: 2d, bev, 3d [default: all three].
        #[arg(long, value_delimiter = ',')]
        metric: Vec<Metric>,
        /// Recall points of the interpolated AP: 11 or 40.
        #[arg(long)]
        mode: Option<ApMode>,
        /// Count Van labels as false negatives for Car (and Person_sitting for Pedestrian) instead of ignoring them.
        #[arg(long)]
        no_similar_classes: bool,
        /// File listing the frame ids to evaluate.
        #[arg(long)]
        split: Option<PathBuf>,
    },
    /// Measure per-frame encoder latency and throughput.
    Bench {
        #[command(flatten)]
        frames: Frames,
        /// Encoder to time.
        #[arg(long, value_enum, default_value_t = Encoder::Pillars)]
        encoder: Encoder,
        /// Timed passes over the frame set.
        #[arg(long, default_value_t = 10)]
        iterations: usize,
    },
    /// Print reference values of the loss functions.
    Selfcheck,
}

fn dataset(cli_data: &Option<PathBuf>, cfg: &RunConfig) -> Result<Dataset> {
    let Some(root) = cli_data.clone().or_else(|| cfg.data.clone()) else {
        bail!("no dataset root: pass --data, set LIDARPIPE_DATA or set `data` in the config");
    };
    Dataset::new(root)
}

fn run(cli: Cli, out: &mut impl Write) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let out_dir = cli.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("lidarpipe-out"));
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Internal::wrap(e, "cannot start worker threads".into()))?;

    match cli.command {
        Command::Inspect { frames, counts } => {
            let ds = dataset(&cli.data, &cfg)?;
            commands::inspect(&ds, &InspectArgs { frames: frames.frames, split: frames.split, counts }, out)
        }
        Command::Pillars { frames, max_pillars, max_points } => {
            cfg.pillar.max_pillars = max_pillars.unwrap_or(cfg.pillar.max_pillars);
            cfg.pillar.max_points_per_pillar = max_points.unwrap_or(cfg.pillar.max_points_per_pillar);
            let ds = dataset(&cli.data, &cfg)?;
            commands::pillars(&ds, &cfg, &frames.into_args(), &out_dir, out)
        }
        Command::Voxelize { frames, weights, c_out, image_features } => {
            cfg.vfe.weights = weights.or(cfg.vfe.weights);
            cfg.vfe.c_out = c_out.unwrap_or(cfg.vfe.c_out);
            let ds = dataset(&cli.data, &cfg)?;
            let args = VoxelArgs { frames: frames.into_args(), image_features };
            commands::voxelize_cmd(&ds, &cfg, &args, &out_dir, out)
        }
        Command::Bev { frames, palette, resolution } => {
            cfg.bev.palette = palette.unwrap_or(cfg.bev.palette);
            cfg.bev.resolution = resolution.unwrap_or(cfg.bev.resolution);
            let ds = dataset(&cli.data, &cfg)?;
            commands::bev(&ds, &cfg, &frames.into_args(), &out_dir, out)
        }
        Command::Project { frames, width, height, max_depth, palette } => {
            let p = &mut cfg.project;
            p.width = width.unwrap_or(p.width);
            p.height = height.unwrap_or(p.height);
            p.max_depth = max_depth.unwrap_or(p.max_depth);
            p.palette = palette.unwrap_or(p.palette);
            let ds = dataset(&cli.data, &cfg)?;
            commands::project(&ds, &cfg, &frames.into_args(), &out_dir, out)
        }
        Command::Eval { det, gt, calib, metric, mode, no_similar_classes, split } => {
            cfg.eval.mode = mode.unwrap_or(cfg.eval.mode);
            if no_similar_classes {
                cfg.eval.ignore_similar_classes = false;
            }
            let root = || -> Result<PathBuf> { Ok(dataset(&cli.data, &cfg)?.root) };
            let gt = match gt {
                Some(gt) => gt,
                None => root()?.join(dataset::LABELS),
            };
            let calib = match calib {
                Some(c) => c,
                None if metric.iter().all(|m| *m == Metric::Bbox2d) && !metric.is_empty() => PathBuf::new(),
                None => root()?.join(dataset::CALIB),
            };
            for dir in [&gt, &det] {
                if !dir.is_dir() {
                    bail!("{} is not a directory", dir.display());
                }
            }
            let mut metrics = if metric.is_empty() { Metric::ALL.to_vec() } else { metric };
            metrics.sort();
            metrics.dedup();
            let args = EvalArgs { gt, det, calib, metrics, split };
            commands::eval(&cfg, &args, &out_dir, out)
        }
        Command::Bench { frames, encoder, iterations } => {
            let ds = dataset(&cli.data, &cfg)?;
            commands::bench(&ds, &cfg, &BenchArgs { frames: frames.into_args(), encoder, iterations }, out)
        }
        Command::Selfcheck => commands::selfcheck(out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        run(cli, &mut out).and_then(|()| out.flush().context("cannot write to stdout"))
    }));
    match result {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(err)) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<Internal>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
        // the panic message is already on stderr
        Err(_) => ExitCode::from(1),
    }
}
