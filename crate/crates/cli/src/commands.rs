//! Subcommand implementations. Primary output goes to stdout in frame order;
//! timings go to stderr.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use lidarpipe::bev::{rasterize_bev, RgbImage};
use lidarpipe::eval::{evaluate, EvalReport, Metric, BENCHMARK_CLASSES};
use lidarpipe::geometry::{lidar_to_camera, project_to_image};
use lidarpipe::kitti::parse_detections;
use lidarpipe::pillar::{encode_pillars, write_pillar_dump};
use lidarpipe::targets::{focal_loss, smooth_l1, total_loss_pfe, total_loss_vfe, VfeLossWeights};
use lidarpipe::voxel::{
    append_image_features, to_sparse_tensor, vfe_layer, voxel_wise_max, voxelize, write_sparse_dump, VfeWeights,
    VOXEL_FEATURES,
};
use lidarpipe::{Calibration, Detection, ObjectClass, PointCloud};
use ndarray::Array3;
use rayon::prelude::*;

use crate::config::{ProjectSection, RunConfig};
use crate::dataset::{self, Dataset};
use crate::Internal;

/// Creates `dir` and returns it; failures are reported as internal errors.
fn output_dir(base: &Path, sub: &str) -> Result<PathBuf> {
    let dir = base.join(sub);
    fs::create_dir_all(&dir).map_err(|e| Internal::wrap(e, format!("cannot create {}", dir.display())))?;
    Ok(dir)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let result = File::create(path).and_then(|file| {
        let mut out = BufWriter::new(file);
        f(&mut out)?;
        out.flush()
    });
    result.map_err(|e| Internal::wrap(e, format!("cannot write {}", path.display())))
}

/// Runs `job` over the frames in parallel and returns results in frame order.
fn per_frame<T: Send>(ids: &[String], job: impl Fn(&str) -> Result<T> + Sync) -> Result<Vec<T>> {
    ids.par_iter().map(|id| job(id).with_context(|| format!("frame {id}"))).collect()
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

pub struct InspectArgs {
    pub frames: Vec<String>,
    pub split: Option<PathBuf>,
    pub counts: bool,
}

fn class_counts(anns: &[lidarpipe::Annotation]) -> BTreeMap<ObjectClass, usize> {
    let mut counts = BTreeMap::new();
    for a in anns {
        *counts.entry(a.label).or_insert(0) += 1;
    }
    counts
}

pub fn inspect(ds: &Dataset, args: &InspectArgs, out: &mut impl Write) -> Result<()> {
    if args.counts {
        let ids = ds.frames(&args.frames, args.split.as_deref(), dataset::LABELS, "txt")?;
        ds.require(&ids, Dataset::label_path)?;
        let per = per_frame(&ids, |id| Ok(class_counts(&ds.labels(id)?)))?;
        let mut total: BTreeMap<ObjectClass, usize> = ObjectClass::ALL.iter().map(|&c| (c, 0)).collect();
        for counts in per {
            for (c, n) in counts {
                *total.get_mut(&c).unwrap() += n;
            }
        }
        writeln!(out, "category counts over {} frames", ids.len())?;
        for (c, n) in &total {
            writeln!(out, "{:<16}{n:>8}", c.display_name())?;
        }
        writeln!(out, "{:<16}{:>8}", "total", total.values().sum::<usize>())?;
        return Ok(());
    }

    let ids = ds.frames(&args.frames, args.split.as_deref(), dataset::VELODYNE, "bin")?;
    ds.require(&ids, Dataset::cloud_path)?;
    let reports = per_frame(&ids, |id| {
        let cloud = ds.cloud(id)?;
        let mut text = format!("frame {id}\n  points: {}\n", cloud.len());
        if ds.label_path(id).is_file() {
            let counts = class_counts(&ds.labels(id)?);
            let list: Vec<String> = counts.iter().map(|(c, n)| format!("{c} {n}")).collect();
            let total: usize = counts.values().sum();
            text += &format!("  labels: {total} ({})\n", if list.is_empty() { "none".into() } else { list.join(", ") });
        } else {
            text += "  labels: no label file\n";
        }
        if ds.calib_path(id).is_file() {
            let c = ds.calib(id)?;
            let t = c.tr_velo_to_cam.column(3);
            text += &format!(
                "  calib: fx {:.4} fy {:.4} cx {:.4} cy {:.4}; lidar origin in camera ({:.4}, {:.4}, {:.4})\n",
                c.p2[(0, 0)],
                c.p2[(1, 1)],
                c.p2[(0, 2)],
                c.p2[(1, 2)],
                t[0],
                t[1],
                t[2]
            );
        } else {
            text += "  calib: no calibration file\n";
        }
        Ok(text)
    })?;
    for r in reports {
        out.write_all(r.as_bytes())?;
    }
    Ok(())
}

pub struct FrameArgs {
    pub frames: Vec<String>,
    pub split: Option<PathBuf>,
}

impl FrameArgs {
    fn clouds(&self, ds: &Dataset) -> Result<Vec<String>> {
        let ids = ds.frames(&self.frames, self.split.as_deref(), dataset::VELODYNE, "bin")?;
        ds.require(&ids, Dataset::cloud_path)?;
        Ok(ids)
    }
}

pub fn pillars(ds: &Dataset, cfg: &RunConfig, args: &FrameArgs, out_base: &Path, out: &mut impl Write) -> Result<()> {
    cfg.pillar.grid_shape()?;
    let ids = args.clouds(ds)?;
    let dir = output_dir(out_base, "pillars")?;
    let rows = per_frame(&ids, |id| {
        let cloud = ds.cloud(id)?;
        let start = Instant::now();
        let pt = encode_pillars(&cloud, &cfg.pillar)?;
        let elapsed = ms(start);
        write_file(&dir.join(format!("{id}.bin")), |w| write_pillar_dump(&pt, w))?;
        let line = format!(
            "{id} points={} kept={} nonempty_pillars={}",
            cloud.len(),
            pt.total_points(),
            pt.num_nonempty
        );
        Ok((line, elapsed))
    })?;
    for (id, (line, elapsed)) in ids.iter().zip(rows) {
        writeln!(out, "{line}")?;
        eprintln!("{id} encode {elapsed:.2} ms");
    }
    Ok(())
}

pub struct VoxelArgs {
    pub frames: FrameArgs,
    /// Directory of `<id>.bin` image feature maps (u32 C, H, W then f32 data).
    pub image_features: Option<PathBuf>,
}

/// Reads a `C x H x W` feature map: three little-endian u32 dims, then f32 values.
pub fn read_feature_map(path: &Path) -> Result<Array3<f32>> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let word = |i: usize| -> Option<u32> { Some(u32::from_le_bytes(bytes.get(4 * i..4 * i + 4)?.try_into().ok()?)) };
    let (Some(c), Some(h), Some(w)) = (word(0), word(1), word(2)) else {
        bail!("{}: truncated header", path.display());
    };
    let (c, h, w) = (c as usize, h as usize, w as usize);
    let body = &bytes[12..];
    if body.len() != 4 * c * h * w {
        bail!("{}: header says {c}x{h}x{w} but {} value bytes follow", path.display(), body.len());
    }
    let values = body.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
    Ok(Array3::from_shape_vec((c, h, w), values)?)
}

fn vfe_weights(cfg: &RunConfig, c_in: usize) -> Result<VfeWeights> {
    let w = match &cfg.vfe.weights {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let w: VfeWeights = serde_json::from_str(&text).with_context(|| format!("in {}", path.display()))?;
            w.validate()?;
            w
        }
        None => VfeWeights::patterned(c_in, cfg.vfe.c_out)?,
    };
    if w.c_in() != c_in {
        bail!("VFE weights expect {} input channels, the voxel features have {c_in}", w.c_in());
    }
    Ok(w)
}

pub fn voxelize_cmd(ds: &Dataset, cfg: &RunConfig, args: &VoxelArgs, out_base: &Path, out: &mut impl Write) -> Result<()> {
    cfg.voxel.grid_shape()?;
    let ids = args.frames.clouds(ds)?;
    if let Some(dir) = &args.image_features {
        ds.require(&ids, Dataset::calib_path)?;
        for id in &ids {
            let path = dir.join(format!("{id}.bin"));
            if !path.is_file() {
                bail!("frame {id}: missing {}", path.display());
            }
        }
    }
    // the fused width depends on each frame's feature map, so those weights are built per frame
    let lidar_only = match &args.image_features {
        None => Some(vfe_weights(cfg, VOXEL_FEATURES)?),
        Some(_) => None,
    };
    let dir = output_dir(out_base, "voxels")?;
    let rows = per_frame(&ids, |id| {
        let cloud = ds.cloud(id)?;
        let start = Instant::now();
        let mut vg = voxelize(&cloud, &cfg.voxel)?;
        let fused;
        let w = match (&lidar_only, &args.image_features) {
            (Some(w), _) => w,
            (None, Some(fdir)) => {
                let map = read_feature_map(&fdir.join(format!("{id}.bin")))?;
                vg = append_image_features(&vg, map.view(), &ds.calib(id)?);
                fused = vfe_weights(cfg, vg.feature_dim())?;
                &fused
            }
            (None, None) => unreachable!("weights are prepared when there is no feature map"),
        };
        let point_out = vfe_layer(vg.point_features.view(), &vg.counts, w)?;
        let voxel_features = voxel_wise_max(point_out.view(), &vg.counts);
        let st = to_sparse_tensor(&vg, voxel_features.view())?;
        let elapsed = ms(start);
        write_file(&dir.join(format!("{id}.bin")), |out| write_sparse_dump(&st, out))?;
        let [d, h, wd] = vg.grid_shape;
        let line = format!(
            "{id} points={} kept={} nonempty_voxels={} channels={} grid={d}x{h}x{wd}",
            cloud.len(),
            vg.total_points(),
            vg.len(),
            w.c_out()
        );
        Ok((line, elapsed))
    })?;
    for (id, (line, elapsed)) in ids.iter().zip(rows) {
        writeln!(out, "{line}")?;
        eprintln!("{id} encode {elapsed:.2} ms");
    }
    Ok(())
}

pub fn bev(ds: &Dataset, cfg: &RunConfig, args: &FrameArgs, out_base: &Path, out: &mut impl Write) -> Result<()> {
    cfg.bev.image_shape()?;
    let ids = args.clouds(ds)?;
    let dir = output_dir(out_base, "bev")?;
    let rows = per_frame(&ids, |id| {
        let cloud = ds.cloud(id)?;
        let start = Instant::now();
        let img = rasterize_bev(&cloud, &cfg.bev)?;
        let elapsed = ms(start);
        write_file(&dir.join(format!("{id}.ppm")), |w| img.write_ppm(w))?;
        Ok((format!("{id} size={}x{} pixels={}", img.width, img.height, img.nonzero_pixels()), elapsed))
    })?;
    for (id, (line, elapsed)) in ids.iter().zip(rows) {
        writeln!(out, "{line}")?;
        eprintln!("{id} rasterize {elapsed:.2} ms");
    }
    Ok(())
}

/// Draws projected points on a black canvas colored by depth; the nearest
/// point wins each pixel. Returns the image and the number of points that
/// landed on it.
pub fn render_projection(cloud: &PointCloud, calib: &Calibration, p: &ProjectSection) -> (RgbImage, usize) {
    let mut img = RgbImage::black(p.width, p.height);
    let mut depth = vec![f64::INFINITY; p.width * p.height];
    let mut drawn = 0;
    for ip in project_to_image(&lidar_to_camera(cloud, calib), calib) {
        let (u, v) = (ip.u.floor(), ip.v.floor());
        if !(u >= 0.0 && v >= 0.0 && u < p.width as f64 && v < p.height as f64) {
            continue;
        }
        drawn += 1;
        let (col, row) = (u as usize, v as usize);
        let slot = &mut depth[row * p.width + col];
        if ip.depth < *slot {
            *slot = ip.depth;
            img.put(row, col, p.palette.color((ip.depth / p.max_depth).clamp(0.0, 1.0)));
        }
    }
    (img, drawn)
}

pub fn project(ds: &Dataset, cfg: &RunConfig, args: &FrameArgs, out_base: &Path, out: &mut impl Write) -> Result<()> {
    let p = &cfg.project;
    if p.width == 0 || p.height == 0 || !(p.max_depth > 0.0) {
        bail!(lidarpipe::Error::BadConfig(format!(
            "project needs a positive image size and max_depth, got {}x{} and {}",
            p.width, p.height, p.max_depth
        )));
    }
    let ids = args.clouds(ds)?;
    ds.require(&ids, Dataset::calib_path)?;
    let dir = output_dir(out_base, "project")?;
    let rows = per_frame(&ids, |id| {
        let cloud = ds.cloud(id)?;
        let calib = ds.calib(id)?;
        let start = Instant::now();
        let (img, drawn) = render_projection(&cloud, &calib, p);
        let elapsed = ms(start);
        write_file(&dir.join(format!("{id}.ppm")), |w| img.write_ppm(w))?;
        Ok((format!("{id} points={} in_image={drawn} pixels={}", cloud.len(), img.nonzero_pixels()), elapsed))
    })?;
    for (id, (line, elapsed)) in ids.iter().zip(rows) {
        writeln!(out, "{line}")?;
        eprintln!("{id} project {elapsed:.2} ms");
    }
    Ok(())
}

pub struct EvalArgs {
    pub gt: PathBuf,
    pub det: PathBuf,
    pub calib: PathBuf,
    pub metrics: Vec<Metric>,
    pub split: Option<PathBuf>,
}

/// Loads the ground truth, detections and calibrations keyed by frame.
/// Frames without a detection file have no detections; a detection file
/// without ground truth is an error.
fn load_eval_inputs(
    args: &EvalArgs,
    need_calib: bool,
) -> Result<(BTreeMap<String, Vec<lidarpipe::Annotation>>, BTreeMap<String, Vec<Detection>>, BTreeMap<String, Calibration>)> {
    let ids = match &args.split {
        Some(split) => dataset::read_split(split)?,
        None => dataset::list_frames(&args.gt, "txt")?,
    };
    if args.split.is_none() {
        let det_ids = dataset::list_frames(&args.det, "txt")?;
        if let Some(extra) = det_ids.iter().find(|d| ids.binary_search(d).is_err()) {
            bail!(lidarpipe::Error::FrameSetMismatch(format!("detections for frame {extra} have no ground truth")));
        }
    } else if !args.det.is_dir() {
        bail!("detection directory {} does not exist", args.det.display());
    }
    let loaded = per_frame(&ids, |id| {
        let gt_path = args.gt.join(format!("{id}.txt"));
        let gts = lidarpipe::kitti::parse_labels(
            &fs::read_to_string(&gt_path).with_context(|| format!("cannot read {}", gt_path.display()))?,
        )
        .with_context(|| format!("in {}", gt_path.display()))?;
        let det_path = args.det.join(format!("{id}.txt"));
        let dets = if det_path.is_file() {
            parse_detections(&fs::read_to_string(&det_path)?).with_context(|| format!("in {}", det_path.display()))?
        } else {
            Vec::new()
        };
        let calib = if need_calib {
            let path = args.calib.join(format!("{id}.txt"));
            let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
            Some(lidarpipe::kitti::parse_calib(&text).with_context(|| format!("in {}", path.display()))?)
        } else {
            None
        };
        Ok((gts, dets, calib))
    })?;
    let (mut gts, mut dets, mut calibs) = (BTreeMap::new(), BTreeMap::new(), BTreeMap::new());
    for (id, (g, d, c)) in ids.into_iter().zip(loaded) {
        if let Some(c) = c {
            calibs.insert(id.clone(), c);
        }
        gts.insert(id.clone(), g);
        dets.insert(id, d);
    }
    Ok((gts, dets, calibs))
}

pub fn eval(cfg: &RunConfig, args: &EvalArgs, out_base: &Path, out: &mut impl Write) -> Result<()> {
    cfg.eval.rules.validate()?;
    let need_calib = args.metrics.iter().any(|m| *m != Metric::Bbox2d);
    let start = Instant::now();
    let (gts, dets, calibs) = load_eval_inputs(args, need_calib)?;
    let mut report = EvalReport::new(cfg.eval.mode);
    for &metric in &args.metrics {
        report.merge(evaluate(&gts, &dets, &calibs, metric, &BENCHMARK_CLASSES, &cfg.eval)?);
    }
    let elapsed = ms(start);
    let dir = output_dir(out_base, "eval")?;
    let table = report.to_table();
    write_file(&dir.join("report.txt"), |w| w.write_all(table.as_bytes()))?;
    write_file(&dir.join("report.kv"), |w| w.write_all(report.to_key_values().as_bytes()))?;
    writeln!(out, "evaluated {} frames", gts.len())?;
    out.write_all(table.as_bytes())?;
    eprintln!("eval {elapsed:.2} ms");
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Encoder {
    Pillars,
    Voxels,
    Bev,
}

pub struct BenchArgs {
    pub frames: FrameArgs,
    pub encoder: Encoder,
    pub iterations: usize,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    // nearest rank
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Times the encoder once per frame per iteration, single-threaded so the
/// latencies are not skewed by contention.
pub fn bench(ds: &Dataset, cfg: &RunConfig, args: &BenchArgs, out: &mut impl Write) -> Result<()> {
    if args.iterations == 0 {
        bail!(lidarpipe::Error::BadConfig("iterations must be at least 1".into()));
    }
    let ids = args.frames.clouds(ds)?;
    let clouds = per_frame(&ids, |id| ds.cloud(id))?;
    let weights = VfeWeights::patterned(VOXEL_FEATURES, cfg.vfe.c_out)?;
    let mut samples = Vec::with_capacity(ids.len() * args.iterations);
    let mut points = 0usize;
    for _ in 0..args.iterations {
        for cloud in &clouds {
            let start = Instant::now();
            match args.encoder {
                Encoder::Pillars => {
                    std::hint::black_box(encode_pillars(cloud, &cfg.pillar)?);
                }
                Encoder::Voxels => {
                    let vg = voxelize(cloud, &cfg.voxel)?;
                    std::hint::black_box(vfe_layer(vg.point_features.view(), &vg.counts, &weights)?);
                }
                Encoder::Bev => {
                    std::hint::black_box(rasterize_bev(cloud, &cfg.bev)?);
                }
            }
            samples.push(start.elapsed().as_secs_f64());
            points += cloud.len();
        }
    }
    let frame_points: usize = clouds.iter().map(PointCloud::len).sum();
    writeln!(
        out,
        "encoder={:?} frames={} iterations={} samples={} points={frame_points}",
        args.encoder,
        ids.len(),
        args.iterations,
        samples.len()
    )?;
    let total: f64 = samples.iter().sum();
    samples.sort_by(f64::total_cmp);
    if !samples.is_empty() {
        eprintln!(
            "latency p50={:.3} ms p95={:.3} ms; throughput {:.0} points/s",
            percentile(&samples, 0.5) * 1e3,
            percentile(&samples, 0.95) * 1e3,
            if total > 0.0 { points as f64 / total } else { 0.0 }
        );
    }
    Ok(())
}

/// Prints the reference values of the loss functions.
pub fn selfcheck(out: &mut impl Write) -> Result<()> {
    let ln2 = std::f64::consts::LN_2;
    writeln!(out, "focal_loss(0.5, alpha=0.25, gamma=2) = {:.7}", focal_loss(0.5, 0.25, 2.0))?;
    writeln!(out, "smooth_l1(0.5) = {}", smooth_l1(0.5))?;
    writeln!(out, "smooth_l1(2.0) = {}", smooth_l1(2.0))?;
    writeln!(out, "total_loss_pfe(1, 1, 1, n_pos=1) = {}", total_loss_pfe(1.0, 1.0, 1.0, 1))?;
    writeln!(
        out,
        "total_loss_vfe(pos=[ln 2], neg=[ln 2], reg=[], alpha=1.5, beta=1) = {:.5}",
        total_loss_vfe(&[ln2], &[ln2], &[], VfeLossWeights::default(), 1, 1)
    )?;
    Ok(())
}
