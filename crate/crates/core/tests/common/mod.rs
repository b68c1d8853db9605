//! Reference implementations used as oracles by the integration tests.
//! They favour obviousness over speed and share no logic with the library
//! beyond the box primitives.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lidarpipe::eval::{ApMode, Difficulty, DifficultyRules, EvalConfig, Metric};
use lidarpipe::geometry::{camera_label_to_lidar_box, iou_3d, rotated_iou_bev};
use lidarpipe::kitti::{parse_calib, parse_detections, parse_labels};
use lidarpipe::pillar::{PillarConfig, PillarTensor};
use lidarpipe::targets::AnchorStatus;
use lidarpipe::voxel::grad::vfe_input_gradient;
use lidarpipe::voxel::{vfe_layer, VfeWeights};
use lidarpipe::{Annotation, Box3D, Calibration, Detection, ObjectClass, Point, PointCloud};
use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    // shared with sibling crates, so resolve through the workspace layout
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data")
}

pub struct Benchmark {
    pub gts: BTreeMap<String, Vec<Annotation>>,
    pub dets: BTreeMap<String, Vec<Detection>>,
    pub calibs: BTreeMap<String, Calibration>,
}

pub fn load_mini_benchmark() -> Benchmark {
    let root = data_dir().join("mini_benchmark");
    let mut b = Benchmark { gts: BTreeMap::new(), dets: BTreeMap::new(), calibs: BTreeMap::new() };
    for entry in std::fs::read_dir(root.join("label_2")).unwrap() {
        let path = entry.unwrap().path();
        let id = path.file_stem().unwrap().to_str().unwrap().to_string();
        let read = |dir: &str| std::fs::read_to_string(root.join(dir).join(format!("{id}.txt"))).unwrap();
        b.gts.insert(id.clone(), parse_labels(&read("label_2")).unwrap());
        b.dets.insert(id.clone(), parse_detections(&read("det")).unwrap());
        let calib = parse_calib(&read("calib")).unwrap();
        b.calibs.insert(id, calib);
    }
    b
}

fn overlap_2d(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let w = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let h = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = w * h;
    if inter == 0.0 {
        return 0.0;
    }
    inter / ((a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter)
}

fn overlap(metric: Metric, det: &Annotation, gt: &Annotation, calib: &Calibration) -> f64 {
    if metric == Metric::Bbox2d {
        return overlap_2d(&det.bbox2d, &gt.bbox2d);
    }
    if gt.label == ObjectClass::DontCare {
        return 0.0;
    }
    let (Ok(d), Ok(g)) = (camera_label_to_lidar_box(det, calib), camera_label_to_lidar_box(gt, calib)) else {
        return 0.0;
    };
    if metric == Metric::BboxBev {
        rotated_iou_bev(&d, &g)
    } else {
        iou_3d(&d, &g)
    }
}

#[derive(PartialEq)]
enum Role {
    Counted,
    Ignored,
    Unrelated,
}

fn role(a: &Annotation, class: ObjectClass, difficulty: Difficulty, rules: &DifficultyRules, similar: bool) -> Role {
    let r = match difficulty {
        Difficulty::Easy => rules.easy,
        Difficulty::Moderate => rules.moderate,
        Difficulty::Hard => rules.hard,
    };
    let height = a.bbox2d[3] - a.bbox2d[1];
    let visible = height >= r.min_bbox_height && a.occluded <= r.max_occlusion && a.truncated <= r.max_truncation;
    let is_similar = similar
        && matches!(
            (class, a.label),
            (ObjectClass::Car, ObjectClass::Van) | (ObjectClass::Pedestrian, ObjectClass::PersonSitting)
        );
    if a.label == class && visible {
        Role::Counted
    } else if a.label == class || is_similar || a.label == ObjectClass::DontCare {
        Role::Ignored
    } else {
        Role::Unrelated
    }
}

/// Brute-force AP for one cell: every prefix of the pooled ranking is
/// re-matched from scratch to get its precision and recall.
pub fn oracle_ap(
    b: &Benchmark,
    metric: Metric,
    class: ObjectClass,
    difficulty: Difficulty,
    cfg: &EvalConfig,
) -> Option<f64> {
    let thr = cfg.iou_threshold(class);
    let frames: Vec<&String> = b.gts.keys().collect();
    let num_gt: usize = frames
        .iter()
        .map(|f| {
            b.gts[*f].iter().filter(|a| role(a, class, difficulty, &cfg.rules, cfg.ignore_similar_classes) == Role::Counted).count()
        })
        .sum();
    if num_gt == 0 {
        return None;
    }

    // (score, frame, det index)
    let mut ranking: Vec<(f64, usize, usize)> = Vec::new();
    for (fi, f) in frames.iter().enumerate() {
        for (di, d) in b.dets[*f].iter().enumerate() {
            if d.annotation.label == class {
                ranking.push((d.score, fi, di));
            }
        }
    }
    ranking.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut curve: Vec<(f64, f64)> = Vec::new();
    for k in 1..=ranking.len() {
        let mut taken: Vec<Vec<bool>> = frames.iter().map(|f| vec![false; b.gts[*f].len()]).collect();
        let (mut tp, mut fp) = (0usize, 0usize);
        let mut last_discarded = false;
        for &(_, fi, di) in &ranking[..k] {
            let gts = &b.gts[frames[fi]];
            let det = &b.dets[frames[fi]][di].annotation;
            let calib = &b.calibs[frames[fi]];
            let mut best: Option<usize> = None;
            let mut best_iou = -1.0;
            for (gi, g) in gts.iter().enumerate() {
                if taken[fi][gi] || role(g, class, difficulty, &cfg.rules, cfg.ignore_similar_classes) != Role::Counted {
                    continue;
                }
                let o = overlap(metric, det, g, calib);
                if o >= thr && o > best_iou {
                    best = Some(gi);
                    best_iou = o;
                }
            }
            last_discarded = false;
            if let Some(gi) = best {
                taken[fi][gi] = true;
                tp += 1;
            } else if gts.iter().any(|g| {
                role(g, class, difficulty, &cfg.rules, cfg.ignore_similar_classes) == Role::Ignored
                    && overlap(metric, det, g, calib) >= thr
            }) {
                last_discarded = true;
            } else {
                fp += 1;
            }
        }
        if !last_discarded {
            curve.push((tp as f64 / num_gt as f64, tp as f64 / (tp + fp) as f64));
        }
    }

    let samples: Vec<f64> = match cfg.mode {
        ApMode::Interp11 => (0..=10).map(|k| k as f64 / 10.0).collect(),
        ApMode::Interp40 => (1..=40).map(|k| k as f64 / 40.0).collect(),
    };
    let mut sum = 0.0;
    for &r in &samples {
        sum += curve.iter().filter(|p| p.0 >= r).map(|p| p.1).fold(0.0, f64::max);
    }
    Some(sum / samples.len() as f64)
}

/// Brute-force anchor labelling from the full IoU matrix.
pub fn oracle_assign(anchors: &[Box3D], gts: &[Box3D], pos: f64, neg: f64) -> Vec<AnchorStatus> {
    if gts.is_empty() {
        return vec![AnchorStatus::Negative; anchors.len()];
    }
    let iou: Vec<Vec<f64>> = anchors.iter().map(|a| gts.iter().map(|g| rotated_iou_bev(a, g)).collect()).collect();
    // each gt's favourite anchor: max IoU, first index on ties, only if IoU > 0
    let favourite: Vec<Option<usize>> = (0..gts.len())
        .map(|g| {
            let best = (0..anchors.len()).map(|a| iou[a][g]).fold(0.0, f64::max);
            if best > 0.0 {
                (0..anchors.len()).find(|&a| iou[a][g] == best)
            } else {
                None
            }
        })
        .collect();
    (0..anchors.len())
        .map(|a| {
            if let Some(g) = (0..gts.len()).rev().find(|&g| favourite[g] == Some(a)) {
                return AnchorStatus::Positive(g);
            }
            let best = iou[a].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let g = iou[a].iter().position(|&v| v == best).unwrap();
            if best >= pos {
                AnchorStatus::Positive(g)
            } else if best < neg {
                AnchorStatus::Negative
            } else {
                AnchorStatus::Ignore
            }
        })
        .collect()
}

/// Monte-Carlo BEV IoU over `samples` uniform points in the union's bounding box.
pub fn monte_carlo_iou<R: Rng>(a: &Box3D, b: &Box3D, samples: usize, rng: &mut R) -> f64 {
    let inside = |bx: &Box3D, x: f64, y: f64| {
        let (s, c) = bx.yaw.sin_cos();
        let (dx, dy) = (x - bx.center[0], y - bx.center[1]);
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        u.abs() <= bx.dims[0] / 2.0 && v.abs() <= bx.dims[1] / 2.0
    };
    let r = |bx: &Box3D| 0.5 * bx.dims[0].hypot(bx.dims[1]);
    let lo_x = (a.center[0] - r(a)).min(b.center[0] - r(b));
    let hi_x = (a.center[0] + r(a)).max(b.center[0] + r(b));
    let lo_y = (a.center[1] - r(a)).min(b.center[1] - r(b));
    let hi_y = (a.center[1] + r(a)).max(b.center[1] + r(b));
    let (mut inter, mut union) = (0usize, 0usize);
    for _ in 0..samples {
        let x = rng.gen_range(lo_x..hi_x);
        let y = rng.gen_range(lo_y..hi_y);
        let (ia, ib) = (inside(a, x, y), inside(b, x, y));
        inter += (ia && ib) as usize;
        union += (ia || ib) as usize;
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Uniform cloud over a box slightly larger than the default grids.
pub fn random_cloud<R: Rng>(n: usize, rng: &mut R) -> PointCloud {
    let points = (0..n)
        .map(|_| {
            Point::new(
                rng.gen_range(-5.0..75.0),
                rng.gen_range(-45.0..45.0),
                rng.gen_range(-3.5..1.5),
                rng.gen_range(0.0..=1.0),
            )
        })
        .collect();
    PointCloud::new(points).unwrap()
}

pub fn random_box<R: Rng>(rng: &mut R) -> Box3D {
    Box3D::lidar(
        [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0)],
        [rng.gen_range(0.5..5.0), rng.gen_range(0.5..3.0), rng.gen_range(0.5..2.5)],
        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    )
    .unwrap()
}

/// Largest |sum of offsets| over pillars and channels 4..6, relative to the
/// summed magnitudes (floored at one cell so single points are judged absolutely).
pub fn worst_offset_sum(pt: &PillarTensor, cell: f64) -> f64 {
    let mut worst = 0.0f64;
    for slot in 0..pt.num_nonempty {
        for d in 4..7 {
            let vals: Vec<f64> = (0..pt.counts[slot] as usize).map(|n| pt.features[[d, slot, n]] as f64).collect();
            let sum: f64 = vals.iter().sum();
            let scale: f64 = vals.iter().map(|v| v.abs()).sum::<f64>().max(cell);
            worst = worst.max(sum.abs() / scale);
        }
    }
    worst
}

pub fn in_cell(pt: &PillarTensor, cfg: &PillarConfig) -> bool {
    let (dx, dy) = cfg.pillar_size;
    (0..pt.num_nonempty).all(|slot| {
        let [ix, iy] = pt.pillar_coords[slot];
        let x0 = cfg.x_range.0 + ix as f64 * dx;
        let y0 = cfg.y_range.0 + iy as f64 * dy;
        (0..pt.counts[slot] as usize).all(|n| {
            let (x, y, z) = (pt.features[[0, slot, n]] as f64, pt.features[[1, slot, n]] as f64, pt.features[[2, slot, n]] as f64);
            // bucketing divides, the bound check multiplies: allow that rounding
            x >= x0 - 1e-9 && x < x0 + dx + 1e-9 && y >= y0 - 1e-9 && y < y0 + dy + 1e-9
                && z >= cfg.z_range.0 && z < cfg.z_range.1
        })
    })
}

pub fn random_weights(c_in: usize, c_out: usize, rng: &mut ChaCha8Rng) -> VfeWeights {
    let half = c_out / 2;
    let mut w = VfeWeights::from_linear(
        Array2::from_shape_fn((c_in, half), |_| rng.gen_range(-1.0..1.0)),
        Array1::from_shape_fn(half, |_| rng.gen_range(-0.2..0.2)),
        1e-3,
    )
    .unwrap();
    w.bn_scale = Array1::from_shape_fn(half, |_| rng.gen_range(0.5..1.5));
    w.bn_shift = Array1::from_shape_fn(half, |_| rng.gen_range(-0.1..0.1));
    w.bn_mean = Array1::from_shape_fn(half, |_| rng.gen_range(-0.1..0.1));
    w.bn_var = Array1::from_shape_fn(half, |_| rng.gen_range(0.5..2.0));
    w
}

/// Fixed three-voxel instance with the loss `sum(upstream * vfe_layer(f))`.
pub fn gradient_check() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let w = random_weights(7, 8, &mut rng);
    let f = Array3::from_shape_fn((3, 4, 7), |_| rng.gen_range(-1.0..1.0));
    let counts = [4u32, 2, 3];
    let up = Array3::from_shape_fn((3, 4, 8), |_| rng.gen_range(-1.0..1.0));
    let loss = |f: &Array3<f64>| (&vfe_layer(f.view(), &counts, &w).unwrap() * &up).sum();
    let grad = vfe_input_gradient(f.view(), &counts, &w, up.view()).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for v in 0..3 {
        for p in 0..counts[v] as usize {
            for c in 0..7 {
                let (mut a, mut b) = (f.clone(), f.clone());
                a[[v, p, c]] += h;
                b[[v, p, c]] -= h;
                let fd = (loss(&a) - loss(&b)) / (2.0 * h);
                let g = grad[[v, p, c]];
                worst = worst.max((fd - g).abs() / fd.abs().max(g.abs()).max(1e-3));
            }
        }
    }
    worst
}

pub fn round6(v: f64) -> f64 {
    format!("{v:.6}").parse().unwrap()
}

pub fn random_detection(rng: &mut ChaCha8Rng) -> Detection {
    let classes = [ObjectClass::Car, ObjectClass::Pedestrian, ObjectClass::Cyclist, ObjectClass::Van];
    let left = round6(rng.gen_range(0.0..1200.0));
    let top = round6(rng.gen_range(0.0..370.0));
    Detection {
        annotation: Annotation {
            label: classes[rng.gen_range(0..classes.len())],
            truncated: -1.0,
            occluded: -1,
            alpha: round6(rng.gen_range(-3.14..3.14)),
            bbox2d: [left, top, round6(left + rng.gen_range(0.0..200.0)), round6(top + rng.gen_range(0.0..200.0))],
            dims: [round6(rng.gen_range(0.5..3.0)), round6(rng.gen_range(0.3..2.5)), round6(rng.gen_range(0.3..6.0))],
            location: [round6(rng.gen_range(-30.0..30.0)), round6(rng.gen_range(0.0..3.0)), round6(rng.gen_range(1.0..80.0))],
            rotation_y: round6(rng.gen_range(-3.14..3.14)),
        },
        score: round6(rng.gen_range(0.0..1.0)),
    }
}

/// Anchors on a small grid plus gts near them, so matches and force-matches both occur.
pub fn random_assignment_instance(rng: &mut ChaCha8Rng) -> (Vec<Box3D>, Vec<Box3D>) {
    let n_anchor = rng.gen_range(1..=50);
    let anchors = (0..n_anchor)
        .map(|i| {
            let (x, y) = ((i % 10) as f64 * 1.0, (i / 10) as f64 * 1.0);
            Box3D::lidar([x, y, 0.0], [3.9, 1.6, 1.5], if i % 2 == 0 { 0.0 } else { std::f64::consts::FRAC_PI_2 }).unwrap()
        })
        .collect();
    let n_gt = rng.gen_range(0..=5);
    let gts = (0..n_gt)
        .map(|_| {
            Box3D::lidar(
                [rng.gen_range(-2.0..12.0), rng.gen_range(-2.0..7.0), 0.0],
                [rng.gen_range(0.5..5.0), rng.gen_range(0.4..2.0), 1.5],
                rng.gen_range(-3.2..3.2),
            )
            .unwrap()
        })
        .collect();
    (anchors, gts)
}
