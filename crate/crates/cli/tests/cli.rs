#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use lidarpipe::eval::{Difficulty, EvalConfig, Metric, BENCHMARK_CLASSES};
use lidarpipe::kitti::serialize_point_cloud;
use lidarpipe::{ObjectClass, Point, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn lidarpipe(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_lidarpipe"))
        .args(args)
        .env_remove("LIDARPIPE_DATA")
        .output()
        .unwrap();
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn ok(args: &[&str]) -> String {
    let out = lidarpipe(args);
    assert_eq!(out.code, 0, "lidarpipe {args:?} failed: {}", out.stderr);
    out.stdout
}

fn synthetic() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/synthetic")
}

fn data_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(rel)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const LABEL_LINES: [&str; 4] = [
    "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59",
    "Pedestrian 0.00 0 0.21 423.17 173.67 433.17 224.03 1.60 0.38 0.30 -5.77 1.61 23.19 -0.03",
    "Cyclist 0.00 1 -2.60 700.00 170.00 730.00 230.00 1.70 0.60 1.80 3.00 1.65 25.00 -2.50",
    "DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10",
];

/// Writes a dataset with the given labels and random clouds.
fn dataset(frames: &[(&str, Vec<&str>, usize)]) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["velodyne", "label_2", "calib"] {
        fs::create_dir(dir.path().join(sub)).unwrap();
    }
    let calib = fs::read_to_string(data_file("synthetic/calib/000000.txt")).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(frames.len() as u64);
    for (id, labels, points) in frames {
        let cloud = common::random_cloud(*points, &mut rng);
        fs::write(dir.path().join(format!("velodyne/{id}.bin")), serialize_point_cloud(&cloud)).unwrap();
        fs::write(dir.path().join(format!("label_2/{id}.txt")), labels.join("\n") + "\n").unwrap();
        fs::write(dir.path().join(format!("calib/{id}.txt")), &calib).unwrap();
    }
    dir
}

fn histogram(stdout: &str) -> BTreeMap<String, usize> {
    stdout
        .lines()
        .skip(1)
        .map(|l| {
            let (name, n) = l.rsplit_once(' ').unwrap();
            (name.trim().to_string(), n.trim().parse().unwrap())
        })
        .collect()
}

#[test]
fn inspect_reports_label_counts() {
    let car = LABEL_LINES[0];
    let ds = dataset(&[("000000", vec![car, car, car, LABEL_LINES[1]], 100)]);
    let out = ok(&["--data", s(ds.path()), "inspect", "0"]);
    assert!(out.contains("points: 100"), "{out}");
    assert!(out.contains("labels: 4 (Car 3, Pedestrian 1)"), "{out}");
    let h = histogram(&ok(&["--data", s(ds.path()), "inspect", "--counts"]));
    assert_eq!(h["Car"], 3);
    assert_eq!(h["Pedestrian"], 1);
    assert_eq!(h["total"], 4);
}

#[test]
fn histogram_matches_line_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let frames: Vec<(String, Vec<&str>, usize)> = (0..10)
        .map(|i| {
            let labels = (0..rng.gen_range(0..8)).map(|_| LABEL_LINES[rng.gen_range(0..4)]).collect();
            (format!("{i:06}"), labels, 10)
        })
        .collect();
    let refs: Vec<(&str, Vec<&str>, usize)> = frames.iter().map(|(a, b, c)| (a.as_str(), b.clone(), *c)).collect();
    let ds = dataset(&refs);
    let split = ds.path().join("split.txt");
    fs::write(&split, "# all frames\n0\n1\n2\n3\n4\n5\n6\n7\n8\n9\n").unwrap();
    let h = histogram(&ok(&["--data", s(ds.path()), "inspect", "--counts", "--split", s(&split)]));

    // grep-style recount of the first token of every label line
    let mut oracle: BTreeMap<String, usize> = BTreeMap::new();
    for entry in fs::read_dir(ds.path().join("label_2")).unwrap() {
        for line in fs::read_to_string(entry.unwrap().path()).unwrap().lines().filter(|l| !l.is_empty()) {
            *oracle.entry(line.split(' ').next().unwrap().to_string()).or_default() += 1;
        }
    }
    for class in ObjectClass::ALL {
        assert_eq!(h[class.display_name()], oracle.get(class.as_str()).copied().unwrap_or(0), "{class}");
    }
    assert_eq!(h["total"], oracle.values().sum::<usize>());

    // additivity over two disjoint halves
    let half = |ids: &str| {
        let f = ds.path().join("half.txt");
        fs::write(&f, ids).unwrap();
        histogram(&ok(&["--data", s(ds.path()), "inspect", "--counts", "--split", s(&f)]))
    };
    let (a, b) = (half("0\n1\n2\n3\n4\n"), half("5\n6\n7\n8\n9\n"));
    for (k, v) in &h {
        assert_eq!(a[k] + b[k], *v);
    }
}

#[test]
fn missing_inputs_exit_with_two() {
    let ds = dataset(&[("000000", vec![], 10)]);
    let out = lidarpipe(&["--data", s(ds.path()), "inspect", "000042"]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("000042"), "{}", out.stderr);
    assert_eq!(lidarpipe(&["inspect"]).code, 2);
    assert_eq!(lidarpipe(&["--data", "/nonexistent/kitti", "bev"]).code, 2);
    assert_eq!(lidarpipe(&["no-such-command"]).code, 2);
    fs::remove_file(ds.path().join("calib/000000.txt")).unwrap();
    let out = lidarpipe(&["--data", s(ds.path()), "--out", s(&ds.path().join("o")), "project"]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("calib"), "{}", out.stderr);
}

#[test]
fn bad_config_exits_with_two() {
    let ds = dataset(&[("000000", vec![], 10)]);
    let cfg = ds.path().join("bad.toml");
    for text in ["[pillar]\npillar_size = [0.3, 0.16]\n", "[pillar]\nmax_pilars = 3\n", "not toml ["] {
        fs::write(&cfg, text).unwrap();
        let out = lidarpipe(&["--data", s(ds.path()), "--config", s(&cfg), "--out", s(&ds.path().join("o")), "pillars"]);
        assert_eq!(out.code, 2, "{text}: {}", out.stderr);
    }
}

#[test]
fn data_root_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_lidarpipe"))
        .args(["inspect", "0"])
        .env("LIDARPIPE_DATA", synthetic())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("points: 4670"));
}

fn read_u32s(bytes: &[u8], n: usize) -> Vec<u32> {
    (0..n).map(|i| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap())).collect()
}

#[test]
fn pillars_empty_cloud_and_determinism() {
    let ds = dataset(&[("000000", vec![], 0), ("000001", vec![], 3000)]);
    let out_dir = ds.path().join("o");
    let cfg = ds.path().join("small.toml");
    fs::write(&cfg, "[pillar]\nmax_pillars = 4000\nmax_points_per_pillar = 8\n").unwrap();
    let args = ["--data", s(ds.path()), "--config", s(&cfg), "--out", s(&out_dir), "pillars"];
    let stdout = ok(&args);
    assert!(stdout.starts_with("000000 points=0 kept=0 nonempty_pillars=0\n"), "{stdout}");
    let empty = fs::read(out_dir.join("pillars/000000.bin")).unwrap();
    assert_eq!(read_u32s(&empty, 3), vec![9, 4000, 8]);
    assert!(empty[12..].iter().all(|&b| b == 0));

    let first = fs::read(out_dir.join("pillars/000001.bin")).unwrap();
    let mut again_args = args.to_vec();
    again_args.extend(["--threads", "1"]);
    assert_eq!(ok(&again_args), stdout);
    assert_eq!(fs::read(out_dir.join("pillars/000001.bin")).unwrap(), first);
}

#[test]
fn pillar_and_voxel_counts_match_recount() {
    let out_dir = tempfile::tempdir().unwrap();
    let data = synthetic();
    let pillars = ok(&["--data", s(&data), "--out", s(out_dir.path()), "pillars", "0"]);
    let voxels = ok(&["--data", s(&data), "--out", s(out_dir.path()), "voxelize", "0"]);

    // independent bucketing of the raw file
    let raw = fs::read(data.join("velodyne/000000.bin")).unwrap();
    let pts: Vec<[f32; 4]> = raw
        .chunks_exact(16)
        .map(|c| std::array::from_fn(|i| f32::from_le_bytes(c[4 * i..4 * i + 4].try_into().unwrap())))
        .collect();
    let mut cells = std::collections::BTreeSet::new();
    let mut voxel_cells = std::collections::BTreeSet::new();
    for [x, y, z, _] in pts {
        let (x, y, z) = (x as f64, y as f64, z as f64);
        if (0.0..69.12).contains(&x) && (-39.68..39.68).contains(&y) && (-3.0..1.0).contains(&z) {
            cells.insert(((x / 0.16).floor() as i64, ((y + 39.68) / 0.16).floor() as i64));
        }
        if (0.0..70.4).contains(&x) && (-40.0..40.0).contains(&y) && (-3.0..1.0).contains(&z) {
            voxel_cells.insert((((z + 3.0) / 0.4).floor() as i64, ((y + 40.0) / 0.2).floor() as i64, (x / 0.2).floor() as i64));
        }
    }
    assert!(pillars.contains(&format!("nonempty_pillars={}\n", cells.len())), "{pillars} vs {}", cells.len());
    assert!(voxels.contains(&format!("nonempty_voxels={} ", voxel_cells.len())), "{voxels} vs {}", voxel_cells.len());

    let dump = fs::read(out_dir.path().join("voxels/000000.bin")).unwrap();
    let header = read_u32s(&dump, 5);
    assert_eq!(header, vec![voxel_cells.len() as u32, 32, 10, 400, 352]);
    assert_eq!(dump.len(), 20 + header[0] as usize * (12 + 4 * 32));
}

#[test]
fn voxelize_with_image_features() {
    let out_dir = tempfile::tempdir().unwrap();
    let maps = out_dir.path().join("maps");
    fs::create_dir(&maps).unwrap();
    let mut bytes = Vec::new();
    for d in [16u32, 4, 5] {
        bytes.extend(d.to_le_bytes());
    }
    for i in 0..16 * 4 * 5 {
        bytes.extend((i as f32).to_le_bytes());
    }
    fs::write(maps.join("000000.bin"), bytes).unwrap();
    let data = synthetic();
    let args = ["--data", s(&data), "--out", s(out_dir.path()), "voxelize", "0", "--image-features", s(&maps)];
    let out = ok(&args);
    assert!(out.contains("channels=32"), "{out}");
    // weights for the LiDAR-only width do not fit the fused rows
    let w = lidarpipe::voxel::VfeWeights::patterned(7, 8).unwrap();
    let wf = out_dir.path().join("w.json");
    fs::write(&wf, serde_json::to_string(&w).unwrap()).unwrap();
    let mut bad = args.to_vec();
    bad.extend(["--weights", s(&wf)]);
    assert_eq!(lidarpipe(&bad).code, 2);
    let fitting = ok(&["--data", s(&data), "--out", s(out_dir.path()), "voxelize", "0", "--weights", s(&wf)]);
    assert!(fitting.contains("channels=8"), "{fitting}");
}

#[test]
fn bev_matches_golden_file() {
    let out_dir = tempfile::tempdir().unwrap();
    let cfg = data_file("golden.toml");
    ok(&["--data", s(&synthetic()), "--config", s(&cfg), "--out", s(out_dir.path()), "bev"]);
    let got = fs::read(out_dir.path().join("bev/000000.ppm")).unwrap();
    assert!(got == fs::read(data_file("golden/bev_000000.ppm")).unwrap(), "BEV image differs from golden file");
}

fn lit_pixels(ppm: &[u8]) -> String {
    let img = lidarpipe::bev::RgbImage::read_ppm(ppm).unwrap();
    let mut text = String::from("# row col r g b of every lit pixel\n");
    for row in 0..img.height {
        for col in 0..img.width {
            let [r, g, b] = img.pixel(row, col);
            if [r, g, b] != [0, 0, 0] {
                text += &format!("{row} {col} {r} {g} {b}\n");
            }
        }
    }
    text
}

#[test]
fn projection_matches_golden_listing() {
    let out_dir = tempfile::tempdir().unwrap();
    let cfg = data_file("golden.toml");
    let stdout = ok(&["--data", s(&synthetic()), "--config", s(&cfg), "--out", s(out_dir.path()), "project"]);
    let got = lit_pixels(&fs::read(out_dir.path().join("project/000000.ppm")).unwrap());
    assert!(got == fs::read_to_string(data_file("golden/project_000000.txt")).unwrap(), "projection differs from golden listing");
    let field = |k: &str| -> usize { stdout.split(' ').find_map(|f| f.trim().strip_prefix(k)).unwrap().parse().unwrap() };
    assert!(field("in_image=") <= field("points="));
}

#[test]
fn empty_cloud_renders_black() {
    let ds = dataset(&[("000000", vec![], 0)]);
    let out_dir = ds.path().join("o");
    ok(&["--data", s(ds.path()), "--out", s(&out_dir), "bev"]);
    ok(&["--data", s(ds.path()), "--out", s(&out_dir), "project", "--width", "64", "--height", "32"]);
    for f in ["bev/000000.ppm", "project/000000.ppm"] {
        let img = lidarpipe::bev::RgbImage::read_ppm(&fs::read(out_dir.join(f)).unwrap()).unwrap();
        assert_eq!(img.nonzero_pixels(), 0);
    }
    let img = lidarpipe::bev::RgbImage::read_ppm(&fs::read(out_dir.join("bev/000000.ppm")).unwrap()).unwrap();
    assert_eq!((img.width, img.height), (800, 700));
}

fn key_values(path: &Path) -> BTreeMap<String, f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .filter(|(k, _)| *k != "mode")
        .map(|(k, v)| (k.to_string(), v.parse().unwrap()))
        .collect()
}

fn mini() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/mini_benchmark")
}

#[test]
fn eval_matches_oracle_on_mini_benchmark() {
    let out_dir = tempfile::tempdir().unwrap();
    let m = mini();
    for mode in ["11", "40"] {
        let stdout = ok(&[
            "--data", s(&m), "--out", s(out_dir.path()), "eval", "--det", s(&m.join("det")), "--mode", mode,
        ]);
        assert!(stdout.contains("BBOX_3D"));
        let kv = key_values(&out_dir.path().join("eval/report.kv"));
        let b = common::load_mini_benchmark();
        let cfg = EvalConfig { mode: mode.parse().unwrap(), ..Default::default() };
        let mut checked = 0;
        for metric in Metric::ALL {
            for class in BENCHMARK_CLASSES {
                for d in Difficulty::ALL {
                    let key = format!("{}.{d}.{}", class.as_str().to_ascii_lowercase(), metric.key());
                    assert_eq!(kv.get(&key).copied(), common::oracle_ap(&b, metric, class, d, &cfg), "{key}");
                    checked += 1;
                }
            }
        }
        assert_eq!(checked, 27);
        assert_eq!(fs::read_to_string(out_dir.path().join("eval/report.txt")).unwrap(), stdout.split_once('\n').unwrap().1);
    }
}

#[test]
fn eval_extremes() {
    let m = mini();
    let tmp = tempfile::tempdir().unwrap();
    // detections identical to the labels
    let det = tmp.path().join("det");
    fs::create_dir(&det).unwrap();
    for entry in fs::read_dir(m.join("label_2")).unwrap() {
        let path = entry.unwrap().path();
        let lines: Vec<String> = fs::read_to_string(&path)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("DontCare"))
            .map(|l| format!("{l} 1.0"))
            .collect();
        fs::write(det.join(path.file_name().unwrap()), lines.join("\n")).unwrap();
    }
    let out = tmp.path().join("o");
    ok(&["--data", s(&m), "--out", s(&out), "eval", "--det", s(&det)]);
    let kv = key_values(&out.join("eval/report.kv"));
    assert!(!kv.is_empty() && kv.values().all(|&v| v == 1.0), "{kv:?}");

    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    ok(&["--data", s(&m), "--out", s(&out), "eval", "--det", s(&empty)]);
    let kv = key_values(&out.join("eval/report.kv"));
    assert!(!kv.is_empty() && kv.values().all(|&v| v == 0.0), "{kv:?}");

    fs::write(empty.join("000099.txt"), "").unwrap();
    let r = lidarpipe(&["--data", s(&m), "--out", s(&out), "eval", "--det", s(&empty)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("000099"), "{}", r.stderr);
}

#[test]
fn bench_sample_counts() {
    let data = synthetic();
    let run = |it: &str, enc: &str| ok(&["--data", s(&data), "bench", "--iterations", it, "--encoder", enc]);
    assert_eq!(run("1", "pillars"), "encoder=Pillars frames=1 iterations=1 samples=1 points=4670\n");
    let two = run("2", "voxels");
    let four = run("4", "voxels");
    assert!(two.contains("samples=2 ") && four.contains("samples=4 "), "{two}{four}");
    assert!(run("1", "bev").contains("points=4670"));
    let out = lidarpipe(&["--data", s(&data), "bench", "--iterations", "1"]);
    assert!(out.stderr.contains("p50=") && out.stderr.contains("p95=") && out.stderr.contains("points/s"));
    assert_eq!(lidarpipe(&["--data", s(&data), "bench", "--iterations", "0"]).code, 2);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let ds = dataset(&[("000000", vec![], 2000), ("000001", vec![], 500), ("000002", vec![], 0), ("000003", vec![], 1500)]);
    let mut seen: Option<(String, Vec<Vec<u8>>)> = None;
    for threads in ["1", "3"] {
        let out_dir = ds.path().join(format!("o{threads}"));
        let mut stdout = String::new();
        for cmd in ["pillars", "voxelize", "bev"] {
            stdout += &ok(&["--data", s(ds.path()), "--out", s(&out_dir), "--threads", threads, cmd]);
        }
        let mut files = Vec::new();
        for sub in ["pillars", "voxels", "bev"] {
            let mut names: Vec<PathBuf> = fs::read_dir(out_dir.join(sub)).unwrap().map(|e| e.unwrap().path()).collect();
            names.sort();
            files.extend(names.iter().map(|p| fs::read(p).unwrap()));
        }
        if let Some((prev_out, prev_files)) = &seen {
            assert_eq!(prev_out, &stdout);
            assert!(prev_files == &files);
        }
        seen = Some((stdout, files));
    }
}

#[test]
fn selfcheck_prints_reference_values() {
    let out = ok(&["selfcheck"]);
    assert!(out.contains("= 0.0433217"));
    assert!(out.contains("total_loss_pfe(1, 1, 1, n_pos=1) = 1.4"));
    assert!(out.contains("= 1.73287"));
}

#[test]
fn clouds_with_bad_values_are_input_errors() {
    let ds = dataset(&[("000000", vec![], 1)]);
    let cloud = PointCloud::new(vec![Point::new(1.0, 1.0, 0.0, 0.5)]).unwrap();
    let mut bytes = serialize_point_cloud(&cloud);
    bytes[12..16].copy_from_slice(&2.0f32.to_le_bytes());
    fs::write(ds.path().join("velodyne/000000.bin"), &bytes).unwrap();
    let r = lidarpipe(&["--data", s(ds.path()), "inspect"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("reflectance"), "{}", r.stderr);
    fs::write(ds.path().join("velodyne/000000.bin"), &bytes[..15]).unwrap();
    assert_eq!(lidarpipe(&["--data", s(ds.path()), "inspect"]).code, 2);
}
