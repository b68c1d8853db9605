use std::cmp::Ordering;

use super::Box3D;

/// Intersections smaller than this are treated as empty.
const AREA_EPS: f64 = 1e-12;

type P2 = [f64; 2];

fn cross(o: P2, a: P2, b: P2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Absolute shoelace area.
pub fn polygon_area(poly: &[P2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum();
    0.5 * twice.abs()
}

/// Sutherland-Hodgman: clips `subject` against the convex, counter-clockwise `clip`.
fn clip_convex(subject: &[P2], clip: &[P2]) -> Vec<P2> {
    let mut output = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let (c0, c1) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut output);
        let side = |p: P2| cross(c0, c1, p);
        let mut prev = *input.last().unwrap();
        let mut prev_side = side(prev);
        for &cur in &input {
            let cur_side = side(cur);
            let cur_in = cur_side >= 0.0;
            if cur_in != (prev_side >= 0.0) {
                let t = prev_side / (prev_side - cur_side);
                output.push([prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])]);
            }
            if cur_in {
                output.push(cur);
            }
            prev = cur;
            prev_side = cur_side;
        }
    }
    output
}

fn box_key(b: &Box3D) -> [f64; 7] {
    [b.center[0], b.center[1], b.center[2], b.dims[0], b.dims[1], b.dims[2], b.yaw]
}

/// Puts the pair in a canonical order so that `f(a, b)` and `f(b, a)`
/// perform bit-identical arithmetic.
fn ordered<'a>(a: &'a Box3D, b: &'a Box3D) -> (&'a Box3D, &'a Box3D) {
    let (ka, kb) = (box_key(a), box_key(b));
    let swap = ka
        .iter()
        .zip(&kb)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        == Some(Ordering::Greater);
    if swap {
        (b, a)
    } else {
        (a, b)
    }
}

fn footprint_intersection(a: &Box3D, b: &Box3D) -> f64 {
    let area = polygon_area(&clip_convex(&a.footprint(), &b.footprint()));
    if area < AREA_EPS {
        0.0
    } else {
        area
    }
}

/// Bird's-eye-view IoU of the rotated footprints.
///
/// # Panics
///
/// If the boxes are in different frames.
pub fn rotated_iou_bev(a: &Box3D, b: &Box3D) -> f64 {
    assert_eq!(a.frame, b.frame, "boxes must share a frame");
    let (a, b) = ordered(a, b);
    let inter = footprint_intersection(a, b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.length() * a.width() + b.length() * b.width() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Volumetric IoU: footprint intersection times vertical overlap.
///
/// # Panics
///
/// If the boxes are in different frames.
pub fn iou_3d(a: &Box3D, b: &Box3D) -> f64 {
    assert_eq!(a.frame, b.frame, "boxes must share a frame");
    let (a, b) = ordered(a, b);
    let overlap = a.top().min(b.top()) - a.bottom().max(b.bottom());
    if overlap <= 0.0 {
        return 0.0;
    }
    let inter = footprint_intersection(a, b) * overlap;
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}
