use nalgebra::Point3;
use ndarray::{s, Array3, ArrayView3};

use super::VoxelGrid;
use crate::geometry::project_point;
use crate::kitti::Calibration;

/// Appends an image feature vector to every valid point.
///
/// `feat_map` has shape `C x H x W` (16 channels for the fused model). Each
/// point's raw `(x, y, z)` is taken to the camera frame, projected through
/// `P2` and the nearest pixel's vector is appended; points behind the camera
/// or off the image get zeros. The first seven channels are copied unchanged.
pub fn append_image_features(vg: &VoxelGrid, feat_map: ArrayView3<'_, f32>, calib: &Calibration) -> VoxelGrid {
    let (c_img, img_h, img_w) = feat_map.dim();
    let (k, t, f_in) = vg.point_features.dim();
    let mut features = Array3::<f64>::zeros((k, t, f_in + c_img));
    features.slice_mut(s![.., .., ..f_in]).assign(&vg.point_features);

    for v in 0..k {
        for p in 0..vg.counts[v] as usize {
            let lidar = Point3::new(
                vg.point_features[[v, p, 0]],
                vg.point_features[[v, p, 1]],
                vg.point_features[[v, p, 2]],
            );
            let Some(px) = project_point(&calib.lidar_to_camera(&lidar), calib) else { continue };
            let (u, row) = ((px.u + 0.5).floor(), (px.v + 0.5).floor());
            if !(u >= 0.0 && row >= 0.0 && u < img_w as f64 && row < img_h as f64) {
                continue;
            }
            let (u, row) = (u as usize, row as usize);
            for c in 0..c_img {
                features[[v, p, f_in + c]] = feat_map[[c, row, u]] as f64;
            }
        }
    }

    VoxelGrid { point_features: features, ..vg.clone() }
}
