use std::f64::consts::FRAC_PI_2;

use nalgebra::Point3;

use super::{normalize_angle, Box3D, Frame, ImagePoint};
use crate::error::{Error, Result};
use crate::kitti::{Annotation, Calibration, PointCloud};

/// Maps every point into the rectified camera frame; reflectance is dropped.
pub fn lidar_to_camera(points: &PointCloud, calib: &Calibration) -> Vec<Point3<f64>> {
    points
        .iter()
        .map(|p| calib.lidar_to_camera(&Point3::new(p.x as f64, p.y as f64, p.z as f64)))
        .collect()
}

/// Projects one camera-frame point through `P2`. Points with non-positive
/// depth are not visible and yield `None`.
pub fn project_point(p: &Point3<f64>, calib: &Calibration) -> Option<ImagePoint> {
    if p.z <= 0.0 {
        return None;
    }
    let h = calib.p2 * p.to_homogeneous();
    if h[2] <= 0.0 {
        return None;
    }
    Some(ImagePoint { u: h[0] / h[2], v: h[1] / h[2], depth: p.z })
}

/// Projects camera-frame points, keeping input order among the visible ones.
pub fn project_to_image(points_cam: &[Point3<f64>], calib: &Calibration) -> Vec<ImagePoint> {
    points_cam.iter().filter_map(|p| project_point(p, calib)).collect()
}

/// Converts a camera-frame label into a LiDAR-frame box centered on its
/// geometric center.
pub fn camera_label_to_lidar_box(ann: &Annotation, calib: &Calibration) -> Result<Box3D> {
    if ann.is_dont_care() {
        return Err(Error::NotAPhysicalBox);
    }
    let [h, w, l] = ann.dims;
    let [x, y, z] = ann.location;
    let bottom = calib.camera_to_lidar(&Point3::new(x, y, z))?;
    Box3D::new(
        [bottom.x, bottom.y, bottom.z + 0.5 * h],
        [l, w, h],
        -ann.rotation_y - FRAC_PI_2,
        Frame::Lidar,
    )
}

/// Bottom-face center and heading of a box as a camera label stores them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub location: [f64; 3],
    pub rotation_y: f64,
}

/// Inverse of [`camera_label_to_lidar_box`].
pub fn lidar_box_to_camera_pose(b: &Box3D, calib: &Calibration) -> Result<CameraPose> {
    if b.frame != Frame::Lidar {
        return Err(Error::BadBox("expected a LiDAR-frame box".into()));
    }
    let bottom = Point3::new(b.center[0], b.center[1], b.bottom());
    let cam = calib.lidar_to_camera(&bottom);
    Ok(CameraPose {
        location: [cam.x, cam.y, cam.z],
        rotation_y: normalize_angle(-b.yaw - FRAC_PI_2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kitti::{ObjectClass, Point};
    use nalgebra::{Matrix3, Rotation3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(pts: &[[f32; 3]]) -> PointCloud {
        PointCloud::new(pts.iter().map(|p| Point::new(p[0], p[1], p[2], 0.0)).collect()).unwrap()
    }

    fn random_rigid(rng: &mut ChaCha8Rng) -> Calibration {
        let rot = Rotation3::from_euler_angles(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let r0 = Rotation3::from_euler_angles(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
        let mut calib = Calibration::identity();
        calib.r0_rect = *r0.matrix();
        calib.tr_velo_to_cam.fixed_view_mut::<3, 3>(0, 0).copy_from(rot.matrix());
        for r in 0..3 {
            calib.tr_velo_to_cam[(r, 3)] = rng.gen_range(-2.0..2.0);
        }
        calib
    }

    fn annotation(location: [f64; 3], dims: [f64; 3], ry: f64) -> Annotation {
        Annotation {
            label: ObjectClass::Car,
            truncated: 0.0,
            occluded: 0,
            alpha: 0.0,
            bbox2d: [0.0, 0.0, 10.0, 10.0],
            dims,
            location,
            rotation_y: ry,
        }
    }

    #[test]
    fn identity_and_translation() {
        let out = lidar_to_camera(&cloud(&[[2.0, 4.0, 10.0]]), &Calibration::identity());
        assert_eq!(out, vec![Point3::new(2.0, 4.0, 10.0)]);

        let mut calib = Calibration::identity();
        calib.tr_velo_to_cam[(2, 3)] = 1.0;
        let out = lidar_to_camera(&cloud(&[[0.0, 0.0, 0.0]]), &calib);
        assert_eq!(out, vec![Point3::new(0.0, 0.0, 1.0)]);
    }

    #[test]
    fn rigid_transform_preserves_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let calib = random_rigid(&mut rng);
            let pts: Vec<[f32; 3]> = (0..30)
                .map(|_| [rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-3.0..3.0)])
                .collect();
            let pc = cloud(&pts);
            let cam = lidar_to_camera(&pc, &calib);
            for i in 0..pts.len() {
                for j in 0..i {
                    let a = pc.points()[i];
                    let b = pc.points()[j];
                    let d0 = ((a.x as f64 - b.x as f64).powi(2)
                        + (a.y as f64 - b.y as f64).powi(2)
                        + (a.z as f64 - b.z as f64).powi(2))
                    .sqrt();
                    let d1 = (cam[i] - cam[j]).norm();
                    assert!((d0 - d1).abs() < 1e-9, "{d0} vs {d1}");
                }
            }
        }
    }

    #[test]
    fn projection_examples() {
        let calib = Calibration::identity();
        let got = project_to_image(&[Point3::new(2.0, 4.0, 10.0), Point3::new(1.0, 1.0, -1.0)], &calib);
        assert_eq!(got.len(), 1);
        assert!((got[0].u - 0.2).abs() < 1e-15 && (got[0].v - 0.4).abs() < 1e-15);
        assert_eq!(got[0].depth, 10.0);

        let mut calib = Calibration::identity();
        calib.p2 = nalgebra::Matrix3x4::new(100.0, 0.0, 50.0, 0.0, 0.0, 100.0, 50.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        let got = project_point(&Point3::new(0.0, 0.0, 10.0), &calib).unwrap();
        assert_eq!((got.u, got.v, got.depth), (50.0, 50.0, 10.0));
    }

    #[test]
    fn projection_preserves_order() {
        let pts = [
            Point3::new(1.0, 0.0, 5.0),
            Point3::new(0.0, 0.0, -5.0),
            Point3::new(2.0, 0.0, 4.0),
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(3.0, 0.0, 3.0),
        ];
        let got = project_to_image(&pts, &Calibration::identity());
        let us: Vec<f64> = got.iter().map(|p| p.u).collect();
        assert_eq!(us, vec![0.2, 0.5, 1.0]);
    }

    #[test]
    fn label_half_height_lift() {
        let b = camera_label_to_lidar_box(&annotation([0.0, 0.0, 10.0], [2.0, 1.5, 4.0], 0.0), &Calibration::identity()).unwrap();
        assert_eq!(b.center, [0.0, 0.0, 11.0]);
        assert_eq!(b.dims, [4.0, 1.5, 2.0]);
        assert_eq!(b.frame, Frame::Lidar);
    }

    #[test]
    fn heading_map() {
        let ann = annotation([0.0, 0.0, 10.0], [1.0; 3], -FRAC_PI_2);
        let b = camera_label_to_lidar_box(&ann, &Calibration::identity()).unwrap();
        assert_eq!(b.yaw, 0.0);
        let ann = annotation([0.0, 0.0, 10.0], [1.0; 3], 0.0);
        let b = camera_label_to_lidar_box(&ann, &Calibration::identity()).unwrap();
        assert!((b.yaw + FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn dont_care_is_rejected() {
        let mut ann = annotation([0.0; 3], [1.0; 3], 0.0);
        ann.label = ObjectClass::DontCare;
        assert_eq!(camera_label_to_lidar_box(&ann, &Calibration::identity()), Err(Error::NotAPhysicalBox));
    }

    #[test]
    fn singular_calibration_is_an_error() {
        let mut calib = Calibration::identity();
        calib.r0_rect = Matrix3::zeros();
        let ann = annotation([0.0; 3], [1.0; 3], 0.0);
        assert_eq!(camera_label_to_lidar_box(&ann, &calib), Err(Error::SingularCalibration));
    }

    #[test]
    fn camera_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let calib = crate::kitti::parse_calib(crate::kitti::tests_support::SAMPLE_CALIB).unwrap();
        for i in 0..200 {
            let calib = if i % 2 == 0 { calib.clone() } else { random_rigid(&mut rng) };
            let loc = [rng.gen_range(-20.0..20.0), rng.gen_range(-2.0..3.0), rng.gen_range(1.0..70.0)];
            let dims = [rng.gen_range(0.5..4.0), rng.gen_range(0.5..3.0), rng.gen_range(0.5..12.0)];
            let ry = rng.gen_range(-3.2..3.2);
            let b = camera_label_to_lidar_box(&annotation(loc, dims, ry), &calib).unwrap();
            let pose = lidar_box_to_camera_pose(&b, &calib).unwrap();
            for k in 0..3 {
                assert!((pose.location[k] - loc[k]).abs() < 1e-9);
            }
            assert!(normalize_angle(pose.rotation_y - ry).abs() < 1e-9);
        }
    }
}
