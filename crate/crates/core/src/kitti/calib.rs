use std::fmt::Write as _;

use nalgebra::{Matrix3, Matrix3x4, Point3, Vector3};

use crate::error::{Error, Result};

const P2: &str = "P2";
const R0_RECT: &str = "R0_rect";
const TR_VELO_TO_CAM: &str = "Tr_velo_to_cam";

/// Per-frame sensor calibration.
///
/// A LiDAR point maps to rectified camera coordinates as
/// `r0_rect * (tr_velo_to_cam * [x y z 1]^T)` and to pixels through `p2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub p2: Matrix3x4<f64>,
    pub r0_rect: Matrix3<f64>,
    pub tr_velo_to_cam: Matrix3x4<f64>,
}

impl Calibration {
    /// Identity rectification and extrinsics with `p2 = [I | 0]`.
    pub fn identity() -> Self {
        Calibration {
            p2: Matrix3x4::identity(),
            r0_rect: Matrix3::identity(),
            tr_velo_to_cam: Matrix3x4::identity(),
        }
    }

    /// Checks the properties real calibrations have: orthonormal
    /// rectification (within 1e-3) and a positive focal length.
    pub fn check(&self) -> Result<()> {
        if self.p2.iter().chain(self.r0_rect.iter()).chain(self.tr_velo_to_cam.iter()).any(|v| !v.is_finite()) {
            return Err(Error::MalformedCalib("non-finite entry".into()));
        }
        let gram = self.r0_rect.transpose() * self.r0_rect;
        let dev = (gram - Matrix3::identity()).abs().max();
        if dev > 1e-3 {
            return Err(Error::MalformedCalib(format!(
                "R0_rect is not orthonormal (max deviation {dev:.3e})"
            )));
        }
        if self.p2[(0, 0)] <= 0.0 {
            return Err(Error::MalformedCalib("P2 focal length is not positive".into()));
        }
        Ok(())
    }

    /// LiDAR frame to rectified camera frame.
    pub fn lidar_to_camera(&self, p: &Point3<f64>) -> Point3<f64> {
        let cam = self.tr_velo_to_cam.fixed_view::<3, 3>(0, 0) * p.coords
            + self.tr_velo_to_cam.column(3);
        Point3::from(self.r0_rect * cam)
    }

    /// Rectified camera frame back to the LiDAR frame.
    pub fn camera_to_lidar(&self, p: &Point3<f64>) -> Result<Point3<f64>> {
        let r0_inv = self.r0_rect.try_inverse().ok_or(Error::SingularCalibration)?;
        let rot: Matrix3<f64> = self.tr_velo_to_cam.fixed_view::<3, 3>(0, 0).into();
        let rot_inv = rot.try_inverse().ok_or(Error::SingularCalibration)?;
        let t: Vector3<f64> = self.tr_velo_to_cam.column(3).into();
        Ok(Point3::from(rot_inv * (r0_inv * p.coords - t)))
    }
}

fn find_row<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|line| {
        let (name, rest) = line.split_once(':')?;
        (name.trim() == key).then_some(rest)
    })
}

fn row_values(text: &str, key: &str, expected: usize) -> Result<Vec<f64>> {
    let rest = find_row(text, key).ok_or_else(|| Error::MissingCalibEntry(key.to_string()))?;
    let values = rest
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::MalformedCalib(format!("{key}: `{t}` is not a finite number")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::MalformedCalib(format!(
            "{key}: expected {expected} values, found {}",
            values.len()
        )));
    }
    Ok(values)
}

/// Parses a KITTI object `calib` file. Rows other than `P2`, `R0_rect` and
/// `Tr_velo_to_cam` are ignored.
pub fn parse_calib(text: &str) -> Result<Calibration> {
    let p2 = row_values(text, P2, 12)?;
    let r0 = row_values(text, R0_RECT, 9)?;
    let tr = row_values(text, TR_VELO_TO_CAM, 12)?;
    Ok(Calibration {
        p2: Matrix3x4::from_row_slice(&p2),
        r0_rect: Matrix3::from_row_slice(&r0),
        tr_velo_to_cam: Matrix3x4::from_row_slice(&tr),
    })
}

/// Writes the three rows this crate uses, row-major, in a lossless float format.
pub fn write_calib(calib: &Calibration) -> String {
    fn row<const R: usize, const C: usize>(
        out: &mut String,
        key: &str,
        m: &nalgebra::SMatrix<f64, R, C>,
    ) {
        out.push_str(key);
        out.push(':');
        for r in 0..R {
            for c in 0..C {
                let _ = write!(out, " {:e}", m[(r, c)]);
            }
        }
        out.push('\n');
    }
    let mut out = String::new();
    row(&mut out, P2, &calib.p2);
    row(&mut out, R0_RECT, &calib.r0_rect);
    row(&mut out, TR_VELO_TO_CAM, &calib.tr_velo_to_cam);
    out
}
