//! Frame transforms, oriented boxes, rotated IoU and NMS.
//!
//! Conventions: the LiDAR frame is x-forward, y-left, z-up with yaw measured
//! counter-clockwise from +x. The rectified camera frame is x-right, y-down,
//! z-forward and KITTI's `rotation_y` turns about its y axis. The two headings
//! relate by `yaw = -rotation_y - pi/2`.

mod iou;
mod nms;
mod transform;

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub use iou::{iou_3d, polygon_area, rotated_iou_bev};
pub use nms::nms_rotated;
pub use transform::{
    camera_label_to_lidar_box, lidar_box_to_camera_pose, lidar_to_camera, project_point,
    project_to_image, CameraPose,
};

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let r = a - two_pi * ((a - PI) / two_pi).ceil();
    // rounding in the quotient can leave r one ulp outside the interval
    if r <= -PI {
        r + two_pi
    } else if r > PI {
        r - two_pi
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    Lidar,
    Camera,
}

/// An oriented box with `dims = (l, w, h)`; `l` runs along the heading.
///
/// Corner and overlap routines treat the box as z-up with `yaw` turning
/// about +z, which is the LiDAR convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    pub center: [f64; 3],
    pub dims: [f64; 3],
    pub yaw: f64,
    pub frame: Frame,
}

impl Box3D {
    /// Validates positive dimensions and a finite center; wraps `yaw` into `(-pi, pi]`.
    pub fn new(center: [f64; 3], dims: [f64; 3], yaw: f64, frame: Frame) -> Result<Self> {
        if center.iter().any(|c| !c.is_finite()) || !yaw.is_finite() {
            return Err(Error::BadBox(format!("non-finite center {center:?} or yaw {yaw}")));
        }
        if dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::BadBox(format!("dimensions {dims:?} must be positive")));
        }
        Ok(Box3D { center, dims, yaw: normalize_angle(yaw), frame })
    }

    pub fn lidar(center: [f64; 3], dims: [f64; 3], yaw: f64) -> Result<Self> {
        Box3D::new(center, dims, yaw, Frame::Lidar)
    }

    pub fn length(&self) -> f64 {
        self.dims[0]
    }

    pub fn width(&self) -> f64 {
        self.dims[1]
    }

    pub fn height(&self) -> f64 {
        self.dims[2]
    }

    pub fn volume(&self) -> f64 {
        self.dims.iter().product()
    }

    pub fn bottom(&self) -> f64 {
        self.center[2] - 0.5 * self.height()
    }

    pub fn top(&self) -> f64 {
        self.center[2] + 0.5 * self.height()
    }

    /// Footprint rectangle in the xy plane, counter-clockwise seen from +z.
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw.sin_cos();
        let (hl, hw) = (0.5 * self.length(), 0.5 * self.width());
        [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(dx, dy)| {
            [self.center[0] + c * dx - s * dy, self.center[1] + s * dx + c * dy]
        })
    }
}

/// The eight corners: bottom face counter-clockwise seen from +z starting at
/// the front-left corner, then the top face in the same order.
pub fn box_corners(b: &Box3D) -> [[f64; 3]; 8] {
    let fp = b.footprint();
    let (lo, hi) = (b.bottom(), b.top());
    std::array::from_fn(|i| {
        let [x, y] = fp[i % 4];
        [x, y, if i < 4 { lo } else { hi }]
    })
}

/// A LiDAR point projected onto the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}
