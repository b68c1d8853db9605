//! Readers and writers for the KITTI object-detection file formats.
//!
//! * velodyne scans: packed little-endian `f32` quadruples `x y z r`
//! * `label_2` files: 15 whitespace-separated fields per object
//! * result files: the label fields followed by a confidence score
//! * `calib` files: named rows of row-major matrix entries

mod calib;
mod cloud;
mod label;

pub use calib::{parse_calib, write_calib, Calibration};
pub use cloud::{parse_point_cloud, serialize_point_cloud, Point, PointCloud};
pub use label::{
    parse_detections, parse_labels, write_detections, write_labels, Annotation, Detection,
    ObjectClass,
};
