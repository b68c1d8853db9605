//! LiDAR 3D object detection toolkit.
//!
//! Everything in a KITTI-style detection pipeline that does not need learned
//! weights: point-cloud and label I/O, frame transforms and rotated-box
//! geometry, pillar and voxel encoders, anchor targets and losses, BEV
//! rasterization, and the KITTI average-precision evaluation.

pub mod bev;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod kitti;
pub mod pillar;
pub mod targets;
pub mod voxel;

pub use error::{Error, Result};
pub use geometry::{Box3D, Frame, ImagePoint};
pub use kitti::{Annotation, Calibration, Detection, ObjectClass, Point, PointCloud};
