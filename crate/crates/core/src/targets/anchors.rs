use std::f64::consts::FRAC_PI_2;

use crate::error::Result;
use crate::geometry::Box3D;

/// Placement of one class's anchors over a BEV grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSpec {
    /// Cells along x.
    pub grid_width: usize,
    /// Cells along y.
    pub grid_height: usize,
    /// `(w, l, h)` of the class template.
    pub size: (f64, f64, f64),
    pub z_center: f64,
    /// Cell edge in meters.
    pub stride: f64,
    /// Grid corner `(x, y)`; the origin by default.
    pub origin: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorGrid {
    /// Row-major over `(iy, ix)`, two headings (0, then pi/2) per cell.
    pub anchors: Vec<Box3D>,
}

impl AnchorGrid {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// Two anchors per cell centered at `origin + (i + 0.5) * stride`.
pub fn generate_anchors(spec: &AnchorSpec) -> Result<AnchorGrid> {
    let (w, l, h) = spec.size;
    let mut anchors = Vec::with_capacity(spec.grid_width * spec.grid_height * 2);
    for iy in 0..spec.grid_height {
        for ix in 0..spec.grid_width {
            let x = spec.origin.0 + (ix as f64 + 0.5) * spec.stride;
            let y = spec.origin.1 + (iy as f64 + 0.5) * spec.stride;
            for yaw in [0.0, FRAC_PI_2] {
                anchors.push(Box3D::lidar([x, y, spec.z_center], [l, w, h], yaw)?);
            }
        }
    }
    Ok(AnchorGrid { anchors })
}
