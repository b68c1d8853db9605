//! Bird's-eye-view rasterization: each pixel shows the height of its highest
//! point through a color palette.

mod palettes;

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kitti::PointCloud;

/// Height-to-color lookup tables with 256 entries each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Palette {
    #[default]
    Viridis,
    Turbo,
    Gray,
}

impl Palette {
    pub fn entry(self, index: u8) -> [u8; 3] {
        match self {
            Palette::Viridis => palettes::VIRIDIS[index as usize],
            Palette::Turbo => palettes::TURBO[index as usize],
            Palette::Gray => [index; 3],
        }
    }

    /// Color for `t` in `[0, 1]` (clamped), nearest of the 256 entries.
    pub fn color(self, t: f64) -> [u8; 3] {
        let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
        self.entry((t * 255.0).round() as u8)
    }
}

impl FromStr for Palette {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "viridis" => Ok(Palette::Viridis),
            "turbo" => Ok(Palette::Turbo),
            "gray" => Ok(Palette::Gray),
            _ => Err(format!("unknown palette `{s}` (expected viridis, turbo or gray)")),
        }
    }
}

impl fmt::Display for Palette {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Palette::Viridis => "viridis",
            Palette::Turbo => "turbo",
            Palette::Gray => "gray",
        })
    }
}

/// 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn black(width: usize, height: usize) -> Self {
        RgbImage { width, height, data: vec![0; width * height * 3] }
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = 3 * (row * self.width + col);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = 3 * (row * self.width + col);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn nonzero_pixels(&self) -> usize {
        self.data.chunks_exact(3).filter(|p| p.iter().any(|&c| c != 0)).count()
    }

    /// Binary PPM (`P6`, maxval 255).
    pub fn write_ppm<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "P6\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.data)
    }

    /// Reads the subset of PPM that [`RgbImage::write_ppm`] produces.
    pub fn read_ppm(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::MalformedDump(format!("ppm: {m}"));
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?);
        }
        if fields[0] != "P6" || fields[3] != "255" {
            return Err(bad("only P6 with maxval 255 is supported"));
        }
        let width: usize = fields[1].parse().map_err(|_| bad("width"))?;
        let height: usize = fields[2].parse().map_err(|_| bad("height"))?;
        let data = bytes.get(pos + 1..).ok_or_else(|| bad("missing raster"))?;
        if data.len() != width * height * 3 {
            return Err(bad("raster size does not match header"));
        }
        Ok(RgbImage { width, height, data: data.to_vec() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BevConfig {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub z_range: (f64, f64),
    /// Meters per pixel.
    pub resolution: f64,
    pub palette: Palette,
}

impl Default for BevConfig {
    fn default() -> Self {
        BevConfig {
            x_range: (0.0, 70.0),
            y_range: (-40.0, 40.0),
            z_range: (-2.5, 1.0),
            resolution: 0.1,
            palette: Palette::Viridis,
        }
    }
}

impl BevConfig {
    /// `(rows, cols)`: `ceil(x span / res)` rows, `ceil(y span / res)` columns.
    pub fn image_shape(&self) -> Result<(usize, usize)> {
        for (name, (lo, hi)) in [("x", self.x_range), ("y", self.y_range), ("z", self.z_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::BadConfig(format!("{name} range ({lo}, {hi}) is empty")));
            }
        }
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(Error::BadConfig(format!("resolution {} must be positive", self.resolution)));
        }
        let rows = ((self.x_range.1 - self.x_range.0) / self.resolution).ceil() as usize;
        let cols = ((self.y_range.1 - self.y_range.0) / self.resolution).ceil() as usize;
        Ok((rows, cols))
    }
}

/// Renders the cloud from above with +x (forward) up and +y (left) to the
/// left. Points must satisfy `x` in `[x_min, x_max)`, `y` in `[y_min, y_max)`
/// and `z` in `[z_min, z_max]`. Each pixel takes the highest point's
/// normalized height; equal heights go to the later point. Empty pixels are
/// black.
pub fn rasterize_bev(pc: &PointCloud, cfg: &BevConfig) -> Result<RgbImage> {
    let (rows, cols) = cfg.image_shape()?;
    let (x0, x1) = cfg.x_range;
    let (y0, y1) = cfg.y_range;
    let (z0, z1) = cfg.z_range;
    let mut top = vec![f64::NEG_INFINITY; rows * cols];
    for p in pc {
        let (x, y, z) = (p.x as f64, p.y as f64, p.z as f64);
        if !(x >= x0 && x < x1 && y >= y0 && y < y1 && z >= z0 && z <= z1) {
            continue;
        }
        let row = (((x1 - x) / cfg.resolution).floor() as usize).min(rows - 1);
        let col = (((y1 - y) / cfg.resolution).floor() as usize).min(cols - 1);
        let cell = &mut top[row * cols + col];
        if z >= *cell {
            *cell = z;
        }
    }

    let mut img = RgbImage::black(cols, rows);
    for (i, z) in top.iter().enumerate() {
        if z.is_finite() {
            img.put(i / cols, i % cols, cfg.palette.color((z - z0) / (z1 - z0)));
        }
    }
    Ok(img)
}
