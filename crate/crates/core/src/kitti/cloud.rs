use crate::error::{Error, Result};

const POINT_BYTES: usize = 16;

/// A single LiDAR return in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    /// Reflectance in `[0, 1]`.
    pub r: f32,
}

impl Point {
    pub fn new(x: f32, y: f32, z: f32, r: f32) -> Self {
        Point { x, y, z, r }
    }
}

/// An ordered set of returns, always expressed in the LiDAR frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point>,
}

impl PointCloud {
    /// Builds a cloud, rejecting non-finite coordinates and reflectance outside `[0, 1]`.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            validate_point(i, p)?;
        }
        Ok(PointCloud { points })
    }

    pub fn empty() -> Self {
        PointCloud::default()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.points.iter()
    }
}

impl<'a> IntoIterator for &'a PointCloud {
    type Item = &'a Point;
    type IntoIter = std::slice::Iter<'a, Point>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

fn validate_point(index: usize, p: &Point) -> Result<()> {
    if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite() && p.r.is_finite()) {
        return Err(Error::NonFiniteValue { point: index });
    }
    if !(0.0..=1.0).contains(&p.r) {
        return Err(Error::ReflectanceOutOfRange { point: index, value: p.r });
    }
    Ok(())
}

/// Decodes a velodyne `.bin` scan.
pub fn parse_point_cloud(bytes: &[u8]) -> Result<PointCloud> {
    if bytes.len() % POINT_BYTES != 0 {
        return Err(Error::MalformedCloud(bytes.len()));
    }
    let word = |c: &[u8]| f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
    let points = bytes
        .chunks_exact(POINT_BYTES)
        .map(|c| Point::new(word(&c[0..4]), word(&c[4..8]), word(&c[8..12]), word(&c[12..16])))
        .collect();
    PointCloud::new(points)
}

/// Encodes a cloud in the velodyne `.bin` layout.
pub fn serialize_point_cloud(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * POINT_BYTES);
    for p in cloud {
        for v in [p.x, p.y, p.z, p.r] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_point_hand_packed() {
        // 1.0 = 0x3f800000, 2.0 = 0x40000000, 3.0 = 0x40400000, 0.5 = 0x3f000000
        let bytes = [
            0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0x40, 0x00, 0x00, 0x40, 0x40, 0x00, 0x00,
            0x00, 0x3f,
        ];
        let pc = parse_point_cloud(&bytes).unwrap();
        assert_eq!(pc.points(), &[Point::new(1.0, 2.0, 3.0, 0.5)]);
    }

    #[test]
    fn empty_and_misaligned() {
        assert!(parse_point_cloud(&[]).unwrap().is_empty());
        assert_eq!(parse_point_cloud(&[0u8; 17]), Err(Error::MalformedCloud(17)));
    }

    #[test]
    fn rejects_nan_and_bad_reflectance() {
        let mut bytes = serialize_point_cloud(&PointCloud::new(vec![Point::default(); 2]).unwrap());
        bytes[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(parse_point_cloud(&bytes), Err(Error::NonFiniteValue { point: 1 }));

        bytes[16..20].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert_eq!(parse_point_cloud(&bytes), Err(Error::NonFiniteValue { point: 1 }));

        bytes[16..20].copy_from_slice(&0f32.to_le_bytes());
        bytes[12..16].copy_from_slice(&1.5f32.to_le_bytes());
        assert!(matches!(
            parse_point_cloud(&bytes),
            Err(Error::ReflectanceOutOfRange { point: 0, .. })
        ));
    }

    proptest! {
        #[test]
        fn serialize_parse_is_bit_exact(
            pts in prop::collection::vec(
                (-1e4f32..1e4, -1e4f32..1e4, -1e3f32..1e3, 0f32..=1.0), 0..200)
        ) {
            let pc = PointCloud::new(pts.into_iter().map(|(x, y, z, r)| Point::new(x, y, z, r)).collect()).unwrap();
            let bytes = serialize_point_cloud(&pc);
            let back = parse_point_cloud(&bytes).unwrap();
            prop_assert_eq!(serialize_point_cloud(&back), bytes);
            prop_assert_eq!(back, pc);
        }
    }
}
