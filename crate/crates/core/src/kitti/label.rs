use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Object categories of the KITTI object benchmark. Serialized as the label
/// file token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObjectClass {
    Car,
    Van,
    Truck,
    Pedestrian,
    PersonSitting,
    Cyclist,
    Tram,
    Misc,
    DontCare,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 9] = [
        ObjectClass::Car,
        ObjectClass::Van,
        ObjectClass::Truck,
        ObjectClass::Pedestrian,
        ObjectClass::PersonSitting,
        ObjectClass::Cyclist,
        ObjectClass::Tram,
        ObjectClass::Misc,
        ObjectClass::DontCare,
    ];

    /// Token used in label files.
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectClass::Car => "Car",
            ObjectClass::Van => "Van",
            ObjectClass::Truck => "Truck",
            ObjectClass::Pedestrian => "Pedestrian",
            ObjectClass::PersonSitting => "Person_sitting",
            ObjectClass::Cyclist => "Cyclist",
            ObjectClass::Tram => "Tram",
            ObjectClass::Misc => "Misc",
            ObjectClass::DontCare => "DontCare",
        }
    }

    /// Human-readable name, e.g. "Person Sitting".
    pub fn display_name(self) -> &'static str {
        match self {
            ObjectClass::PersonSitting => "Person Sitting",
            other => other.as_str(),
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ObjectClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown class `{s}`"))
    }
}

impl serde::Serialize for ObjectClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> serde::Deserialize<'de> for ObjectClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One ground-truth object from a `label_2` file.
///
/// `location` is the bottom-face center in rectified camera coordinates and
/// `dims` is `(h, w, l)` as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub label: ObjectClass,
    pub truncated: f64,
    pub occluded: i32,
    pub alpha: f64,
    /// `(left, top, right, bottom)` in pixels.
    pub bbox2d: [f64; 4],
    /// `(h, w, l)` in meters.
    pub dims: [f64; 3],
    pub location: [f64; 3],
    pub rotation_y: f64,
}

impl Annotation {
    pub fn bbox_height(&self) -> f64 {
        self.bbox2d[3] - self.bbox2d[1]
    }

    pub fn is_dont_care(&self) -> bool {
        self.label == ObjectClass::DontCare
    }
}

/// A scored object from a result file.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub annotation: Annotation,
    pub score: f64,
}

const LABEL_FIELDS: usize = 15;

fn malformed(line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedLabel { line, reason: reason.into() }
}

/// Result files conventionally carry `-1` for unknown truncation/occlusion.
fn parse_row(line_no: usize, fields: &[&str], allow_unknown: bool) -> Result<Annotation> {
    let label: ObjectClass = fields[0].parse().map_err(|e: String| malformed(line_no, e))?;
    let num = |i: usize| -> Result<f64> {
        let v: f64 = fields[i]
            .parse()
            .map_err(|_| malformed(line_no, format!("field {} `{}` is not a number", i + 1, fields[i])))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(malformed(line_no, format!("field {} is not finite", i + 1)))
        }
    };
    let occluded: i32 = fields[2]
        .parse()
        .map_err(|_| malformed(line_no, format!("occlusion `{}` is not an integer", fields[2])))?;

    let ann = Annotation {
        label,
        truncated: num(1)?,
        occluded,
        alpha: num(3)?,
        bbox2d: [num(4)?, num(5)?, num(6)?, num(7)?],
        dims: [num(8)?, num(9)?, num(10)?],
        location: [num(11)?, num(12)?, num(13)?],
        rotation_y: num(14)?,
    };

    let [left, top, right, bottom] = ann.bbox2d;
    if right < left || bottom < top {
        return Err(malformed(line_no, "2D box has right < left or bottom < top"));
    }
    if label != ObjectClass::DontCare {
        let unknown = allow_unknown && ann.occluded == -1;
        if !(0..=3).contains(&ann.occluded) && !unknown {
            return Err(malformed(line_no, format!("occlusion {} not in 0..=3", ann.occluded)));
        }
        let unknown = allow_unknown && ann.truncated == -1.0;
        if !(0.0..=1.0).contains(&ann.truncated) && !unknown {
            return Err(malformed(line_no, format!("truncation {} not in [0, 1]", ann.truncated)));
        }
        if ann.dims.iter().any(|d| *d < 0.0) {
            return Err(malformed(line_no, "negative dimension"));
        }
    }
    Ok(ann)
}

fn rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, f)| !f.is_empty())
}

/// Parses a `label_2` file. Blank lines are skipped.
pub fn parse_labels(text: &str) -> Result<Vec<Annotation>> {
    rows(text)
        .map(|(line, fields)| {
            if fields.len() != LABEL_FIELDS {
                return Err(malformed(line, format!("expected 15 fields, found {}", fields.len())));
            }
            parse_row(line, &fields, false)
        })
        .collect()
}

/// Parses a result file: label fields plus a trailing score.
pub fn parse_detections(text: &str) -> Result<Vec<Detection>> {
    rows(text)
        .map(|(line, fields)| {
            if fields.len() != LABEL_FIELDS + 1 {
                return Err(malformed(line, format!("expected 16 fields, found {}", fields.len())));
            }
            let annotation = parse_row(line, &fields[..LABEL_FIELDS], true)?;
            let score: f64 = fields[LABEL_FIELDS]
                .parse()
                .map_err(|_| malformed(line, format!("score `{}` is not a number", fields[LABEL_FIELDS])))?;
            if !score.is_finite() {
                return Err(malformed(line, "score is not finite"));
            }
            Ok(Detection { annotation, score })
        })
        .collect()
}

fn write_row(out: &mut String, a: &Annotation, prec: usize) {
    let _ = write!(out, "{} {:.p$} {} {:.p$}", a.label, a.truncated, a.occluded, a.alpha, p = prec);
    for v in a.bbox2d.iter().chain(&a.dims).chain(&a.location) {
        let _ = write!(out, " {:.p$}", v, p = prec);
    }
    let _ = write!(out, " {:.p$}", a.rotation_y, p = prec);
}

/// Writes annotations with two decimals, the precision of the official labels.
pub fn write_labels(anns: &[Annotation]) -> String {
    let mut out = String::new();
    for a in anns {
        write_row(&mut out, a, 2);
        out.push('\n');
    }
    out
}

/// Writes detections with six decimals per numeric field.
pub fn write_detections(dets: &[Detection]) -> String {
    let mut out = String::new();
    for d in dets {
        write_row(&mut out, &d.annotation, 6);
        let _ = writeln!(out, " {:.6}", d.score);
    }
    out
}
