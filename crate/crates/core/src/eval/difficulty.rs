use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kitti::{Annotation, ObjectClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Moderate => "moderate",
            Difficulty::Hard => "hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Difficulty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Difficulty::ALL
            .into_iter()
            .find(|d| d.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown difficulty `{s}`"))
    }
}

/// Visibility requirements a ground truth must meet to count at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifficultyRule {
    /// Minimum 2D box height in pixels.
    pub min_bbox_height: f64,
    pub max_occlusion: i32,
    pub max_truncation: f64,
}

impl DifficultyRule {
    pub fn admits(&self, ann: &Annotation) -> bool {
        ann.bbox_height() >= self.min_bbox_height
            && ann.occluded <= self.max_occlusion
            && ann.truncated <= self.max_truncation
    }

    fn no_stricter_than(&self, other: &DifficultyRule) -> bool {
        self.min_bbox_height <= other.min_bbox_height
            && self.max_occlusion >= other.max_occlusion
            && self.max_truncation >= other.max_truncation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifficultyRules {
    pub easy: DifficultyRule,
    pub moderate: DifficultyRule,
    pub hard: DifficultyRule,
}

impl Default for DifficultyRules {
    /// The KITTI benchmark thresholds.
    fn default() -> Self {
        DifficultyRules {
            easy: DifficultyRule { min_bbox_height: 40.0, max_occlusion: 0, max_truncation: 0.15 },
            moderate: DifficultyRule { min_bbox_height: 25.0, max_occlusion: 1, max_truncation: 0.30 },
            hard: DifficultyRule { min_bbox_height: 25.0, max_occlusion: 2, max_truncation: 0.50 },
        }
    }
}

impl DifficultyRules {
    pub fn get(&self, d: Difficulty) -> &DifficultyRule {
        match d {
            Difficulty::Easy => &self.easy,
            Difficulty::Moderate => &self.moderate,
            Difficulty::Hard => &self.hard,
        }
    }

    /// Every Easy object must also pass Moderate, and every Moderate one Hard.
    pub fn validate(&self) -> Result<()> {
        if self.moderate.no_stricter_than(&self.easy) && self.hard.no_stricter_than(&self.moderate) {
            Ok(())
        } else {
            Err(Error::BadConfig("difficulty thresholds must loosen from easy to hard".into()))
        }
    }
}

/// Class whose detections are neither rewarded nor penalized when
/// evaluating `class` (KITTI's neighbouring-class rule).
pub fn similar_class(class: ObjectClass) -> Option<ObjectClass> {
    match class {
        ObjectClass::Car => Some(ObjectClass::Van),
        ObjectClass::Pedestrian => Some(ObjectClass::PersonSitting),
        _ => None,
    }
}

/// Ground truths of one frame split for one class at one difficulty.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GtSets {
    /// Objects that must be detected.
    pub counted: Vec<usize>,
    /// Same-class objects failing the difficulty, plus similar-class objects.
    pub ignored: Vec<usize>,
    /// DontCare regions.
    pub dont_care: Vec<usize>,
}

/// Splits `anns` for evaluating `class` at the level described by `rule`.
pub fn filter_difficulty(
    anns: &[Annotation],
    class: ObjectClass,
    rule: &DifficultyRule,
    ignore_similar: bool,
) -> GtSets {
    let similar = if ignore_similar { similar_class(class) } else { None };
    let mut sets = GtSets::default();
    for (i, a) in anns.iter().enumerate() {
        if a.label == ObjectClass::DontCare {
            sets.dont_care.push(i);
        } else if a.label == class {
            if rule.admits(a) {
                sets.counted.push(i);
            } else {
                sets.ignored.push(i);
            }
        } else if Some(a.label) == similar {
            sets.ignored.push(i);
        }
    }
    sets
}
