use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{ApMode, Difficulty, Metric};
use crate::kitti::ObjectClass;

/// AP per `(class, difficulty, metric)` cell. A cell holds `None` when it had
/// no counted ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: ApMode,
    cells: BTreeMap<(ObjectClass, Difficulty, Metric), Option<f64>>,
}

impl EvalReport {
    pub fn new(mode: ApMode) -> Self {
        EvalReport { mode, cells: BTreeMap::new() }
    }

    pub fn insert(&mut self, class: ObjectClass, difficulty: Difficulty, metric: Metric, ap: Option<f64>) {
        self.cells.insert((class, difficulty, metric), ap);
    }

    /// Adds the cells of another report over the same AP mode.
    pub fn merge(&mut self, other: EvalReport) {
        debug_assert_eq!(self.mode, other.mode);
        self.cells.extend(other.cells);
    }

    pub fn ap(&self, class: ObjectClass, difficulty: Difficulty, metric: Metric) -> Option<f64> {
        self.cells.get(&(class, difficulty, metric)).copied().flatten()
    }

    pub fn cells(&self) -> impl Iterator<Item = (ObjectClass, Difficulty, Metric, Option<f64>)> + '_ {
        self.cells.iter().map(|(&(c, d, m), &ap)| (c, d, m, ap))
    }

    pub fn metrics(&self) -> Vec<Metric> {
        let mut m: Vec<Metric> = self.cells.keys().map(|k| k.2).collect();
        m.dedup();
        m.sort();
        m.dedup();
        m
    }

    fn classes(&self) -> Vec<ObjectClass> {
        let mut c: Vec<ObjectClass> = self.cells.keys().map(|k| k.0).collect();
        c.sort();
        c.dedup();
        c
    }

    /// Mean AP over the defined cells of one metric.
    pub fn map(&self, metric: Metric) -> Option<f64> {
        let aps: Vec<f64> = self.cells().filter(|c| c.2 == metric).filter_map(|c| c.3).collect();
        (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64)
    }

    /// One row per metric: mAP then class x difficulty, as percentages.
    pub fn to_table(&self) -> String {
        let classes = self.classes();
        let mut header = format!("{:<10} {:>8}", "Metric", "mAP");
        for c in &classes {
            for d in Difficulty::ALL {
                let _ = write!(header, " {:>12}", format!("{}/{}", short_class(*c), short_difficulty(d)));
            }
        }
        let mut out = format!("AP ({} recall points)\n{header}\n", recall_points(self.mode));
        let pct = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{:.2}", 100.0 * v));
        for m in self.metrics() {
            let _ = write!(out, "{:<10} {:>8}", m.title(), pct(self.map(m)));
            for c in &classes {
                for d in Difficulty::ALL {
                    let _ = write!(out, " {:>12}", pct(self.ap(*c, d, m)));
                }
            }
            out.push('\n');
        }
        out
    }

    /// `class.difficulty.metric = ap` lines plus `map.metric = value`, in
    /// lossless float formatting. Undefined cells are left out.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mode = {}", recall_points(self.mode));
        for (c, d, m, ap) in self.cells() {
            if let Some(ap) = ap {
                let _ = writeln!(out, "{}.{}.{} = {}", c.as_str().to_ascii_lowercase(), d, m.key(), ap);
            }
        }
        for m in self.metrics() {
            if let Some(v) = self.map(m) {
                let _ = writeln!(out, "map.{} = {}", m.key(), v);
            }
        }
        out
    }
}

fn recall_points(mode: ApMode) -> u32 {
    match mode {
        ApMode::Interp11 => 11,
        ApMode::Interp40 => 40,
    }
}

fn short_class(c: ObjectClass) -> &'static str {
    match c {
        ObjectClass::Pedestrian => "Ped",
        ObjectClass::Cyclist => "Cyc",
        other => other.as_str(),
    }
}

fn short_difficulty(d: Difficulty) -> &'static str {
    match d {
        Difficulty::Easy => "Easy",
        Difficulty::Moderate => "Mod",
        Difficulty::Hard => "Hard",
    }
}
