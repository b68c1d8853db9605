//! KITTI-style dataset layout: `velodyne/`, `label_2/` and `calib/` under one
//! root, files named by six-digit frame id.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lidarpipe::kitti::{parse_calib, parse_labels, parse_point_cloud};
use lidarpipe::{Annotation, Calibration, PointCloud};

pub const VELODYNE: &str = "velodyne";
pub const LABELS: &str = "label_2";
pub const CALIB: &str = "calib";

#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
}

/// Normalizes a frame id: purely numeric ids are zero-padded to six digits.
pub fn frame_id(raw: &str) -> Result<String> {
    let raw = raw.trim();
    if raw.is_empty() || raw.contains(['/', '\\']) || raw.starts_with('.') {
        bail!("invalid frame id `{raw}`");
    }
    if raw.bytes().all(|b| b.is_ascii_digit()) && raw.len() < 6 {
        return Ok(format!("{raw:0>6}"));
    }
    Ok(raw.to_string())
}

/// Frame ids of the files with `ext` in `dir`, sorted.
pub fn list_frames(dir: &Path, ext: &str) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))?;
    let mut ids = Vec::new();
    for entry in entries {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

/// Frame ids listed one per line; blank lines and `#` comments are skipped.
pub fn read_split(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read split {}", path.display()))?;
    let mut ids = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(frame_id)
        .collect::<Result<Vec<_>>>()?;
    ids.sort();
    ids.dedup();
    Ok(ids)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

impl Dataset {
    pub fn new(root: PathBuf) -> Result<Self> {
        if !root.is_dir() {
            bail!("dataset root {} is not a directory", root.display());
        }
        Ok(Dataset { root })
    }

    pub fn dir(&self, sub: &str) -> PathBuf {
        self.root.join(sub)
    }

    pub fn cloud_path(&self, id: &str) -> PathBuf {
        self.root.join(VELODYNE).join(format!("{id}.bin"))
    }

    pub fn label_path(&self, id: &str) -> PathBuf {
        self.root.join(LABELS).join(format!("{id}.txt"))
    }

    pub fn calib_path(&self, id: &str) -> PathBuf {
        self.root.join(CALIB).join(format!("{id}.txt"))
    }

    /// Explicit ids, else the split file, else every frame found in `sub`.
    pub fn frames(&self, explicit: &[String], split: Option<&Path>, sub: &str, ext: &str) -> Result<Vec<String>> {
        let mut ids = if !explicit.is_empty() {
            explicit.iter().map(|s| frame_id(s)).collect::<Result<Vec<_>>>()?
        } else if let Some(split) = split {
            read_split(split)?
        } else {
            list_frames(&self.dir(sub), ext)?
        };
        ids.sort();
        ids.dedup();
        Ok(ids)
    }

    /// Fails on the first frame whose file under `which` is missing.
    pub fn require(&self, ids: &[String], which: fn(&Dataset, &str) -> PathBuf) -> Result<()> {
        for id in ids {
            let path = which(self, id);
            if !path.is_file() {
                bail!("frame {id}: missing {}", path.display());
            }
        }
        Ok(())
    }

    pub fn cloud(&self, id: &str) -> Result<PointCloud> {
        let path = self.cloud_path(id);
        parse_point_cloud(&read(&path)?).with_context(|| format!("in {}", path.display()))
    }

    pub fn labels(&self, id: &str) -> Result<Vec<Annotation>> {
        let path = self.label_path(id);
        parse_labels(&read_text(&path)?).with_context(|| format!("in {}", path.display()))
    }

    pub fn calib(&self, id: &str) -> Result<Calibration> {
        let path = self.calib_path(id);
        let calib = parse_calib(&read_text(&path)?).with_context(|| format!("in {}", path.display()))?;
        calib.check().with_context(|| format!("in {}", path.display()))?;
        Ok(calib)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_ids() {
        assert_eq!(frame_id("7").unwrap(), "000007");
        assert_eq!(frame_id("000123").unwrap(), "000123");
        assert_eq!(frame_id("1234567").unwrap(), "1234567");
        assert!(frame_id("../x").is_err());
        assert!(frame_id("").is_err());
    }
}
