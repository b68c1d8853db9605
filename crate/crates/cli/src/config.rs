//! Run configuration: a sectioned TOML file layered over built-in defaults.
//! Command-line flags are applied on top by the caller.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lidarpipe::bev::{BevConfig, Palette};
use lidarpipe::eval::EvalConfig;
use lidarpipe::pillar::PillarConfig;
use lidarpipe::voxel::VoxelConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// The VFE layer applied by `voxelize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VfeSection {
    /// Output width of the built-in layer when no weights file is given.
    pub c_out: usize,
    /// JSON file with trained VFE weights.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
}

impl Default for VfeSection {
    fn default() -> Self {
        VfeSection { c_out: 32, weights: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectSection {
    pub width: usize,
    pub height: usize,
    /// Depth mapped to the top of the palette; farther points saturate.
    pub max_depth: f64,
    pub palette: Palette,
}

impl Default for ProjectSection {
    fn default() -> Self {
        // KITTI's left color camera
        ProjectSection { width: 1242, height: 375, max_depth: 80.0, palette: Palette::Turbo }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub pillar: PillarConfig,
    pub voxel: VoxelConfig,
    pub vfe: VfeSection,
    pub bev: BevConfig,
    pub project: ProjectSection,
    pub eval: EvalConfig,
}

const SECTIONS: [&str; 6] = ["pillar", "voxel", "vfe", "bev", "project", "eval"];

/// Recursively copies `overlay` into `base`; nested tables merge key by key.
fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn layered<T: Serialize + DeserializeOwned>(name: &str, default: &T, overlay: Option<toml::Table>) -> Result<T> {
    let Some(overlay) = overlay else { return Ok(toml::Value::try_from(default)?.try_into()?) };
    let toml::Value::Table(mut base) = toml::Value::try_from(default)? else {
        unreachable!("config sections serialize to tables")
    };
    merge(&mut base, overlay);
    toml::Value::Table(base).try_into().with_context(|| format!("invalid [{name}] section"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().context("config is not valid TOML")?;
        let mut section = |name: &str| -> Result<Option<toml::Table>> {
            match table.remove(name) {
                None => Ok(None),
                Some(toml::Value::Table(t)) => Ok(Some(t)),
                Some(_) => bail!("`{name}` must be a [section]"),
            }
        };
        let defaults = RunConfig::default();
        let pillar = layered("pillar", &defaults.pillar, section("pillar")?)?;
        let voxel = layered("voxel", &defaults.voxel, section("voxel")?)?;
        let vfe = layered("vfe", &defaults.vfe, section("vfe")?)?;
        let bev = layered("bev", &defaults.bev, section("bev")?)?;
        let project = layered("project", &defaults.project, section("project")?)?;
        let eval = layered("eval", &defaults.eval, section("eval")?)?;

        let path = |v: toml::Value, key: &str| match v {
            toml::Value::String(s) => Ok(PathBuf::from(s)),
            _ => bail!("`{key}` must be a string"),
        };
        let data = table.remove("data").map(|v| path(v, "data")).transpose()?;
        let output = table.remove("output").map(|v| path(v, "output")).transpose()?;
        if let Some(key) = table.keys().next() {
            bail!("unknown config key `{key}` (expected data, output or one of the sections {SECTIONS:?})");
        }
        Ok(RunConfig { data, output, pillar, voxel, vfe, bev, project, eval })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        RunConfig::from_toml(&text).with_context(|| format!("in config {}", path.display()))
    }
}
