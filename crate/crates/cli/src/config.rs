//! Scenario files: JSON with per-command schemas, plus `--set` overrides on
//! dotted paths.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use vortonlab::cloud::{CloudRecipe, CompareOptions};
use vortonlab::fields::SeedGrid;
use vortonlab::spectral::{ConvergenceStudy, GridPreset};
use vortonlab::vortons::VortonData;
use vortonlab::{KernelSpec, Method};

use crate::Failure;

/// Reads a scenario file and applies the overrides in order.
pub fn load(path: &Path, overrides: &[String]) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    for item in overrides {
        apply_override(&mut value, item)?;
    }
    Ok(value)
}

/// Applies one `a.b.c=value` override. The value is parsed as JSON and
/// taken as a plain string when that fails. Missing objects along the path
/// are created; numeric segments index arrays.
pub fn apply_override(root: &mut Value, item: &str) -> Result<(), Failure> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| Failure::Config(format!("override `{item}` is not of the form key=value")))?;
    if path.is_empty() {
        return Err(Failure::Config(format!("override `{item}` has an empty key")));
    }
    let new = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for seg in path.split('.') {
        node = match node {
            Value::Array(items) => {
                let i: usize = seg
                    .parse()
                    .map_err(|_| Failure::Config(format!("override `{path}`: `{seg}` is not an array index")))?;
                let len = items.len();
                items
                    .get_mut(i)
                    .ok_or_else(|| Failure::Config(format!("override `{path}`: index {i} out of range ({len})")))?
            }
            Value::Object(map) => map.entry(seg.to_string()).or_insert(Value::Null),
            other => {
                if !other.is_null() {
                    return Err(Failure::Config(format!("override `{path}`: `{seg}` descends into a scalar")));
                }
                *other = Value::Object(Default::default());
                other.as_object_mut().unwrap().entry(seg.to_string()).or_insert(Value::Null)
            }
        };
    }
    *node = new;
    Ok(())
}

/// Deserializes with the offending field path in the diagnostic.
pub fn parse<T: DeserializeOwned>(value: &Value) -> Result<T, Failure> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Failure::Config(format!("at `{path}`: {}", e.inner()))
    })
}

/// Locates a schema error in the original file text, for a line/column
/// diagnostic when no override touched the config.
pub fn parse_text<T: DeserializeOwned>(text: &str) -> Result<T, Failure> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Failure::Config(format!("at `{path}`: {}", e.inner()))
    })
}

fn default_samples() -> usize {
    200
}

fn default_tol() -> f64 {
    1e-10
}

fn default_capture() -> f64 {
    1e-3
}

fn adaptive() -> Method {
    Method::Adaptive { tol: 1e-10 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub kernel: KernelSpec,
    #[serde(default = "adaptive")]
    pub method: Method,
    pub vortons: VortonData,
    pub duration: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reduce2Config {
    pub kernel: KernelSpec,
    #[serde(default = "adaptive")]
    pub method: Method,
    pub delta_p: [f64; 3],
    pub delta_m: [f64; 3],
    /// One run per total momentum.
    pub mbar: Vec<[f64; 3]>,
    pub duration: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Runs stop once |δP| falls below this separation.
    #[serde(default = "default_capture")]
    pub capture_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContoursConfig {
    pub kernel: KernelSpec,
    pub omega: f64,
    pub rho: [f64; 2],
    pub dm_norm: [f64; 2],
    pub shape: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSource {
    /// Velocity induced by point momenta.
    Vortons { positions: Vec<[f64; 3]>, momenta: Vec<[f64; 3]> },
    /// −∂₁(K(x)(C, ω, 0)), the late-collapse field.
    Collapse { c: f64, omega: f64 },
    /// The harmonic dipole of the unsmoothed planar flow.
    EulerDipole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub kernel: KernelSpec,
    pub source: FieldSource,
    pub grid: SeedGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowmapConfig {
    pub kernel: KernelSpec,
    pub vortons: VortonData,
    pub grid: SeedGrid,
    /// Seeds are placed in the past and carried to the vortons' time.
    #[serde(default)]
    pub from_past: bool,
    /// End time of the forward map, or the past horizon with `from_past`
    /// (defaulting to 40 kernel lengths of travel).
    #[serde(default)]
    pub t1: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridInput {
    pub resolution: usize,
    pub length: f64,
    #[serde(default)]
    pub preset: Option<GridPreset>,
    /// Binary grid file, an alternative to `preset`.
    #[serde(default)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub initial: GridInput,
    pub study: ConvergenceStudy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudcompareConfig {
    pub kernel: KernelSpec,
    pub recipe: CloudRecipe,
    pub options: CompareOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    /// Seed for the randomized checks.
    #[serde(default)]
    pub seed: u64,
    /// Number of random samples per randomized check.
    #[serde(default = "default_check_samples")]
    pub samples: usize,
}

fn default_check_samples() -> usize {
    1000
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { seed: 0, samples: default_check_samples() }
    }
}
