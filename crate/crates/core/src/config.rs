//! Run configuration read from JSON.
//!
//! Every key is optional. Plant keys overlay the reference parameters;
//! `z_cap`, `cap1` and `cap2` are recomputed from the overlaid values unless
//! given explicitly.
//!
//! ```json
//! {
//!   "plant": { "a2": 70.0, "τ": 60 },
//!   "epsilon": 0.5,
//!   "mpc": { "lambda": 0.001, "horizon": 10 },
//!   "dp": { "theta": -0.1, "grid": [41, 41], "actions": 11, "horizon": 20,
//!           "atoms": 3, "projection": "multilinear" }
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::control::MpcConfig;
use crate::error::{Error, Result};
use crate::model::PlantParams;
use crate::riskdp::{Projection, RiskParams};
use crate::smooth::SmoothParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpConfig {
    pub theta: f64,
    pub grid: [usize; 2],
    pub actions: usize,
    pub horizon: usize,
    /// Disturbance atoms fitted from the weather series.
    pub atoms: usize,
    pub projection: Projection,
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig {
            theta: -0.1,
            grid: [41, 41],
            actions: 11,
            horizon: 20,
            atoms: 3,
            projection: Projection::Multilinear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub plant: PlantParams,
    pub epsilon: f64,
    pub mpc: MpcConfig,
    pub dp: DpConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            plant: PlantParams::default(),
            epsilon: SmoothParams::DEFAULT_EPSILON,
            mpc: MpcConfig::default(),
            dp: DpConfig::default(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    plant: Map<String, Value>,
    epsilon: Option<f64>,
    #[serde(default)]
    mpc: RawMpc,
    #[serde(default)]
    dp: DpConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMpc {
    lambda: Option<f64>,
    horizon: Option<usize>,
}

/// Plant keys with their accepted spellings, canonical first.
const PLANT_KEYS: &[&[&str]] = &[
    &["a1"],
    &["a2"],
    &["a_pump"],
    &["a_in"],
    &["a_hat", "â"],
    &["c_hat", "ĉ"],
    &["c_d"],
    &["d"],
    &["D"],
    &["F"],
    &["g"],
    &["K"],
    &["k_L"],
    &["l"],
    &["r_o"],
    &["tau", "τ"],
    &["z_cap"],
    &["z_H"],
    &["z_o"],
    &["z_pump"],
    &["z_soil"],
    &["z_veg"],
    &["cap1"],
    &["cap2"],
];

fn canonical_plant_key(key: &str) -> Option<&'static str> {
    PLANT_KEYS
        .iter()
        .find(|names| names.contains(&key))
        .map(|names| names[0])
}

/// Overlay `overrides` on the reference plant and recompute derived defaults.
pub fn plant_from_overrides(overrides: &Map<String, Value>) -> Result<PlantParams> {
    let Value::Object(mut merged) = serde_json::to_value(PlantParams::default())? else {
        unreachable!("plant parameters serialize to an object");
    };
    let mut given = Vec::new();
    for (key, value) in overrides {
        let canon = canonical_plant_key(key)
            .ok_or_else(|| Error::InvalidParameters(format!("unknown plant key `{key}`")))?;
        if given.contains(&canon) {
            return Err(Error::InvalidParameters(format!(
                "plant key `{canon}` given twice"
            )));
        }
        given.push(canon);
        merged.insert(canon.to_string(), value.clone());
    }
    let mut p: PlantParams = serde_json::from_value(Value::Object(merged))?;
    if !given.contains(&"z_cap") {
        p.z_cap = p.a2 * p.z_soil;
    }
    if !given.contains(&"cap1") {
        p.cap1 = 2.0 * p.a1 * p.z_o;
    }
    if !given.contains(&"cap2") {
        p.cap2 = p.a2 * p.z_soil;
    }
    p.validate()?;
    Ok(p)
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text)?;
        let defaults = RunConfig::default();
        let cfg = RunConfig {
            plant: plant_from_overrides(&raw.plant)?,
            epsilon: raw.epsilon.unwrap_or(defaults.epsilon),
            mpc: MpcConfig {
                lambda: raw.mpc.lambda.unwrap_or(defaults.mpc.lambda),
                horizon: raw.mpc.horizon.unwrap_or(defaults.mpc.horizon),
            },
            dp: raw.dp,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        RunConfig::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        SmoothParams::new(self.epsilon, self.plant)?;
        if !(self.mpc.lambda > 0.0 && self.mpc.lambda.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "lambda must be positive, got {}",
                self.mpc.lambda
            )));
        }
        if self.mpc.horizon == 0 || self.mpc.horizon > crate::linearize::MAX_STAGES {
            return Err(Error::InvalidHorizon(self.mpc.horizon));
        }
        RiskParams::new(self.dp.theta)?;
        if self.dp.grid.iter().any(|&n| n < 2) || self.dp.actions == 0 || self.dp.atoms == 0 {
            return Err(Error::InvalidParameters(
                "dp grid needs at least 2 nodes per axis, at least one action and one atom".into(),
            ));
        }
        if self.dp.horizon == 0 {
            return Err(Error::InvalidHorizon(0));
        }
        Ok(())
    }

    pub fn smooth(&self) -> SmoothParams {
        SmoothParams {
            epsilon: self.epsilon,
            plant: self.plant,
        }
    }
}

/// Parse `"41x41"` into `[41, 41]`.
pub fn parse_grid_shape(text: &str) -> Result<[usize; 2]> {
    let bad = || Error::InvalidParameters(format!("grid shape must look like 41x41, got `{text}`"));
    let (a, b) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok([
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ])
}
