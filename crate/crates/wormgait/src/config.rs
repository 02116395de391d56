//! Flat key-value parameter files and environment overrides.
//!
//! One `name = value` per line, `#` starts a comment. Keys match the
//! parameter field names; every key has an identified default so a file only
//! needs the values it changes.

use crate::actuation::ActuationParams;
use crate::energy::{EnergyParams, STANDARD_GRAVITY};
use crate::error::{Error, Result};
use crate::model::RobotParams;
use std::path::Path;

/// The full resolved parameter set of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub robot: RobotParams,
    pub act: ActuationParams,
    pub energy: EnergyParams,
    /// Gravitational acceleration used in the cost of transport (m/s²).
    pub gravity: f64,
    /// Initial rear fin-groove offset (m).
    pub a1_offset: f64,
    /// Initial front fin-groove offset (m).
    pub a2_offset: f64,
    /// Moving-average window for measured-length differentiation.
    pub smoothing_window: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            robot: RobotParams::identified(),
            act: ActuationParams::identified(),
            energy: EnergyParams::identified(),
            gravity: STANDARD_GRAVITY,
            a1_offset: 0.0,
            a2_offset: 0.0,
            smoothing_window: 5,
        }
    }
}

/// All recognized keys, in file order.
pub const CONFIG_KEYS: &[&str] = &[
    "m1",
    "m2",
    "l_free",
    "l0",
    "k_b",
    "c_b",
    "eta",
    "d",
    "k_eng",
    "k_dis",
    "p_sw",
    "delta_c",
    "delta_s",
    "gain_k",
    "tau",
    "p_idle",
    "alpha_p",
    "gravity",
    "a1_offset",
    "a2_offset",
    "smoothing_window",
];

impl ModelConfig {
    pub fn get(&self, key: &str) -> Option<f64> {
        Some(match key {
            "m1" => self.robot.m1,
            "m2" => self.robot.m2,
            "l_free" => self.robot.l_free,
            "l0" => self.robot.l0,
            "k_b" => self.robot.k_b,
            "c_b" => self.robot.c_b,
            "eta" => self.robot.eta,
            "d" => self.robot.d,
            "k_eng" => self.robot.k_eng,
            "k_dis" => self.robot.k_dis,
            "p_sw" => self.robot.p_sw,
            "delta_c" => self.robot.delta_c,
            "delta_s" => self.act.delta_s,
            "gain_k" => self.act.gain_k,
            "tau" => self.act.tau,
            "p_idle" => self.energy.p_idle,
            "alpha_p" => self.energy.alpha_p,
            "gravity" => self.gravity,
            "a1_offset" => self.a1_offset,
            "a2_offset" => self.a2_offset,
            "smoothing_window" => self.smoothing_window as f64,
            _ => return None,
        })
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "m1" => self.robot.m1 = value,
            "m2" => self.robot.m2 = value,
            "l_free" => self.robot.l_free = value,
            "l0" => self.robot.l0 = value,
            "k_b" => self.robot.k_b = value,
            "c_b" => self.robot.c_b = value,
            "eta" => self.robot.eta = value,
            "d" => self.robot.d = value,
            "k_eng" => self.robot.k_eng = value,
            "k_dis" => self.robot.k_dis = value,
            "p_sw" => self.robot.p_sw = value,
            "delta_c" => self.robot.delta_c = value,
            "delta_s" => self.act.delta_s = value,
            "gain_k" => self.act.gain_k = value,
            "tau" => self.act.tau = value,
            "p_idle" => self.energy.p_idle = value,
            "alpha_p" => self.energy.alpha_p = value,
            "gravity" => self.gravity = value,
            "a1_offset" => self.a1_offset = value,
            "a2_offset" => self.a2_offset = value,
            "smoothing_window" => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!(
                        "smoothing_window must be a positive integer, got {value}"
                    )));
                }
                self.smoothing_window = value as usize;
            }
            _ => {
                return Err(Error::Config(format!("unknown parameter key `{key}`")));
            }
        }
        Ok(())
    }

    /// Applies one `name = value` file on top of the current values.
    pub fn apply_str(&mut self, text: &str, origin: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_string(),
                reason: format!("line {}: expected `name = value`, got `{raw}`", lineno + 1),
            })?;
            let key = key.trim();
            let value: f64 = value.trim().parse().map_err(|e| Error::Parse {
                path: origin.to_string(),
                reason: format!("line {}: bad value for `{key}`: {e}", lineno + 1),
            })?;
            self.set(key, value).map_err(|e| Error::Parse {
                path: origin.to_string(),
                reason: format!("line {}: {e}", lineno + 1),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_str(&text, &path.display().to_string())
    }

    /// Applies `PREFIX_KEY=value` pairs (keys case-insensitive) from an
    /// environment-style iterator.
    pub fn apply_overrides<I>(&mut self, prefix: &str, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (name, value) in vars {
            let Some(key) = name.strip_prefix(prefix) else {
                continue;
            };
            let key = key.to_ascii_lowercase();
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "environment override {name} does not name a parameter"
                )));
            }
            let value: f64 = value.parse().map_err(|e| {
                Error::Config(format!("environment override {name}: bad value: {e}"))
            })?;
            self.set(&key, value)?;
        }
        Ok(())
    }

    /// Reads `WORMGAIT_`-prefixed overrides from the process environment.
    pub fn apply_env(&mut self) -> Result<()> {
        self.apply_overrides("WORMGAIT_", std::env::vars())
    }

    /// Serializes every key, suitable for the merged-parameter output and
    /// the manifest snapshot.
    pub fn to_file_string(&self) -> String {
        let mut out = String::from("# worm robot model parameters (SI units)\n");
        for key in CONFIG_KEYS {
            out.push_str(&format!("{key} = {}\n", self.get(key).unwrap()));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.act.validate()?;
        self.energy.validate()?;
        if !(self.gravity > 0.0) {
            return Err(Error::InvalidParam {
                name: "gravity",
                reason: format!("must be positive, got {}", self.gravity),
            });
        }
        if self.smoothing_window % 2 == 0 {
            return Err(Error::Config(format!(
                "smoothing_window must be odd, got {}",
                self.smoothing_window
            )));
        }
        Ok(())
    }
}
