//! JSON scenario files.
//!
//! ```json
//! {
//!   "params":  { "chi1": 1, "chi2": 1, "alpha": 1, "beta": 1 },
//!   "grid":    { "lengths": [1, 1], "cells": [64, 64] },
//!   "initial": {
//!     "u": { "kind": "cosine_bump", "base": 1, "amplitude": 0.5, "k": [1, 1] },
//!     "v": { "kind": "constant", "value": 1 },
//!     "w": { "kind": "file", "path": "w.bin" }
//!   },
//!   "time":    { "t_end": 5, "dt_max": 0.01, "cfl_safety": 0.5 },
//!   "output":  { "every": 0.025 },
//!   "scheme":  { "advection": "central", "blowup_linf": 1e8 },
//!   "weight":  { "p": 2.0, "eps": 0.3 }
//! }
//! ```
//!
//! Only `params`, `grid`, `initial` and `time.t_end` are required. Unknown
//! and duplicate keys are rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use chemolab::model::InitialProfiles;
use chemolab::{Advection, Grid, ModelError, ModelParams, Profile, ScenarioConfig};

use crate::error::ConfigError;
use crate::output::read_raw_field;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    params: ParamsSection,
    grid: GridSection,
    initial: InitialSection,
    time: TimeSection,
    #[serde(default)]
    output: OutputSection,
    #[serde(default)]
    scheme: SchemeSection,
    #[serde(default)]
    weight: WeightSection,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub chi1: f64,
    pub chi2: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub lengths: Vec<f64>,
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSection {
    u: InitialSpec,
    v: InitialSpec,
    w: InitialSpec,
}

/// One field's initial data as written in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Constant {
        value: f64,
    },
    CosineBump {
        base: f64,
        amplitude: f64,
        k: Vec<f64>,
    },
    Gaussian {
        center: Vec<f64>,
        width: f64,
        amplitude: f64,
        floor: f64,
    },
    /// Raw little-endian `f64` cells, x fastest. Relative paths are taken
    /// from the config file's directory.
    File {
        path: PathBuf,
        /// Content hash, filled in on resolution.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sha256: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSection {
    t_end: f64,
    dt_max: Option<f64>,
    cfl_safety: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    every: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemeSection {
    advection: Option<Advection>,
    blowup_linf: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

/// Config with every default filled in; this is what gets hashed.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub params: ParamsSection,
    pub grid: GridSection,
    pub initial: ResolvedInitial,
    pub time: ResolvedTime,
    pub output: ResolvedOutput,
    pub scheme: ResolvedScheme,
    pub weight: WeightSection,
    #[serde(skip)]
    base_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedInitial {
    pub u: InitialSpec,
    pub v: InitialSpec,
    pub w: InitialSpec,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResolvedTime {
    pub t_end: f64,
    pub dt_max: f64,
    pub cfl_safety: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResolvedOutput {
    pub every: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResolvedScheme {
    pub advection: Advection,
    pub blowup_linf: f64,
}

/// Parses and validates a scenario file.
pub fn parse_config(path: &Path) -> Result<ResolvedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &base)
}

/// Parses a scenario from a string; `base_dir` anchors relative file paths.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ResolvedConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: ConfigFile =
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Syntax {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    resolve(raw, base_dir)
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_string(),
        message: message.into(),
    }
}

fn positive(path: &str, value: f64) -> Result<f64, ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(invalid(
            path,
            format!("must be positive and finite, got {value}"),
        ))
    }
}

fn resolve(raw: ConfigFile, base_dir: &Path) -> Result<ResolvedConfig, ConfigError> {
    let p = raw.params;
    positive("params.chi1", p.chi1)?;
    positive("params.chi2", p.chi2)?;
    positive("params.alpha", p.alpha)?;
    positive("params.beta", p.beta)?;

    Grid::new(&raw.grid.lengths, &raw.grid.cells).map_err(|e| invalid("grid", e.to_string()))?;

    let t_end = positive("time.t_end", raw.time.t_end)?;
    let dt_max = positive("time.dt_max", raw.time.dt_max.unwrap_or(t_end))?;
    let cfl_safety = raw.time.cfl_safety.unwrap_or(0.5);
    if !(cfl_safety > 0.0 && cfl_safety <= 1.0) {
        return Err(invalid(
            "time.cfl_safety",
            format!("must lie in (0, 1], got {cfl_safety}"),
        ));
    }
    let every = positive("output.every", raw.output.every.unwrap_or(t_end / 200.0))?;
    let blowup_linf = positive("scheme.blowup_linf", raw.scheme.blowup_linf.unwrap_or(1e8))?;
    if let Some(wp) = raw.weight.p {
        if !(wp > 1.0 && wp.is_finite()) {
            return Err(invalid("weight.p", format!("must exceed 1, got {wp}")));
        }
    }
    if let Some(eps) = raw.weight.eps {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid(
                "weight.eps",
                format!("must lie in (0, 1), got {eps}"),
            ));
        }
    }

    let resolve_spec = |spec: InitialSpec| -> Result<InitialSpec, ConfigError> {
        match spec {
            InitialSpec::File { path, .. } => {
                let full = base_dir.join(&path);
                let bytes = std::fs::read(&full).map_err(|source| ConfigError::Io {
                    path: full.clone(),
                    source,
                })?;
                Ok(InitialSpec::File {
                    path,
                    sha256: Some(hex::encode(Sha256::digest(&bytes))),
                })
            }
            other => Ok(other),
        }
    };
    let initial = ResolvedInitial {
        u: resolve_spec(raw.initial.u)?,
        v: resolve_spec(raw.initial.v)?,
        w: resolve_spec(raw.initial.w)?,
    };

    let resolved = ResolvedConfig {
        params: p,
        grid: raw.grid,
        initial,
        time: ResolvedTime {
            t_end,
            dt_max,
            cfl_safety,
        },
        output: ResolvedOutput { every },
        scheme: ResolvedScheme {
            advection: raw.scheme.advection.unwrap_or_default(),
            blowup_linf,
        },
        weight: raw.weight,
        base_dir: base_dir.to_path_buf(),
    };
    // catch profile/grid mismatches now rather than at run time
    resolved.scenario()?;
    Ok(resolved)
}

impl ResolvedConfig {
    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("resolved config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("resolved config serializes")
    }

    pub fn grid(&self) -> Grid {
        Grid::new(&self.grid.lengths, &self.grid.cells).expect("validated on resolution")
    }

    /// Same scenario on a different cell count.
    pub fn with_cells(&self, cells: Vec<usize>) -> Self {
        let mut out = self.clone();
        out.grid.cells = cells;
        out
    }

    pub fn with_dt_max(&self, dt_max: f64) -> Self {
        let mut out = self.clone();
        out.time.dt_max = dt_max;
        out
    }

    /// Builds the solver-side scenario, loading any raw field files.
    pub fn scenario(&self) -> Result<ScenarioConfig, ConfigError> {
        let grid = self.grid();
        let profile = |name: &str, spec: &InitialSpec| -> Result<Profile, ConfigError> {
            let key = format!("initial.{name}");
            let profile = match spec {
                InitialSpec::Constant { value } => Profile::Constant { value: *value },
                InitialSpec::CosineBump { base, amplitude, k } => Profile::CosineBump {
                    base: *base,
                    amplitude: *amplitude,
                    k: k.clone(),
                },
                InitialSpec::Gaussian {
                    center,
                    width,
                    amplitude,
                    floor,
                } => Profile::Gaussian {
                    center: center.clone(),
                    width: *width,
                    amplitude: *amplitude,
                    floor: *floor,
                },
                InitialSpec::File { path, .. } => {
                    let full = self.base_dir.join(path);
                    let values = read_raw_field(&full).map_err(|source| ConfigError::Io {
                        path: full.clone(),
                        source,
                    })?;
                    Profile::Values { values }
                }
            };
            profile
                .sample(&grid)
                .map_err(|e| invalid(&key, e.to_string()))?;
            Ok(profile)
        };
        let initial = InitialProfiles {
            u: profile("u", &self.initial.u)?,
            v: profile("v", &self.initial.v)?,
            w: profile("w", &self.initial.w)?,
        };
        initial.sample(&grid).map_err(|e| {
            let key = match &e {
                ModelError::NonPositiveDensity { field, .. }
                | ModelError::NonFinite { field, .. } => {
                    format!("initial.{}", field.trim_end_matches('0'))
                }
                ModelError::NegativeSignal { .. } => "initial.w".to_string(),
                _ => "initial".to_string(),
            };
            invalid(&key, e.to_string())
        })?;
        let params = ModelParams::new(
            self.params.chi1,
            self.params.chi2,
            self.params.alpha,
            self.params.beta,
        )
        .map_err(|e| invalid("params", e.to_string()))?;
        Ok(ScenarioConfig {
            params,
            grid,
            initial,
            t_end: self.time.t_end,
            dt_max: self.time.dt_max,
            cfl_safety: self.time.cfl_safety,
            output_every: self.output.every,
            scheme: self.scheme.advection,
            blowup_linf: self.scheme.blowup_linf,
            weight_p: self.weight.p,
            weight_eps: self.weight.eps,
        })
    }
}
