//! Experiment configuration: regime presets, flat `key = value` files and
//! command-line overrides.
//!
//! Energies are in units of the tunnelling splitting Δ (`eta0`, `omega0`,
//! `T0`, `omega_max`), `dt` is in units of 1/Δ and `t_final` in units of π/Δ.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chainmap::{self, ChainCoefficients};
use crate::error::{Error, Result};
use crate::mps::Truncation;
use crate::propagate::{Scheme, SchemeConfig, SpinBosonSystem};
use crate::spectral::{SpectralDensity, ThermalizedWeight};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Adiabatic,
    Intermediate,
    Nonadiabatic,
    Custom,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Adiabatic => "adiabatic",
            Preset::Intermediate => "intermediate",
            Preset::Nonadiabatic => "nonadiabatic",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "adiabatic" => Ok(Preset::Adiabatic),
            "intermediate" => Ok(Preset::Intermediate),
            "nonadiabatic" => Ok(Preset::Nonadiabatic),
            "custom" => Ok(Preset::Custom),
            _ => Err(Error::config("preset", format!("unknown preset `{s}`"))),
        }
    }
}

/// Fully resolved experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub scheme: Scheme,
    pub eta0: f64,
    pub omega0: f64,
    #[serde(rename = "T0")]
    pub t0: f64,
    pub delta: f64,
    #[serde(rename = "N")]
    pub n_chain: usize,
    pub local_dim: usize,
    pub dt: f64,
    pub t_final: f64,
    pub sv_threshold: f64,
    pub max_bond: usize,
    pub omega_max: Option<f64>,
    pub quad_points: Option<usize>,
    pub record_stride: usize,
    pub outdir: PathBuf,
    /// Reserved; every algorithm is deterministic.
    pub seed: u64,
}

/// Keys accepted in configuration files and `--set` overrides.
pub const KEYS: [&str; 17] = [
    "preset",
    "scheme",
    "eta0",
    "omega0",
    "T0",
    "delta",
    "N",
    "local_dim",
    "dt",
    "t_final",
    "sv_threshold",
    "max_bond",
    "omega_max",
    "quad_points",
    "record_stride",
    "outdir",
    "seed",
];

impl ExperimentConfig {
    /// Defaults of a regime; `custom` starts from the adiabatic values and
    /// must override `omega0`, `T0` and `dt`.
    pub fn preset(preset: Preset) -> Self {
        let (omega0, t0, dt, sv_threshold) = match preset {
            Preset::Adiabatic | Preset::Custom => (0.25, 1.0, 5e-2, 1e-3),
            Preset::Intermediate => (1.0, 2.0, 5e-3, 1e-4),
            Preset::Nonadiabatic => (4.0, 4.0, 1.25e-2, 1e-3),
        };
        Self {
            preset,
            scheme: Scheme::InteractionChain,
            eta0: 1.0,
            omega0,
            t0,
            delta: 1.0,
            n_chain: 60,
            local_dim: 10,
            dt,
            t_final: 2.0,
            sv_threshold,
            max_bond: 1000,
            omega_max: None,
            quad_points: None,
            record_stride: 1,
            outdir: PathBuf::from("out"),
            seed: 0,
        }
    }

    /// Applies `key = value` pairs on top of the preset named by `preset`
    /// (adiabatic if absent) and validates the result.
    pub fn resolve(pairs: &[(String, String)]) -> Result<Self> {
        let mut preset = Preset::Adiabatic;
        for (k, v) in pairs {
            if k == "preset" {
                preset = v.parse()?;
            }
        }
        let mut cfg = Self::preset(preset);
        let mut seen = BTreeMap::new();
        for (k, v) in pairs {
            cfg.set(k, v)?;
            seen.insert(k.as_str(), ());
        }
        if preset == Preset::Custom {
            for key in ["omega0", "T0", "dt"] {
                if !seen.contains_key(key) {
                    return Err(Error::config(key, "required by the custom preset"));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "preset" => self.preset = v.parse()?,
            "scheme" => self.scheme = v.parse()?,
            "eta0" => self.eta0 = parse(key, v)?,
            "omega0" => self.omega0 = parse(key, v)?,
            "T0" => self.t0 = parse(key, v)?,
            "delta" => self.delta = parse(key, v)?,
            "N" => self.n_chain = parse(key, v)?,
            "local_dim" => self.local_dim = parse(key, v)?,
            "dt" => self.dt = parse(key, v)?,
            "t_final" => self.t_final = parse(key, v)?,
            "sv_threshold" => self.sv_threshold = parse(key, v)?,
            "max_bond" => self.max_bond = parse(key, v)?,
            "omega_max" => self.omega_max = parse_optional(key, v)?,
            "quad_points" => self.quad_points = parse_optional(key, v)?,
            "record_stride" => self.record_stride = parse(key, v)?,
            "outdir" => self.outdir = PathBuf::from(v),
            "seed" => self.seed = parse(key, v)?,
            _ => return Err(Error::config(key, format!("unknown key (expected one of {})", KEYS.join(", ")))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive, got {x}")))
            }
        };
        let non_negative = |key: &str, x: f64| {
            if x >= 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be non-negative, got {x}")))
            }
        };
        non_negative("eta0", self.eta0)?;
        positive("omega0", self.omega0)?;
        non_negative("T0", self.t0)?;
        non_negative("delta", self.delta)?;
        positive("dt", self.dt)?;
        non_negative("t_final", self.t_final)?;
        if self.local_dim < 2 {
            return Err(Error::config("local_dim", format!("need at least 2 levels, got {}", self.local_dim)));
        }
        if !(0.0..1.0).contains(&self.sv_threshold) {
            return Err(Error::config("sv_threshold", format!("must lie in [0, 1), got {}", self.sv_threshold)));
        }
        if self.max_bond == 0 {
            return Err(Error::config("max_bond", "must be at least 1"));
        }
        if self.record_stride == 0 {
            return Err(Error::config("record_stride", "must be at least 1"));
        }
        if let Some(w) = self.omega_max {
            positive("omega_max", w)?;
        }
        if let Some(q) = self.quad_points {
            if q < 2 * (self.n_chain + 1) {
                return Err(Error::config("quad_points", format!("{q} points cannot resolve {} modes", self.n_chain + 1)));
            }
        }
        if self.delta == 0.0 {
            return Err(Error::config("delta", "the energy unit must be non-zero"));
        }
        Ok(())
    }

    /// Reads a flat `key = value` file, or a JSON echo if the file name ends
    /// in `.json`, then applies `overrides`.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut pairs = Vec::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            if path.extension().is_some_and(|e| e == "json") {
                let base: Self = serde_json::from_str(&text)?;
                pairs = base.to_pairs();
            } else {
                pairs = parse_key_values(&text)?;
            }
        }
        pairs.extend(overrides.iter().cloned());
        Self::resolve(&pairs)
    }

    fn to_pairs(&self) -> Vec<(String, String)> {
        let opt = |x: Option<String>| x.unwrap_or_else(|| "auto".into());
        [
            ("preset", self.preset.to_string()),
            ("scheme", self.scheme.to_string()),
            ("eta0", format!("{:?}", self.eta0)),
            ("omega0", format!("{:?}", self.omega0)),
            ("T0", format!("{:?}", self.t0)),
            ("delta", format!("{:?}", self.delta)),
            ("N", self.n_chain.to_string()),
            ("local_dim", self.local_dim.to_string()),
            ("dt", format!("{:?}", self.dt)),
            ("t_final", format!("{:?}", self.t_final)),
            ("sv_threshold", format!("{:?}", self.sv_threshold)),
            ("max_bond", self.max_bond.to_string()),
            ("omega_max", opt(self.omega_max.map(|w| format!("{w:?}")))),
            ("quad_points", opt(self.quad_points.map(|q| q.to_string()))),
            ("record_stride", self.record_stride.to_string()),
            ("outdir", self.outdir.display().to_string()),
            ("seed", self.seed.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn system(&self) -> SpinBosonSystem {
        SpinBosonSystem::new(self.delta)
    }

    pub fn spectral_density(&self) -> Result<SpectralDensity> {
        SpectralDensity::drude(self.eta0 * self.delta, self.omega0 * self.delta)
    }

    pub fn weight(&self) -> Result<ThermalizedWeight> {
        ThermalizedWeight::new(self.spectral_density()?, self.t0 * self.delta, self.omega_max.map(|w| w * self.delta))
    }

    /// Chain for the configured bath. The polynomials do not depend on the
    /// overall coupling strength, so an uncoupled bath (`eta0 = 0`) keeps the
    /// chain of unit strength with κ_0 = 0.
    pub fn chain_coefficients(&self) -> Result<ChainCoefficients> {
        if self.eta0 == 0.0 {
            let unit = Self { eta0: 1.0, ..self.clone() };
            let mut coeffs = unit.chain_coefficients()?;
            coeffs.kappas[0] = 0.0;
            return Ok(coeffs);
        }
        chainmap::chain_coefficients(&self.weight()?, self.n_chain + 1, self.quad_points)
    }

    /// Propagation settings in absolute time units.
    pub fn scheme_config(&self) -> SchemeConfig {
        let unit = 1.0 / self.delta.abs();
        let mut cfg = SchemeConfig::new(
            self.scheme,
            self.n_chain,
            self.local_dim,
            self.dt * unit,
            self.t_final * std::f64::consts::PI * unit,
        );
        cfg.truncation = Truncation { sv_threshold: self.sv_threshold, max_bond: self.max_bond };
        cfg.record_stride = self.record_stride;
        cfg
    }

    /// Converts an absolute time to the reported unit tΔ/π.
    pub fn reported_time(&self, t: f64) -> f64 {
        t * self.delta.abs() / std::f64::consts::PI
    }

    pub fn with_scheme(&self, scheme: Scheme) -> Self {
        Self { scheme, ..self.clone() }
    }

    pub fn with_local_dim(&self, local_dim: usize) -> Self {
        Self { local_dim, ..self.clone() }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::config(key, format!("cannot parse `{v}` as {}", std::any::type_name::<T>())))
}

fn parse_optional<T: FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v.eq_ignore_ascii_case("auto") || v.eq_ignore_ascii_case("none") || v.is_empty() {
        Ok(None)
    } else {
        parse(key, v).map(Some)
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}", lineno + 1), format!("expected `key = value`, got `{line}`")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

/// Parses a `key=value` command-line override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| Error::config(s, "override must look like key=value"))
}
