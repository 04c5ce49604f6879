//! Experiment configuration: a JSON document with defaults for every field,
//! plus dotted `key=value` overrides applied before deserialization.
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mhd2d_core::initial_data::{Shape, TrigMode};
use mhd2d_core::Grid;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { nx: 64, ny: 64, lx: 2.0 * PI, ly: 2.0 * PI }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// `X₀` is the time-one flow of `transport`; needs a periodic box.
    Flow,
    /// `ψ₀ = ε·psi0`, companion potential by marching, `Y₀` by fixed point.
    Potential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub construction: Construction,
    pub amplitude: f64,
    pub transport: Shape,
    pub velocity: Shape,
    pub psi0: Shape,
    /// RK4 steps of the time-one flow.
    pub flow_steps: usize,
}

fn trig(modes: &[(i64, i64, f64, f64)]) -> Shape {
    Shape::Trig {
        modes: modes.iter().map(|&(m, n, amp, phase)| TrigMode { m, n, amp, phase }).collect(),
    }
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            construction: Construction::Flow,
            amplitude: 1e-3,
            transport: trig(&[(1, 1, 1.0, 0.2), (2, -1, 0.5, 1.0), (0, 1, 0.7, 0.4)]),
            velocity: trig(&[(1, 0, 1.0, 0.3), (1, 1, 0.6, 1.3), (0, 1, 0.5, 0.0)]),
            psi0: Shape::Gaussian { center: [PI, PI], width: 0.5 },
            flow_steps: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Steps between ledger records.
    pub record_every: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { dt: 0.01, t_final: 5.0, record_every: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Exponents {
    pub k: u32,
    pub s: f64,
    pub s1: f64,
    pub s2: f64,
}

impl Default for Exponents {
    fn default() -> Self {
        Exponents { k: 2, s: 0.5, s1: 1.5, s2: -0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub grid: GridConfig,
    pub initial: InitialConfig,
    pub time: TimeConfig,
    pub exponents: Exponents,
    /// Per-assertion overrides of the recipe tolerances.
    pub tolerances: BTreeMap<String, f64>,
    /// Defaults to `runs/<experiment>`.
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    /// Sample count of randomized suites and linear trajectories.
    pub samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: None,
            grid: GridConfig::default(),
            initial: InitialConfig::default(),
            time: TimeConfig::default(),
            exponents: Exponents::default(),
            tolerances: BTreeMap::new(),
            output_dir: None,
            seed: 0,
            samples: 100,
        }
    }
}

impl ExperimentConfig {
    /// Reads `path` (or starts from `{}`), applies `overrides`, then deserializes.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => Value::Object(Map::new()),
        };
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: ExperimentConfig = serde_json::from_value(doc).context("config schema violation")?;
        cfg.check_basic()?;
        Ok(cfg)
    }

    fn check_basic(&self) -> Result<()> {
        let t = &self.time;
        if !(t.dt > 0.0 && t.dt.is_finite()) || !(t.t_final > 0.0 && t.t_final.is_finite()) {
            bail!("time.dt and time.t_final must be positive");
        }
        if t.record_every == 0 || self.samples < 2 {
            bail!("time.record_every must be ≥ 1 and samples ≥ 2");
        }
        if !self.initial.amplitude.is_finite() {
            bail!("initial.amplitude must be finite");
        }
        self.grid()?;
        Ok(())
    }

    /// Parameter constraints of the global-existence functionals.
    pub fn check_functional_exponents(&self) -> Result<()> {
        let e = &self.exponents;
        if !(e.s1 > 1.0) {
            bail!("exponents.s1 = {} must exceed 1", e.s1);
        }
        if !(e.s2 > -1.0 && e.s2 < -0.5) {
            bail!("exponents.s2 = {} must lie in (−1, −1/2)", e.s2);
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = &self.grid;
        Ok(Grid::new(g.nx, g.ny, g.lx, g.ly)?)
    }

    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    pub fn output_dir(&self, experiment: &str) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("runs").join(experiment))
    }

    pub fn steps(&self) -> usize {
        (self.time.t_final / self.time.dt).round().max(1.0) as usize
    }
}

/// `a.b.c=value`; the value is parsed as JSON and falls back to a string.
pub fn apply_override(doc: &mut Value, item: &str) -> Result<()> {
    let (key, raw) = item.split_once('=').with_context(|| format!("override `{item}` is not key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key `{key}` has an empty segment");
    }
    let mut node = doc;
    for (n, part) in parts.iter().enumerate() {
        let Value::Object(map) = node else {
            bail!("override `{key}`: `{}` is not an object", parts[..n].join("."));
        };
        if n + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!()
}
