//! Run configuration: a TOML document with dotted `key = value` overrides.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::models::{BcpParams, ModelSpec};
use crate::schemes::SchemeKind;
use crate::solver::NewtonConfig;
use crate::transform::GFunction;

use super::adaptive::AdaptiveConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub t_final: f64,
    /// Fixed step, or the first step of an adaptive run.
    pub dt: f64,
    pub scheme: String,
    /// One G per potential, comma separated.
    pub g: String,
    /// `none` or `manufactured`.
    #[serde(default = "default_forcing")]
    pub forcing: String,
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub stabilization: StabilizationConfig,
    #[serde(default)]
    pub adaptive: Option<AdaptiveConfig>,
    #[serde(default)]
    pub newton: Option<NewtonSettings>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_forcing() -> String {
    "none".into()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `allen-cahn`, `cahn-hilliard`, `cahn-hilliard-log`, `mbe` or `bcp`.
    pub kind: String,
    pub eps2: Option<f64>,
    pub eps: Option<f64>,
    pub mobility: Option<f64>,
    pub theta: Option<f64>,
    pub eps_u: Option<f64>,
    pub eps_v: Option<f64>,
    pub sigma: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub ny: Option<usize>,
    pub x: [f64; 2],
    pub y: Option<[f64; 2]>,
    pub dealias: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 128,
            ny: None,
            x: [-PI, PI],
            y: None,
            dealias: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// `spinodal`, `bcp`, `mbe`, `manufactured` or `constant`.
    pub kind: String,
    pub mean: Option<f64>,
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilizationConfig {
    #[serde(default)]
    pub eps1: f64,
    #[serde(default)]
    pub eps2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory relative to the output root.
    pub dir: String,
    /// Write a snapshot every this many steps; the final state is always written.
    pub snapshot_every: usize,
    /// Record diagnostics every this many steps; 0 turns diagnostics off.
    pub diag_every: usize,
    /// Write files at all; off for in-memory runs.
    pub write: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "run".into(),
            snapshot_every: 1000,
            diag_every: 1,
            write: true,
        }
    }
}

/// Sets `table[a][b]... = value` for a dotted key, creating sections.
pub fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').map(str::trim).collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad key {key:?}")));
    }
    let (last, sections) = parts.split_last().unwrap();
    let mut cur = table;
    for s in sections {
        let entry = cur.entry(s.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{key:?}: {s:?} is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parses `key=value`; the value is read as TOML and falls back to a bare string.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {s:?} is not key=value")))?;
    let v = v.trim();
    let value = match format!("v = {v}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => Value::String(v.to_string()),
    };
    Ok((k.trim().to_string(), value))
}

/// Recursively overlays `top` onto `base`.
pub fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Preset for `gsav bcp`: the block-copolymer annealing run.
pub fn bcp_preset() -> Table {
    r#"
t_final = 4.0
dt = 1e-5
scheme = "multi-cn"
g = "exp:10000"
[model]
kind = "bcp"
[grid]
n = 64
x = [-1.0, 1.0]
[initial]
kind = "bcp"
[output]
dir = "bcp"
snapshot_every = 50000
diag_every = 100
"#
    .parse()
    .expect("preset parses")
}

/// Preset for `gsav mbe`: thin-film coarsening on `[0, 2π]²`.
pub fn mbe_preset() -> Table {
    format!(
        r#"
t_final = 100.0
dt = 1e-2
scheme = "second-bdf2"
g = "tanh:10000"
[model]
kind = "mbe"
eps = 0.03
mobility = 1.0
[grid]
n = 128
x = [0.0, {two_pi:e}]
[initial]
kind = "mbe"
amplitude = 0.001
[output]
dir = "mbe"
snapshot_every = 1000
diag_every = 10
"#,
        two_pi = 2.0 * PI
    )
    .parse()
    .expect("preset parses")
}

impl RunConfig {
    pub fn from_table(table: Table) -> Result<Self> {
        let cfg: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        Self::from_table(s.parse::<Table>().map_err(|e| Error::Config(e.to_string()))?)
    }

    /// Reads `path` over `base` and applies `key=value` overrides.
    pub fn load(path: Option<&Path>, base: Table, overrides: &[String]) -> Result<Self> {
        let mut table = base;
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)?;
            let file: Table = text
                .parse()
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            merge(&mut table, file);
        }
        for o in overrides {
            let (k, v) = parse_override(o)?;
            set_dotted(&mut table, &k, v)?;
        }
        Self::from_table(table)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final = {} must be nonnegative", self.t_final));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if self.output.snapshot_every == 0 {
            return bad("output.snapshot_every must be at least 1".into());
        }
        if !matches!(self.forcing.as_str(), "none" | "manufactured") {
            return bad(format!("unknown forcing {:?}", self.forcing));
        }
        if let Some(a) = &self.adaptive {
            a.validate()?;
            if !self.scheme_kind()?.supports_variable_step() {
                return bad(format!(
                    "adaptive stepping needs a Crank-Nicolson scheme, not {}",
                    self.scheme
                ));
            }
        }
        self.scheme_kind()?;
        self.g_list()?;
        self.grid()?;
        self.newton()?;
        Ok(())
    }

    pub fn scheme_kind(&self) -> Result<SchemeKind> {
        let k: SchemeKind = self.scheme.parse()?;
        let k = match k {
            SchemeKind::StabilizedCn { .. } => SchemeKind::StabilizedCn {
                eps1: self.stabilization.eps1,
                eps2: self.stabilization.eps2,
            },
            k => k,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn g_list(&self) -> Result<Vec<GFunction>> {
        self.g.split(',').map(str::parse).collect()
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = &self.grid;
        let x = (g.x[0], g.x[1]);
        let y = g.y.map(|y| (y[0], y[1])).unwrap_or(x);
        Grid::new(g.n, g.ny.unwrap_or(g.n), x, y)
    }

    pub fn newton(&self) -> Result<NewtonConfig> {
        let cfg = match self.newton {
            Some(n) => NewtonConfig {
                tol: n.tol,
                max_iter: n.max_iter,
                ..NewtonConfig::default()
            },
            None => NewtonConfig::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model(&self) -> Result<ModelSpec> {
        let m = &self.model;
        let eps2 = m.eps2.unwrap_or(0.01);
        let mob = m.mobility.unwrap_or(1.0);
        match m.kind.as_str() {
            "allen-cahn" => ModelSpec::allen_cahn(eps2),
            "cahn-hilliard" => ModelSpec::cahn_hilliard(eps2, mob),
            "cahn-hilliard-log" => ModelSpec::cahn_hilliard_log(eps2, m.theta.unwrap_or(3.0), mob),
            "mbe" => ModelSpec::mbe(m.eps.unwrap_or(0.03), mob),
            "bcp" => {
                let d = BcpParams::default();
                ModelSpec::bcp(&BcpParams {
                    eps_u: m.eps_u.unwrap_or(d.eps_u),
                    eps_v: m.eps_v.unwrap_or(d.eps_v),
                    sigma: m.sigma.unwrap_or(d.sigma),
                    alpha: m.alpha.unwrap_or(d.alpha),
                    beta: m.beta.unwrap_or(d.beta),
                    gamma: m.gamma.unwrap_or(d.gamma),
                    m_u: m.mobility.unwrap_or(d.m_u),
                    m_v: m.mobility.unwrap_or(d.m_v),
                })
            }
            other => Err(Error::Config(format!("unknown model {other:?}"))),
        }
    }
}
