//! Run configuration (TOML) and artifact output: every file carries the
//! SHA-256 of the resolved configuration and its full text.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::heat::{build_heat_problem, Kernel, KernelSpec, ScalarFn, SineGrid};
use crate::paths::{fmt17, HolderParams};
use crate::solver::{ProblemSpec, SolverConfig};
use crate::spectral::SpectralField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    pub n_steps: usize,
    pub n_modes: usize,
    /// physical quadrature nodes for the heat example
    pub quad_nodes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            n_steps: 256,
            n_modes: 16,
            quad_nodes: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelChoice {
    Zero,
    SinSinTanh,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialChoice {
    /// coefficients `2^{1-i}`
    Geometric,
    Zero,
    FirstMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub drift: ScalarFn,
    pub kernel: KernelChoice,
    pub kernel_amp: f64,
    /// CSV `x,y,value` for `kernel = "table"`; resolved against the config's directory.
    pub kernel_table: Option<PathBuf>,
    pub initial: InitialChoice,
    pub initial_scale: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            drift: ScalarFn::Tanh { scale: 1.0 },
            kernel: KernelChoice::SinSinTanh,
            kernel_amp: 0.1,
            kernel_table: None,
            initial: InitialChoice::Geometric,
            initial_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegrandChoice {
    /// `g = ω`, with `int_s^t ω dω = (ω(t)^2 - ω(s)^2)/2`
    Path,
    /// `g(r) = r`
    Time,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrateConfig {
    pub integrand: IntegrandChoice,
    pub constant: f64,
    pub s: f64,
    pub t: f64,
}

impl Default for IntegrateConfig {
    fn default() -> Self {
        Self {
            integrand: IntegrandChoice::Path,
            constant: 1.0,
            s: 0.0,
            t: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CocycleConfig {
    /// `(t, s)` pairs
    pub pairs: Vec<[f64; 2]>,
}

impl Default for CocycleConfig {
    fn default() -> Self {
        Self {
            pairs: vec![[0.25, 0.25], [0.5, 0.25]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UscConfig {
    pub t: f64,
    pub radii: Vec<f64>,
    pub m_per_radius: usize,
    pub perturb_driver: bool,
}

impl Default for UscConfig {
    fn default() -> Self {
        Self {
            t: 1.0,
            radii: vec![1e-1, 1e-2, 1e-3],
            m_per_radius: 10,
            perturb_driver: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub params: HolderParams,
    pub grid: GridConfig,
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    pub integrate: IntegrateConfig,
    pub cocycle: CocycleConfig,
    pub usc: UscConfig,
    /// Directory relative paths resolve against; not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            params: HolderParams::default(),
            grid: GridConfig::default(),
            problem: ProblemConfig::default(),
            solver: SolverConfig::default(),
            integrate: IntegrateConfig::default(),
            cocycle: CocycleConfig::default(),
            usc: UscConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed {} exceeds the TOML integer range", self.seed)));
        }
        self.params.validate().map_err(wrap)?;
        self.solver.validate().map_err(wrap)?;
        let g = &self.grid;
        if !(g.horizon > 0.0) || g.n_steps < 2 || g.n_modes == 0 || g.quad_nodes < g.n_modes {
            return Err(Error::Config(
                "grid needs horizon > 0, n_steps >= 2, n_modes > 0, quad_nodes >= n_modes".into(),
            ));
        }
        if self.problem.kernel == KernelChoice::Table && self.problem.kernel_table.is_none() {
            return Err(Error::Config("kernel = \"table\" needs kernel_table".into()));
        }
        let u = &self.usc;
        if u.radii.is_empty()
            || u.radii.iter().any(|r| !(*r > 0.0))
            || u.radii.windows(2).any(|w| w[1] >= w[0])
            || u.m_per_radius == 0
        {
            return Err(Error::Config("usc radii must be positive and decreasing, m_per_radius > 0".into()));
        }
        if !(self.integrate.s < self.integrate.t) {
            return Err(Error::Config("integrate needs s < t".into()));
        }
        Ok(())
    }

    /// Canonical TOML of the resolved configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn dt(&self) -> f64 {
        self.grid.horizon / self.grid.n_steps as f64
    }

    pub fn build_problem(&self) -> Result<ProblemSpec> {
        let g = &self.grid;
        let grid = Arc::new(SineGrid::new(g.n_modes, g.quad_nodes)?);
        let kernel = match self.problem.kernel {
            KernelChoice::Zero => KernelSpec::new(Kernel::Zero, grid)?,
            KernelChoice::SinSinTanh => KernelSpec::new(
                Kernel::SinSinTanh {
                    amp: self.problem.kernel_amp,
                },
                grid,
            )?,
            KernelChoice::Table => {
                let rel = self.problem.kernel_table.as_ref().expect("validated");
                KernelSpec::from_table_file(&self.base_dir.join(rel), grid)?
            }
        };
        build_heat_problem(self.problem.drift, kernel, self.params, g.horizon, g.n_steps, g.n_modes)
    }

    pub fn initial_value(&self) -> SpectralField {
        let n = self.grid.n_modes;
        let c = self.problem.initial_scale;
        match self.problem.initial {
            InitialChoice::Geometric => {
                SpectralField::new((0..n).map(|i| c * 0.5f64.powi(i as i32)).collect())
            }
            InitialChoice::Zero => SpectralField::zeros(n),
            InitialChoice::FirstMode => SpectralField::unit(n, 0).scaled(c),
        }
    }
}

/// Header lines (without comment markers) identifying an artifact.
pub fn header_lines(cfg: &RunConfig, kind: &str) -> Vec<String> {
    let mut lines = vec![
        format!("fracflow {} {kind}", env!("CARGO_PKG_VERSION")),
        format!("config-sha256 {}", cfg.hash()),
    ];
    lines.extend(cfg.canonical().lines().map(str::to_owned));
    lines
}

/// JSON with every non-integer number written as `{:.16e}`.
pub fn to_json_fixed(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    let pad = |out: &mut String, d: usize| {
        for _ in 0..d {
            out.push_str("  ");
        }
    };
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_i64() || n.is_u64() {
                out.push_str(&n.to_string());
            } else {
                out.push_str(&fmt17(n.as_f64().expect("finite")));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, item, depth + 1);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&serde_json::to_string(k).expect("key"));
                out.push_str(": ");
                write_value(out, item, depth + 1);
                if i + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, depth);
            out.push('}');
        }
    }
}

/// Wraps a report with the config hash and echo, in fixed-format JSON.
pub fn json_artifact<T: Serialize>(cfg: &RunConfig, kind: &str, report: &T) -> Result<String> {
    let body = serde_json::to_value(report).map_err(|e| Error::Config(e.to_string()))?;
    let wrapped = serde_json::json!({
        "header": header_lines(cfg, kind),
        "report": body,
    });
    Ok(to_json_fixed(&wrapped))
}
