//! A 1-D Dirichlet heat equation on `(0, π)` with a Nemytskii drift
//! `F(u)[x] = f(u(x))` and an integral-kernel diffusion
//! `G(u)v[x] = int g(x, y, u(y)) v(y) dy`.
//!
//! Fields move between sine coefficients and `M` interior nodes
//! `x_p = pπ/(M+1)` by the discrete sine transform pair, which is exact for
//! fields with at most `M` modes.

use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracint::HsMatrix;
use crate::paths::{mode_rng, HolderParams};
use crate::solver::{Diffusion, Drift, ProblemSpec};
use crate::spectral::{SpectralField, SpectralOperator};

/// Sine basis `e_i(x) = sqrt(2/π) sin(i x)` sampled on `M` interior nodes.
#[derive(Debug, Clone)]
pub struct SineGrid {
    n_modes: usize,
    nodes: Vec<f64>,
    weight: f64,
    /// `basis[i][p] = e_{i+1}(x_p)`
    basis: Vec<Vec<f64>>,
}

impl SineGrid {
    pub fn new(n_modes: usize, m: usize) -> Result<Self> {
        if n_modes == 0 || m < n_modes {
            return Err(Error::param(format!(
                "sine grid needs 0 < n_modes <= M, got n_modes = {n_modes}, M = {m}"
            )));
        }
        let weight = PI / (m + 1) as f64;
        let nodes: Vec<f64> = (1..=m).map(|p| p as f64 * weight).collect();
        let c = (2.0 / PI).sqrt();
        let basis = (1..=n_modes)
            .map(|i| nodes.iter().map(|x| c * (i as f64 * x).sin()).collect())
            .collect();
        Ok(Self {
            n_modes,
            nodes,
            weight,
            basis,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Quadrature weight `π/(M+1)`.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Values `u(x_p)` of a coefficient vector.
    pub fn synthesize(&self, u: &SpectralField) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        for (c, row) in u.coeffs().iter().zip(&self.basis) {
            for (o, b) in out.iter_mut().zip(row) {
                *o += c * b;
            }
        }
        out
    }

    /// Coefficients `h sum_p v_p e_i(x_p)` of nodal values.
    pub fn project(&self, values: &[f64]) -> SpectralField {
        SpectralField::new(
            self.basis
                .iter()
                .map(|row| self.weight * row.iter().zip(values).map(|(b, v)| b * v).sum::<f64>())
                .collect(),
        )
    }

    /// Discrete `L^2(0, π)` norm of nodal values.
    pub fn l2_norm(&self, values: &[f64]) -> f64 {
        (self.weight * values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
}

/// Scalar nonlinearity `f` for the Nemytskii drift, with `|f(z)| <= c + L|z|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum ScalarFn {
    Zero,
    Identity,
    Linear { slope: f64 },
    Tanh { scale: f64 },
    Sin,
}

impl ScalarFn {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            ScalarFn::Zero => 0.0,
            ScalarFn::Identity => z,
            ScalarFn::Linear { slope } => slope * z,
            ScalarFn::Tanh { scale } => scale * z.tanh(),
            ScalarFn::Sin => z.sin(),
        }
    }

    /// `(c, L)` with `|f(z)| <= c + L|z|`; `L` is also a Lipschitz constant.
    pub fn growth(&self) -> (f64, f64) {
        match *self {
            ScalarFn::Zero => (0.0, 0.0),
            ScalarFn::Identity => (0.0, 1.0),
            ScalarFn::Linear { slope } => (0.0, slope.abs()),
            ScalarFn::Tanh { scale } => (0.0, scale.abs()),
            ScalarFn::Sin => (0.0, 1.0),
        }
    }
}

/// `F(u) = P f(u(.))`.
pub fn nemytskii_f(f: ScalarFn, grid: &SineGrid, u: &SpectralField) -> SpectralField {
    let vals: Vec<f64> = grid.synthesize(u).into_iter().map(|z| f.eval(z)).collect();
    grid.project(&vals)
}

#[derive(Debug, Clone)]
pub struct NemytskiiDrift {
    pub f: ScalarFn,
    pub grid: Arc<SineGrid>,
}

impl Drift for NemytskiiDrift {
    fn apply(&self, u: &SpectralField) -> SpectralField {
        nemytskii_f(self.f, &self.grid, u)
    }

    fn growth(&self) -> (f64, f64) {
        let (c, l) = self.f.growth();
        (c * PI.sqrt(), l)
    }
}

/// The kernel `g(x, y, z)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Zero,
    /// `amp sin(x) sin(y) tanh(z)`
    SinSinTanh { amp: f64 },
    /// `phi(x) psi(y)` with `phi = sin(a x)`, `psi = sin(b y)`; ignores `z`.
    Separable { a: f64, b: f64 },
    /// `table(x, y) tanh(z)` with `table` given on the quadrature nodes.
    Tabulated { table: Arc<Vec<Vec<f64>>> },
}

/// `g(x_p, y_q, z) = table[p][q] * factor(z)`, with `h E table` cached.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub kernel: Kernel,
    pub grid: Arc<SineGrid>,
    table: Arc<Vec<Vec<f64>>>,
    z_dependent: bool,
    /// `left[j][q] = h sum_p e_j(x_p) table[p][q]`
    left: Arc<Vec<Vec<f64>>>,
}

impl KernelSpec {
    pub fn new(kernel: Kernel, grid: Arc<SineGrid>) -> Result<Self> {
        let m = grid.nodes().len();
        let x = grid.nodes();
        let (table, z_dependent) = match &kernel {
            Kernel::Zero => (Arc::new(vec![vec![0.0; m]; m]), false),
            Kernel::SinSinTanh { amp } => (
                Arc::new(
                    x.iter()
                        .map(|xp| x.iter().map(|yq| amp * xp.sin() * yq.sin()).collect())
                        .collect(),
                ),
                true,
            ),
            Kernel::Separable { a, b } => (
                Arc::new(
                    x.iter()
                        .map(|xp| x.iter().map(|yq| (a * xp).sin() * (b * yq).sin()).collect())
                        .collect(),
                ),
                false,
            ),
            Kernel::Tabulated { table } => {
                if table.len() != m || table.iter().any(|r| r.len() != m) {
                    return Err(Error::param(format!("tabulated kernel must be {m} x {m}")));
                }
                if table.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::param("tabulated kernel has non-finite entries"));
                }
                (Arc::clone(table), true)
            }
        };
        let h = grid.weight();
        let left = grid
            .basis
            .par_iter()
            .map(|e| {
                let mut row = vec![0.0; m];
                for (ep, tp) in e.iter().zip(table.iter()) {
                    for (r, t) in row.iter_mut().zip(tp) {
                        *r += h * ep * t;
                    }
                }
                row
            })
            .collect();
        Ok(Self {
            kernel,
            grid,
            table,
            z_dependent,
            left: Arc::new(left),
        })
    }

    fn factor(&self, z: f64) -> f64 {
        if self.z_dependent {
            z.tanh()
        } else {
            1.0
        }
    }

    /// `g(x_p, y_q, z)` by node indices.
    pub fn eval(&self, p: usize, q: usize, z: f64) -> f64 {
        self.table[p][q] * self.factor(z)
    }

    /// Lipschitz profile `L(x_p)` with `|g(x, y, z1) - g(x, y, z2)| <= L(x)|z1 - z2|`.
    pub fn lipschitz_profile(&self) -> Vec<f64> {
        let x = self.grid.nodes();
        match &self.kernel {
            Kernel::Zero | Kernel::Separable { .. } => vec![0.0; x.len()],
            Kernel::SinSinTanh { amp } => x.iter().map(|x| amp.abs() * x.sin().abs()).collect(),
            Kernel::Tabulated { table } => table
                .iter()
                .map(|row| row.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
                .collect(),
        }
    }

    /// Quadrature value of `||L||_V`.
    pub fn lipschitz_norm(&self) -> f64 {
        self.grid.l2_norm(&self.lipschitz_profile())
    }

    /// Random triples `(x_p, y_q, z1, z2)` checked against the profile; returns
    /// the number of violations.
    pub fn spot_check_profile(&self, seed: u64, trials: usize) -> usize {
        let mut rng = mode_rng(seed, 0);
        let m = self.grid.nodes().len();
        let prof = self.lipschitz_profile();
        (0..trials)
            .filter(|_| {
                let p = rng.gen_range(0..m);
                let q = rng.gen_range(0..m);
                let z1: f64 = rng.gen_range(-5.0..5.0);
                let z2: f64 = rng.gen_range(-5.0..5.0);
                (self.eval(p, q, z1) - self.eval(p, q, z2)).abs() > prof[p] * (z1 - z2).abs() + 1e-14
            })
            .count()
    }

    /// Quadrature of `int int g(x, y, u(y))^2 dy dx`, which bounds `||G(u)||^2_{L_2(V)}`.
    pub fn parseval_bound_sq(&self, u: &SpectralField) -> f64 {
        let uy = self.grid.synthesize(u);
        let m = uy.len();
        let h = self.grid.weight();
        let s: f64 = (0..m)
            .into_par_iter()
            .map(|p| (0..m).map(|q| self.eval(p, q, uy[q]).powi(2)).sum::<f64>())
            .sum();
        h * h * s
    }

    /// Reads a kernel table from CSV rows `x,y,value` on any rectangular grid,
    /// bilinearly interpolated onto the quadrature nodes.
    pub fn read_table<R: Read>(input: R, grid: &SineGrid) -> Result<Vec<Vec<f64>>> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let get = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("bad kernel table row {:?}", rec)))
            };
            rows.push((get(0)?, get(1)?, get(2)?));
        }
        let uniq = |vals: Vec<f64>| -> Vec<f64> {
            let mut v = vals;
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let xs = uniq(rows.iter().map(|r| r.0).collect());
        let ys = uniq(rows.iter().map(|r| r.1).collect());
        if xs.len() < 2 || ys.len() < 2 || rows.len() != xs.len() * ys.len() {
            return Err(Error::Config(
                "kernel table must be a full rectangular grid with at least 2 x 2 points".into(),
            ));
        }
        let mut tab = vec![vec![f64::NAN; ys.len()]; xs.len()];
        for (x, y, v) in rows {
            let i = xs.binary_search_by(|a| a.total_cmp(&x)).expect("present");
            let j = ys.binary_search_by(|a| a.total_cmp(&y)).expect("present");
            tab[i][j] = v;
        }
        if tab.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::Config("kernel table has duplicate or missing points".into()));
        }
        let locate = |grid: &[f64], t: f64| -> (usize, f64) {
            let t = t.clamp(grid[0], grid[grid.len() - 1]);
            let k = grid.partition_point(|g| *g <= t).clamp(1, grid.len() - 1) - 1;
            (k, (t - grid[k]) / (grid[k + 1] - grid[k]))
        };
        let nodes = grid.nodes();
        Ok(nodes
            .iter()
            .map(|&x| {
                let (i, a) = locate(&xs, x);
                nodes
                    .iter()
                    .map(|&y| {
                        let (j, b) = locate(&ys, y);
                        (1.0 - a) * ((1.0 - b) * tab[i][j] + b * tab[i][j + 1])
                            + a * ((1.0 - b) * tab[i + 1][j] + b * tab[i + 1][j + 1])
                    })
                    .collect()
            })
            .collect())
    }

    pub fn from_table_file(path: &Path, grid: Arc<SineGrid>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let table = Self::read_table(file, &grid)?;
        Self::new(Kernel::Tabulated { table: Arc::new(table) }, grid)
    }
}

/// Matrix `(e_j, G(u) e_i)` by double quadrature.
pub fn kernel_g(spec: &KernelSpec, u: &SpectralField) -> HsMatrix {
    let grid = &spec.grid;
    let n = grid.n_modes();
    if matches!(spec.kernel, Kernel::Zero) {
        return HsMatrix::zeros(n);
    }
    let h = grid.weight();
    let weights: Vec<f64> = if spec.z_dependent {
        grid.synthesize(u).iter().map(|z| h * spec.factor(*z)).collect()
    } else {
        vec![h; grid.nodes().len()]
    };
    // (e_i weighted by the z-factor) on the y nodes
    let right: Vec<Vec<f64>> = grid
        .basis
        .iter()
        .map(|e| e.iter().zip(&weights).map(|(a, w)| a * w).collect())
        .collect();
    HsMatrix::from_fn(n, |j, i| {
        spec.left[j].iter().zip(&right[i]).map(|(a, b)| a * b).sum::<f64>()
    })
}

#[derive(Debug, Clone)]
pub struct KernelDiffusion {
    pub spec: KernelSpec,
    lipschitz: f64,
}

impl KernelDiffusion {
    pub fn new(spec: KernelSpec) -> Self {
        let lipschitz = spec.lipschitz_norm();
        Self { spec, lipschitz }
    }
}

impl Diffusion for KernelDiffusion {
    fn apply(&self, u: &SpectralField) -> HsMatrix {
        kernel_g(&self.spec, u)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// Default number of quadrature nodes.
pub const DEFAULT_NODES: usize = 256;

/// Heat problem on `(0, π)` with trace weights `q_i = i^{-2}` for the noise.
pub fn build_heat_problem(
    f: ScalarFn,
    kernel: KernelSpec,
    params: HolderParams,
    horizon: f64,
    n_steps: usize,
    n_modes: usize,
) -> Result<ProblemSpec> {
    let mut problems = Vec::new();
    if let Err(e) = params.validate() {
        problems.push(e.to_string());
    }
    if kernel.grid.n_modes() != n_modes {
        problems.push(format!(
            "kernel grid has {} modes, problem {n_modes}",
            kernel.grid.n_modes()
        ));
    }
    let bad = kernel.spot_check_profile(0, 1000);
    if bad > 0 {
        problems.push(format!("kernel violates its Lipschitz profile on {bad} of 1000 triples"));
    }
    let op = match SpectralOperator::laplacian_1d(n_modes, PI) {
        Ok(op) => Some(op),
        Err(e) => {
            problems.push(e.to_string());
            None
        }
    };
    if !problems.is_empty() {
        return Err(Error::param(problems.join("; ")));
    }
    let drift = NemytskiiDrift {
        f,
        grid: Arc::clone(&kernel.grid),
    };
    ProblemSpec::new(
        op.expect("checked"),
        Arc::new(drift),
        Arc::new(KernelDiffusion::new(kernel)),
        params,
        horizon,
        n_steps,
    )
}

/// The demo setup: `f = tanh`, `g = 0.1 sin(x) sin(y) tanh(z)`.
pub fn default_heat_problem(n_steps: usize, n_modes: usize) -> Result<ProblemSpec> {
    let grid = Arc::new(SineGrid::new(n_modes, DEFAULT_NODES)?);
    let kernel = KernelSpec::new(Kernel::SinSinTanh { amp: 0.1 }, grid)?;
    build_heat_problem(
        ScalarFn::Tanh { scale: 1.0 },
        kernel,
        HolderParams::default(),
        1.0,
        n_steps,
        n_modes,
    )
}

/// Demo initial value with coefficients `2^{1-i}`.
pub fn default_initial_value(n_modes: usize) -> SpectralField {
    SpectralField::new((0..n_modes).map(|i| 0.5f64.powi(i as i32)).collect())
}
