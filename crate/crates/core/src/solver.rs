//! The mild-solution operator
//! `T(u, ω, u0)(t) = S(t)u0 + int_0^t S(t-r)F(u(r)) dr + int_0^t S(t-r)G(u(r)) dω(r)`
//! on a uniform grid, and its fixed points.
//!
//! The drift integral integrates `e^{-λ_j (t-r)}` exactly against the
//! piecewise-linear interpolant of `F(u(r))`; the noise integral is the
//! pathwise integral of `r -> S(t-r) G(u(r))` from [`crate::fracint`].
//! Fixed points are found by Picard iteration from several starting paths,
//! with convergence measured in the weighted norm `||.||_{β,β;ρ}`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracint::{semigroup_convolution, HsMatrix};
use crate::paths::{
    holder_norm_bb, holder_seminorm_full, mode_rng, weighted_holder_norm, wiener_shift, Driver,
    FbmSampler, HolderParams, SampledPath, SamplerMethod,
};
use crate::spectral::{SpectralField, SpectralOperator};

/// Drift `F: V -> V` with declared growth `||F(u)|| <= c_F + L_F ||u||`.
pub trait Drift: Send + Sync + fmt::Debug {
    fn apply(&self, u: &SpectralField) -> SpectralField;
    /// `(c_F, L_F)`.
    fn growth(&self) -> (f64, f64);
}

/// Diffusion `G: V -> L_2(V)` with declared Lipschitz constant `L_G`.
pub trait Diffusion: Send + Sync + fmt::Debug {
    fn apply(&self, u: &SpectralField) -> HsMatrix;
    fn lipschitz(&self) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct ZeroDrift;

impl Drift for ZeroDrift {
    fn apply(&self, u: &SpectralField) -> SpectralField {
        SpectralField::zeros(u.len())
    }
    fn growth(&self) -> (f64, f64) {
        (0.0, 0.0)
    }
}

/// `F(u) = scale * u`.
#[derive(Debug, Clone, Copy)]
pub struct LinearDrift(pub f64);

impl Drift for LinearDrift {
    fn apply(&self, u: &SpectralField) -> SpectralField {
        u.scaled(self.0)
    }
    fn growth(&self) -> (f64, f64) {
        (0.0, self.0.abs())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ZeroDiffusion;

impl Diffusion for ZeroDiffusion {
    fn apply(&self, u: &SpectralField) -> HsMatrix {
        HsMatrix::zeros(u.len())
    }
    fn lipschitz(&self) -> f64 {
        0.0
    }
}

/// Additive noise: `G(u) = g` for every `u`.
#[derive(Debug, Clone)]
pub struct ConstantDiffusion(pub HsMatrix);

impl Diffusion for ConstantDiffusion {
    fn apply(&self, _u: &SpectralField) -> HsMatrix {
        self.0.clone()
    }
    fn lipschitz(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub operator: SpectralOperator,
    pub drift: Arc<dyn Drift>,
    pub diffusion: Arc<dyn Diffusion>,
    pub params: HolderParams,
    pub horizon: f64,
    pub n_steps: usize,
}

impl ProblemSpec {
    pub fn new(
        operator: SpectralOperator,
        drift: Arc<dyn Drift>,
        diffusion: Arc<dyn Diffusion>,
        params: HolderParams,
        horizon: f64,
        n_steps: usize,
    ) -> Result<Self> {
        params.validate()?;
        if !(horizon > 0.0) || n_steps == 0 {
            return Err(Error::param("problem needs horizon > 0 and n_steps > 0"));
        }
        Ok(Self {
            operator,
            drift,
            diffusion,
            params,
            horizon,
            n_steps,
        })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn n_modes(&self) -> usize {
        self.operator.n_modes()
    }

    /// `c_G = ||G(0)||_{L_2(V)}`.
    pub fn c_g(&self) -> f64 {
        self.diffusion.apply(&SpectralField::zeros(self.n_modes())).hs_norm()
    }

    /// Spot-checks the declared growth of `F` and Lipschitz constant of `G` on
    /// random fields.
    pub fn spot_check(&self, seed: u64, trials: usize) -> ConstantCheck {
        let n = self.n_modes();
        let mut rng = mode_rng(seed, u64::MAX);
        let field = |rng: &mut rand_chacha::ChaCha8Rng| {
            let radius = 10f64.powf(rng.gen_range(-2.0..1.0));
            let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            SpectralField::new(raw).scaled(radius / (n as f64).sqrt())
        };
        let (c_f, l_f) = self.drift.growth();
        let l_g = self.diffusion.lipschitz();
        let mut check = ConstantCheck::default();
        for _ in 0..trials {
            let u = field(&mut rng);
            let v = field(&mut rng);
            let fu = self.drift.apply(&u).norm();
            let bound = c_f + l_f * u.norm();
            check.max_growth_ratio = check.max_growth_ratio.max(fu / bound.max(f64::MIN_POSITIVE));
            if fu > bound * (1.0 + 1e-9) + 1e-12 {
                check.growth_violations += 1;
            }
            let dg = self.diffusion.apply(&u).hs_distance(&self.diffusion.apply(&v));
            let lip = l_g * u.distance(&v);
            check.max_lipschitz_ratio = check.max_lipschitz_ratio.max(dg / lip.max(f64::MIN_POSITIVE));
            if dg > lip * (1.0 + 1e-9) + 1e-12 {
                check.lipschitz_violations += 1;
            }
        }
        check.trials = trials;
        check
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ConstantCheck {
    pub trials: usize,
    pub growth_violations: usize,
    pub lipschitz_violations: usize,
    pub max_growth_ratio: f64,
    pub max_lipschitz_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Fixed weight; `None` selects it adaptively.
    pub rho: Option<f64>,
    pub fp_tol: f64,
    pub max_iters: usize,
    pub n_starts: usize,
    pub distinct_tol: f64,
    /// Seed for the randomized starting paths.
    pub seed: u64,
    /// Amplitude of randomized starts relative to `1 + ||u0||`.
    pub perturbation: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: None,
            fp_tol: 1e-8,
            max_iters: 200,
            n_starts: 8,
            distinct_tol: 1e-4,
            seed: 0,
            perturbation: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fp_tol > 0.0) || !(self.distinct_tol > self.fp_tol) {
            return Err(Error::param("solver needs fp_tol > 0 and distinct_tol > fp_tol"));
        }
        if self.max_iters == 0 || self.n_starts == 0 {
            return Err(Error::param("solver needs max_iters > 0 and n_starts > 0"));
        }
        if let Some(r) = self.rho {
            if !(r >= 0.0) {
                return Err(Error::param("rho must be >= 0"));
            }
        }
        Ok(())
    }
}

/// Largest weight tried by the adaptive selection.
pub const MAX_RHO: f64 = 65536.0;

/// Precomputed semigroup factors for one grid.
#[derive(Debug, Clone)]
struct Propagator {
    /// `decay[j][p] = exp(-λ_j p dt)`
    decay: Vec<Vec<f64>>,
    /// exact moments of `e^{-λ (h - x)}` against the two hat functions of a cell
    w_left: Vec<f64>,
    w_right: Vec<f64>,
}

/// `(1 - e^{-x}(1 + x)) / x^2` without cancellation.
fn hat_moment(x: f64) -> f64 {
    if x < 1e-2 {
        // sum_{k>=2} (-1)^k (k-1) x^{k-2} / k!
        let mut sum = 0.0;
        let mut fact = 1.0;
        for k in 2..12 {
            fact *= k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * (k - 1) as f64 * x.powi(k - 2) / fact;
        }
        sum
    } else {
        (1.0 - (-x).exp() * (1.0 + x)) / (x * x)
    }
}

/// `(1 - e^{-x}) / x`.
fn flat_moment(x: f64) -> f64 {
    if x < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

impl Propagator {
    fn new(op: &SpectralOperator, dt: f64, n_steps: usize) -> Self {
        let decay = op
            .eigenvalues()
            .iter()
            .map(|l| (0..=n_steps).map(|p| (-l * p as f64 * dt).exp()).collect())
            .collect();
        let mut w_left = Vec::new();
        let mut w_right = Vec::new();
        for &l in op.eigenvalues() {
            let x = l * dt;
            // int_0^h e^{-λ(h-x)} (x/h) dx and int_0^h e^{-λ(h-x)} (1 - x/h) dx
            let right = dt * (flat_moment(x) - hat_moment(x));
            let left = dt * flat_moment(x) - right;
            w_left.push(left);
            w_right.push(right);
        }
        Self {
            decay,
            w_left,
            w_right,
        }
    }
}

/// The operator `T(., ω, u0)` for a fixed driver and initial value.
pub struct MildOperator<'a> {
    spec: &'a ProblemSpec,
    omega: &'a SampledPath,
    u0: &'a SpectralField,
    prop: Propagator,
}

impl<'a> MildOperator<'a> {
    pub fn new(spec: &'a ProblemSpec, omega: &'a SampledPath, u0: &'a SpectralField) -> Result<Self> {
        spec.params.validate()?;
        if omega.n_modes() != spec.n_modes() || u0.len() != spec.n_modes() {
            return Err(Error::GridMismatch(format!(
                "operator has {} modes, driver {}, initial value {}",
                spec.n_modes(),
                omega.n_modes(),
                u0.len()
            )));
        }
        if (omega.dt() - spec.dt()).abs() > 1e-12 * spec.dt() {
            return Err(Error::GridMismatch(format!(
                "driver dt {} differs from problem dt {}",
                omega.dt(),
                spec.dt()
            )));
        }
        if omega.t0().abs() > 1e-12 {
            return Err(Error::GridMismatch("driver must start at time 0".into()));
        }
        Ok(Self {
            spec,
            omega,
            u0,
            prop: Propagator::new(&spec.operator, omega.dt(), omega.n_steps()),
        })
    }

    pub fn apply(&self, u: &SampledPath) -> Result<SampledPath> {
        if !u.same_grid(self.omega) || u.n_modes() != self.spec.n_modes() {
            return Err(Error::GridMismatch(
                "candidate path and driver must share the grid".into(),
            ));
        }
        let n = self.omega.n_steps();
        let modes = self.spec.n_modes();
        let (f_vals, g_vals): (Vec<SpectralField>, Vec<HsMatrix>) = u
            .values()
            .par_iter()
            .map(|v| (self.spec.drift.apply(v), self.spec.diffusion.apply(v)))
            .unzip();
        let noise = semigroup_convolution(&self.prop.decay, &g_vals, self.omega);
        let mut drift = vec![0.0; modes];
        let mut out = Vec::with_capacity(n + 1);
        for k in 0..=n {
            if k > 0 {
                for (j, d) in drift.iter_mut().enumerate() {
                    *d = self.prop.decay[j][1] * *d
                        + self.prop.w_left[j] * f_vals[k - 1][j]
                        + self.prop.w_right[j] * f_vals[k][j];
                }
            }
            let v: Vec<f64> = (0..modes)
                .map(|j| self.prop.decay[j][k] * self.u0[j] + drift[j] + noise[k][j])
                .collect();
            out.push(SpectralField::new(v));
        }
        // the mild formula gives u0 exactly at t = 0
        out[0] = self.u0.clone();
        SampledPath::new(0.0, self.omega.dt(), out)
    }
}

/// `T(u, ω, u0)`.
pub fn apply_t(
    u: &SampledPath,
    omega: &SampledPath,
    u0: &SpectralField,
    spec: &ProblemSpec,
) -> Result<SampledPath> {
    MildOperator::new(spec, omega, u0)?.apply(u)
}

/// `S(t_k) u0` on the grid of `omega`.
pub fn free_evolution(spec: &ProblemSpec, u0: &SpectralField, n_steps: usize, dt: f64) -> Result<SampledPath> {
    let values = (0..=n_steps)
        .map(|k| spec.operator.semigroup_apply(k as f64 * dt, u0))
        .collect::<Result<Vec<_>>>()?;
    SampledPath::new(0.0, dt, values)
}

fn path_difference(a: &SampledPath, b: &SampledPath) -> SampledPath {
    let values = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    SampledPath::new(a.t0(), a.dt(), values).expect("same grid")
}

/// `||u - v||_{β,β;ρ}`.
pub fn weighted_distance(u: &SampledPath, v: &SampledPath, beta: f64, rho: f64) -> f64 {
    weighted_holder_norm(&path_difference(u, v), beta, rho).expect("rho >= 0")
}

/// Finite set of numerically found fixed points sharing one initial value.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionSet {
    pub elements: Vec<SampledPath>,
    pub residuals: Vec<f64>,
    /// Index of the starting path each element came from.
    pub provenance: Vec<usize>,
}

impl SolutionSet {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `{u(t_k) : u in set}`.
    pub fn evaluate(&self, k: usize) -> Vec<SpectralField> {
        self.elements.iter().map(|u| u.value(k).clone()).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub rho: f64,
    /// `(rho, measured factor)` for every weight tried.
    pub rho_trace: Vec<(f64, f64)>,
    /// Largest ratio `||Tu - Tv||_ρ / ||u - v||_ρ` over probe pairs and iterates.
    pub contraction_factor: f64,
    /// Largest residual ratio between successive iterates.
    pub max_residual_ratio: f64,
    pub residual_traces: Vec<Vec<f64>>,
    pub converged_starts: Vec<usize>,
    pub ball_radius: f64,
    pub weighted_norms: Vec<f64>,
    pub in_ball: Vec<bool>,
    pub solutions: SolutionSet,
}

fn starting_paths(
    spec: &ProblemSpec,
    u0: &SpectralField,
    omega: &SampledPath,
    cfg: &SolverConfig,
) -> Result<Vec<SampledPath>> {
    let n = omega.n_steps();
    let dt = omega.dt();
    let modes = spec.n_modes();
    let mut starts = vec![SampledPath::new(0.0, dt, vec![u0.clone(); n + 1])?];
    if cfg.n_starts > 1 {
        starts.push(free_evolution(spec, u0, n, dt)?);
    }
    if cfg.n_starts > 2 {
        let base = starts[1].clone();
        let sampler = FbmSampler::new(0.9, n, dt, SamplerMethod::Auto)?;
        let amp = cfg.perturbation * (1.0 + u0.norm());
        for s in 2..cfg.n_starts {
            let seed = cfg.seed ^ (s as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let series: Vec<Vec<f64>> = (0..modes)
                .map(|i| sampler.sample_values(seed, i as u64))
                .collect();
            let values = (0..=n)
                .map(|k| {
                    let mut v = base.value(k).clone();
                    for (i, ser) in series.iter().enumerate() {
                        v.coeffs_mut()[i] += amp * ser[k] / (i + 1) as f64;
                    }
                    v
                })
                .collect();
            starts.push(SampledPath::new(0.0, dt, values)?);
        }
    }
    Ok(starts)
}

struct StartRun {
    trace: Vec<f64>,
    ratio: f64,
    accepted: Option<(SampledPath, f64)>,
}

/// Fixed points of `T(., ω, u0)` on the grid of `omega`.
pub fn solve_mild(
    u0: &SpectralField,
    omega: &SampledPath,
    spec: &ProblemSpec,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    let op = MildOperator::new(spec, omega, u0)?;
    let beta = spec.params.beta;
    let starts = starting_paths(spec, u0, omega, cfg)?;
    let images = starts
        .par_iter()
        .map(|s| op.apply(s))
        .collect::<Result<Vec<_>>>()?;

    // probe pairs: every pair of starts, plus (T u_0, u_0)
    let second = op.apply(&images[0])?;
    let mut probes: Vec<(SampledPath, SampledPath, SampledPath, SampledPath)> = Vec::new();
    for a in 0..starts.len() {
        for b in a + 1..starts.len() {
            probes.push((starts[a].clone(), starts[b].clone(), images[a].clone(), images[b].clone()));
        }
    }
    probes.push((images[0].clone(), starts[0].clone(), second, images[0].clone()));
    let diffs: Vec<(SampledPath, SampledPath)> = probes
        .iter()
        .map(|(u, v, tu, tv)| (path_difference(u, v), path_difference(tu, tv)))
        .collect();
    let factor_at = |rho: f64| -> f64 {
        diffs
            .iter()
            .filter_map(|(d, td)| {
                let den = weighted_holder_norm(d, beta, rho).ok()?;
                (den > 0.0).then(|| weighted_holder_norm(td, beta, rho).unwrap_or(0.0) / den)
            })
            .fold(0.0, f64::max)
    };
    let mut rho_trace = Vec::new();
    let rho = match cfg.rho {
        Some(r) => {
            rho_trace.push((r, factor_at(r)));
            r
        }
        None => {
            let mut r = 1.0;
            loop {
                let q = factor_at(r);
                rho_trace.push((r, q));
                if q < 0.5 {
                    break r;
                }
                if r >= MAX_RHO {
                    return Err(Error::NoContraction {
                        max_rho: MAX_RHO,
                        best_factor: rho_trace.iter().map(|x| x.1).fold(f64::INFINITY, f64::min),
                    });
                }
                r *= 2.0;
            }
        }
    };
    let probe_factor = rho_trace.last().map(|x| x.1).unwrap_or(0.0);
    log::debug!("rho = {rho}, probe contraction factor {probe_factor}");

    let runs: Vec<StartRun> = starts
        .into_par_iter()
        .zip(images.into_par_iter())
        .map(|(mut u, mut tu)| -> Result<StartRun> {
            let mut trace = Vec::new();
            let mut ratio: f64 = 0.0;
            for _ in 0..cfg.max_iters {
                let r = weighted_distance(&tu, &u, beta, rho);
                if let Some(prev) = trace.last() {
                    if *prev > 0.0 {
                        ratio = ratio.max(r / prev);
                    }
                }
                trace.push(r);
                if r < cfg.fp_tol {
                    return Ok(StartRun {
                        trace,
                        ratio,
                        accepted: Some((u, r)),
                    });
                }
                u = tu;
                tu = op.apply(&u)?;
            }
            Ok(StartRun {
                trace,
                ratio,
                accepted: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let residual_traces: Vec<Vec<f64>> = runs.iter().map(|r| r.trace.clone()).collect();
    let mut set = SolutionSet {
        elements: Vec::new(),
        residuals: Vec::new(),
        provenance: Vec::new(),
    };
    let mut converged_starts = Vec::new();
    let mut max_ratio: f64 = 0.0;
    for (idx, run) in runs.into_iter().enumerate() {
        max_ratio = max_ratio.max(run.ratio);
        if let Some((u, res)) = run.accepted {
            converged_starts.push(idx);
            let distinct = set
                .elements
                .iter()
                .all(|e| holder_norm_bb(&path_difference(e, &u), beta) > cfg.distinct_tol);
            if distinct {
                set.elements.push(u);
                set.residuals.push(res);
                set.provenance.push(idx);
            }
        }
    }
    if set.is_empty() {
        return Err(Error::NonConvergence {
            max_iters: cfg.max_iters,
            n_starts: cfg.n_starts,
            residual_traces,
        });
    }
    // c_S = sup_t e^{-ρt} ||S(t)||_{L(V)} = 1 for the diagonal semigroup
    let c_s = 1.0;
    let ball_radius = 1.0 + 2.0 * c_s * u0.norm();
    let weighted_norms: Vec<f64> = set
        .elements
        .iter()
        .map(|u| weighted_holder_norm(u, beta, rho).expect("rho >= 0"))
        .collect();
    let in_ball = weighted_norms.iter().map(|n| *n <= ball_radius).collect();
    Ok(SolveReport {
        rho,
        rho_trace,
        contraction_factor: probe_factor.max(max_ratio),
        max_residual_ratio: max_ratio,
        residual_traces,
        converged_starts,
        ball_radius,
        weighted_norms,
        in_ball,
        solutions: set,
    })
}

/// `||u(t)||_{V_δ}` at a grid time `t > 0`, for `δ in [0, β')`.
pub fn smoothing_norm(u: &SampledPath, spec: &ProblemSpec, t: f64, delta: f64) -> Result<f64> {
    if !(delta >= 0.0 && delta < spec.params.beta_prime) {
        return Err(Error::param(format!(
            "delta must lie in [0, beta' = {}), got {delta}",
            spec.params.beta_prime
        )));
    }
    if !(t > 0.0) {
        return Err(Error::param("smoothing norm needs t > 0"));
    }
    let k = u.index_of(t)?;
    spec.operator.frac_power_norm(delta, u.value(k))
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothingProfile {
    pub delta: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// Smallest `c` with
    /// `norm <= t^{-δ}||u0|| + c (t^{β'-δ}|||ω||| + t^{1-δ})(1 + ||u||_{β,β})` on the grid.
    pub measured_c: f64,
}

pub fn smoothing_profile(
    u: &SampledPath,
    omega: &SampledPath,
    spec: &ProblemSpec,
    delta: f64,
) -> Result<SmoothingProfile> {
    let p = &spec.params;
    let w = holder_seminorm_full(omega, p.beta_prime);
    let unorm = holder_norm_bb(u, p.beta);
    let u0 = u.value(0).norm();
    let mut times = Vec::new();
    let mut norms = Vec::new();
    let mut c: f64 = 0.0;
    for k in 1..=u.n_steps() {
        let t = u.time(k);
        let v = smoothing_norm(u, spec, t, delta)?;
        let excess = v - t.powf(-delta) * u0;
        let shape = (t.powf(p.beta_prime - delta) * w + t.powf(1.0 - delta)) * (1.0 + unorm);
        if excess > 0.0 && shape > 0.0 {
            c = c.max(excess / shape);
        }
        times.push(t);
        norms.push(v);
    }
    Ok(SmoothingProfile {
        delta,
        times,
        norms,
        measured_c: c,
    })
}

/// Pastes `u2` (solved from `u1`'s final value) after `u1`.
pub fn concatenate(u1: &SampledPath, u2: &SampledPath) -> Result<SampledPath> {
    if (u1.dt() - u2.dt()).abs() > 1e-12 * u1.dt() || u1.n_modes() != u2.n_modes() {
        return Err(Error::GridMismatch("concatenated paths must share dt and modes".into()));
    }
    let gap = u1.last().distance(u2.value(0));
    if gap > 1e-12 {
        return Err(Error::EndpointMismatch(gap));
    }
    let mut values = u1.values().to_vec();
    values.extend_from_slice(&u2.values()[1..]);
    SampledPath::new(u1.t0(), u1.dt(), values)
}

#[derive(Debug, Clone, Serialize)]
pub struct TranslateReport {
    pub shift_steps: usize,
    pub residual: f64,
}

/// Residual of `v = u(. + s)` as a fixed point of `T(., θ_s ω, u(s))` on `[0, T - s]`.
pub fn translate_check(
    u: &SampledPath,
    shift_steps: usize,
    omega: &Driver,
    spec: &ProblemSpec,
    rho: f64,
) -> Result<TranslateReport> {
    if shift_steps + 1 > u.n_steps() {
        return Err(Error::OutsideWindow {
            time: u.time(shift_steps.min(u.n_steps() + 1)),
            start: u.t0(),
            end: u.t_end(),
        });
    }
    let v = u.restrict(shift_steps, u.n_steps())?.rebased(0.0);
    let shifted = wiener_shift(omega, shift_steps as isize)?;
    let drv = shifted.truncated(v.n_steps())?;
    let tv = apply_t(&v, &drv, v.value(0), spec)?;
    Ok(TranslateReport {
        shift_steps,
        residual: weighted_distance(&tv, &v, spec.params.beta, rho),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformBound {
    pub runs: usize,
    pub failures: usize,
    pub max_initial_norm: f64,
    /// largest `|||ω|||_{β'}` among the drivers
    pub max_driver_seminorm: f64,
    /// empirical `C`: the largest `||u||_{β,β}` over all solutions found
    pub max_solution_norm: f64,
}

/// Solves for every pair of initial value and driver and reports the largest
/// solution norm.
pub fn uniform_bound(
    spec: &ProblemSpec,
    cfg: &SolverConfig,
    initial_values: &[SpectralField],
    drivers: &[SampledPath],
) -> UniformBound {
    let beta = spec.params.beta;
    let pairs: Vec<(&SpectralField, &SampledPath)> = initial_values
        .iter()
        .flat_map(|u0| drivers.iter().map(move |w| (u0, w)))
        .collect();
    let norms: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|(u0, w)| {
            solve_mild(u0, w, spec, cfg).ok().map(|rep| {
                rep.solutions
                    .elements
                    .iter()
                    .map(|u| holder_norm_bb(u, beta))
                    .fold(0.0, f64::max)
            })
        })
        .collect();
    UniformBound {
        runs: pairs.len(),
        failures: norms.iter().filter(|n| n.is_none()).count(),
        max_initial_norm: initial_values.iter().map(|u| u.norm()).fold(0.0, f64::max),
        max_driver_seminorm: drivers
            .iter()
            .map(|w| holder_seminorm_full(w, spec.params.beta_prime))
            .fold(0.0, f64::max),
        max_solution_norm: norms.iter().flatten().fold(0.0, |a: f64, b| a.max(*b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_spec(lambda: f64, drift: Arc<dyn Drift>, diffusion: Arc<dyn Diffusion>, n: usize) -> ProblemSpec {
        let op = SpectralOperator::new(vec![lambda], vec![1.0]).unwrap();
        ProblemSpec::new(op, drift, diffusion, HolderParams::default(), 1.0, n).unwrap()
    }

    fn smooth_driver(n: usize) -> SampledPath {
        let dt = 1.0 / n as f64;
        SampledPath::from_scalar(0.0, dt, (0..=n).map(|k| (3.0 * k as f64 * dt).sin()).collect()).unwrap()
    }

    #[test]
    fn moments_are_exact() {
        // against direct quadrature of e^{-λ(h-x)} against the hats
        for &(l, h) in &[(1.0, 0.01), (256.0, 1.0 / 256.0), (1e-6, 0.1), (50.0, 0.5)] {
            let m = 200_000;
            let (mut left, mut right) = (0.0, 0.0);
            for i in 0..m {
                let x = (i as f64 + 0.5) * h / m as f64;
                let e = (-l * (h - x)).exp() * h / m as f64;
                left += e * (1.0 - x / h);
                right += e * x / h;
            }
            let op = SpectralOperator::new(vec![l], vec![1.0]).unwrap();
            let p = Propagator::new(&op, h, 1);
            assert_relative_eq!(p.w_left[0], left, max_relative = 1e-8);
            assert_relative_eq!(p.w_right[0], right, max_relative = 1e-8);
        }
    }

    #[test]
    fn zero_coefficients_give_free_evolution() {
        let op = SpectralOperator::laplacian_1d(4, std::f64::consts::PI).unwrap();
        let spec = ProblemSpec::new(op, Arc::new(ZeroDrift), Arc::new(ZeroDiffusion), HolderParams::default(), 1.0, 32).unwrap();
        let u0 = SpectralField::new(vec![1.0, -0.5, 0.25, 0.1]);
        let omega = SampledPath::new(0.0, 1.0 / 32.0, vec![SpectralField::zeros(4); 33]).unwrap();
        let junk = SampledPath::new(0.0, 1.0 / 32.0, vec![SpectralField::new(vec![3.0; 4]); 33]).unwrap();
        let tu = apply_t(&junk, &omega, &u0, &spec).unwrap();
        let free = free_evolution(&spec, &u0, 32, 1.0 / 32.0).unwrap();
        for k in 0..=32 {
            assert!(tu.value(k).distance(free.value(k)) < 1e-15);
        }
        let rep = solve_mild(&u0, &omega, &spec, &SolverConfig::default()).unwrap();
        assert_eq!(rep.solutions.len(), 1);
        assert!(rep.solutions.residuals[0] < 1e-12);
        for k in 0..=32 {
            assert!(rep.solutions.elements[0].value(k).distance(free.value(k)) < 1e-14);
        }
    }

    #[test]
    fn linear_scalar_problem_is_stationary() {
        // u' = -u + u has the constant solution
        let spec = scalar_spec(1.0, Arc::new(LinearDrift(1.0)), Arc::new(ZeroDiffusion), 64);
        let u0 = SpectralField::new(vec![0.7]);
        let omega = smooth_driver(64);
        let constant = SampledPath::new(0.0, 1.0 / 64.0, vec![u0.clone(); 65]).unwrap();
        let tu = apply_t(&constant, &omega, &u0, &spec).unwrap();
        for v in tu.values() {
            assert!((v[0] - 0.7).abs() < 1e-14);
        }
        let rep = solve_mild(&u0, &omega, &spec, &SolverConfig::default()).unwrap();
        for v in rep.solutions.elements[0].values() {
            assert!((v[0] - 0.7).abs() < 1e-8);
        }
    }

    #[test]
    fn additive_noise_matches_stieltjes_oracle() {
        let n = 1024;
        let lambda = 2.0;
        let sigma = 0.3;
        let spec = scalar_spec(lambda, Arc::new(ZeroDrift), Arc::new(ConstantDiffusion(HsMatrix::scalar(sigma))), n);
        let omega = smooth_driver(n);
        let u0 = SpectralField::new(vec![1.0]);
        let tu = apply_t(&omega, &omega, &u0, &spec).unwrap();
        for k in (0..=n).step_by(64) {
            let t = k as f64 / n as f64;
            // e^{-λt}u0 + σ int_0^t e^{-λ(t-r)} 3 cos(3r) dr, midpoint rule on 20000 cells
            let m = 20_000;
            let mut acc = 0.0;
            for i in 0..m {
                let r = (i as f64 + 0.5) * t / m as f64;
                acc += (-lambda * (t - r)).exp() * 3.0 * (3.0 * r).cos() * t / m as f64;
            }
            let exact = (-lambda * t).exp() + sigma * acc;
            assert!((tu.value(k)[0] - exact).abs() < 1e-4, "k={k}");
        }
    }

    #[test]
    fn rejects_mismatched_grid() {
        let spec = scalar_spec(1.0, Arc::new(ZeroDrift), Arc::new(ZeroDiffusion), 16);
        let u0 = SpectralField::new(vec![1.0]);
        let omega = smooth_driver(32);
        assert!(matches!(apply_t(&omega, &omega, &u0, &spec), Err(Error::GridMismatch(_))));
        let omega16 = smooth_driver(16);
        assert!(apply_t(&omega, &omega16, &u0, &spec).is_err());
        let bad = ProblemSpec {
            params: HolderParams { alpha: 0.9, ..HolderParams::default() },
            ..spec.clone()
        };
        assert!(matches!(apply_t(&omega16, &omega16, &u0, &bad), Err(Error::ParameterChain(_))));
    }

    #[test]
    fn concatenation_rules() {
        let spec = scalar_spec(1.0, Arc::new(ZeroDrift), Arc::new(ZeroDiffusion), 16);
        let u0 = SpectralField::new(vec![1.0]);
        let full = free_evolution(&spec, &u0, 16, 1.0 / 16.0).unwrap();
        let a = full.restrict(0, 6).unwrap();
        let b = full.restrict(6, 16).unwrap().rebased(0.0);
        let joined = concatenate(&a, &b).unwrap();
        for k in 0..=16 {
            assert!((joined.value(k)[0] - full.value(k)[0]).abs() < 1e-15);
        }
        // semigroup law
        let b2 = free_evolution(&spec, a.last(), 10, 1.0 / 16.0).unwrap();
        let joined2 = concatenate(&a, &b2).unwrap();
        for k in 0..=16 {
            assert!((joined2.value(k)[0] - full.value(k)[0]).abs() < 1e-14);
        }
        let off = b.scaled(1.0 + 1e-9);
        assert!(matches!(concatenate(&a, &off), Err(Error::EndpointMismatch(_))));
    }

    #[test]
    fn smoothing_of_free_mode() {
        let op = SpectralOperator::laplacian_1d(3, std::f64::consts::PI).unwrap();
        let spec = ProblemSpec::new(op, Arc::new(ZeroDrift), Arc::new(ZeroDiffusion), HolderParams::default(), 1.0, 20).unwrap();
        let u0 = SpectralField::unit(3, 0);
        let u = free_evolution(&spec, &u0, 20, 0.05).unwrap();
        let t = 0.35;
        let v = smoothing_norm(&u, &spec, t, 0.4).unwrap();
        assert_relative_eq!(v, (-t).exp(), epsilon = 1e-14); // λ_1 = 1
        assert_relative_eq!(smoothing_norm(&u, &spec, t, 0.0).unwrap(), u.value(7).norm());
        assert!(smoothing_norm(&u, &spec, t, 0.65).is_err());
        assert!(smoothing_norm(&u, &spec, 0.0, 0.1).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        assert!(c.validate().is_ok());
        c.distinct_tol = 1e-9;
        assert!(c.validate().is_err());
        c = SolverConfig { n_starts: 0, ..SolverConfig::default() };
        assert!(c.validate().is_err());
    }
}
