//! The `verify-all` suite: one entry per property check, each with its
//! measured values, tolerance and verdict. Wall-clock times are returned
//! separately so the numeric payload stays reproducible.

use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::dynsys::{check_cocycle, usc_probe};
use crate::error::Result;
use crate::fracint::{pathwise_integral, HsMatrix, IntegrandPath, Scheme};
use crate::heat::{kernel_g, Kernel, KernelSpec, SineGrid};
use crate::kummer::kummer_k;
use crate::paths::{
    holder_seminorm, holder_seminorm_full, mode_rng, sample_qfbm, wiener_modulus,
    Driver, FbmCovariance, FbmSampler, HolderParams, SampledPath, SamplerMethod,
};
use crate::solver::{solve_mild, ConstantDiffusion, ProblemSpec, SolverConfig, ZeroDrift};
use crate::spectral::{SpectralField, SpectralOperator};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub measured: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub id: u32,
    pub seconds: f64,
}

fn check(id: u32, name: &str, passed: bool, measured: Value) -> CheckResult {
    CheckResult {
        id,
        name: name.into(),
        passed,
        measured,
    }
}

fn sub_seed(seed: u64, id: u64) -> u64 {
    seed ^ id.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn fbm_exactness() -> Result<CheckResult> {
    let n = 256;
    let mut errs = Vec::new();
    for h in [0.6, 0.75, 0.9] {
        let times: Vec<f64> = (1..=n).map(|k| k as f64 / n as f64).collect();
        let cov = FbmCovariance::new(h, times)?;
        errs.push(cov.max_reconstruction_error());
    }
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    Ok(check(1, "fbm covariance exactness", worst <= 1e-10, json!({"max_entry_error": errs, "tol": 1e-10})))
}

pub fn constant_integrand(seed: u64) -> Result<CheckResult> {
    let n = 1024;
    let dt = 1.0 / n as f64;
    let params = HolderParams::default();
    let sampler = FbmSampler::new(params.hurst, n, dt, SamplerMethod::Cholesky)?;
    let c = 1.7;
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let w = sampler.sample(sub_seed(seed, 200 + k));
        let g = IntegrandPath::new(0.0, dt, vec![HsMatrix::scalar(c); n + 1])?;
        let (s, t) = if k % 2 == 0 { (0.0, 1.0) } else { (0.25, 0.75) };
        let got = pathwise_integral(&g, &w, &params, s, t, Scheme::MomentAssembly)?[0];
        let want = c * (w.value(w.index_of(t)?)[0] - w.value(w.index_of(s)?)[0]);
        let scale = c.abs() * holder_seminorm(&w, params.beta_prime, s, t)?;
        worst = worst.max((got - want).abs() / scale);
    }
    Ok(check(2, "constant integrand identity", worst <= 1e-6, json!({"max_scaled_defect": worst, "tol": 1e-6})))
}

fn young_error(n: usize) -> Result<f64> {
    let dt = 1.0 / n as f64;
    let g: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
    let w: Vec<f64> = g.iter().map(|r| r * r).collect();
    let gp = IntegrandPath::from_scalar(0.0, dt, &g)?;
    let wp = SampledPath::from_scalar(0.0, dt, w)?;
    let v = pathwise_integral(&gp, &wp, &HolderParams::default(), 0.0, 1.0, Scheme::MomentAssembly)?[0];
    Ok((v - 2.0 / 3.0).abs())
}

pub fn smooth_young() -> Result<CheckResult> {
    let errs = [young_error(256)?, young_error(1024)?, young_error(4096)?];
    let order = (errs[0] / errs[2]).log2() / 4.0;
    let passed = errs[2] <= 1e-3 && order >= 1.0;
    Ok(check(3, "smooth Young agreement", passed, json!({"errors": errs, "order": order, "tol": 1e-3})))
}

pub fn additivity_shift(seed: u64) -> Result<CheckResult> {
    let n = 256;
    let dt = 1.0 / n as f64;
    let params = HolderParams::default();
    // driver on [0, 2] so windows can be shifted
    let w = FbmSampler::new(params.hurst, 2 * n, dt, SamplerMethod::Cholesky)?.sample(sub_seed(seed, 400));
    let gvals: Vec<HsMatrix> = w
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| HsMatrix::scalar(v[0].sin() + k as f64 * dt))
        .collect();
    let g = IntegrandPath::new(0.0, dt, gvals)?;
    let integral = |g: &IntegrandPath, w: &SampledPath, s: f64, t: f64| -> Result<f64> {
        Ok(pathwise_integral(g, w, &params, s, t, Scheme::MomentAssembly)?[0])
    };
    let mut rng = mode_rng(sub_seed(seed, 401), 0);
    use rand::Rng;
    let mut add_worst: f64 = 0.0;
    for _ in 0..10 {
        let mut ks = [rng.gen_range(0..=n), rng.gen_range(0..=n), rng.gen_range(0..=n)];
        ks.sort_unstable();
        if ks[0] == ks[1] || ks[1] == ks[2] {
            ks = [ks[0].min(n - 2), ks[0].min(n - 2) + 1, n];
        }
        let [a, b, c] = ks.map(|k| k as f64 * dt);
        let (i1, i2, i3) = (integral(&g, &w, a, b)?, integral(&g, &w, b, c)?, integral(&g, &w, a, c)?);
        add_worst = add_worst.max((i1 + i2 - i3).abs() / (i1.abs() + i2.abs() + i3.abs()).max(1e-300));
    }
    let mut shift_worst: f64 = 0.0;
    for j in 1..=5 {
        let tau_steps = j * n / 8;
        let tau = tau_steps as f64 * dt;
        let (s, t) = (0.125, 0.875);
        let moved = integral(&g, &w, s + tau, t + tau)?;
        // g(. + τ) against ω(. + τ) on [s, t]
        let gs = g.time_shifted(tau);
        let ws = w.clone().rebased(-tau);
        let back = integral(&gs, &ws, s, t)?;
        shift_worst = shift_worst.max((moved - back).abs() / moved.abs().max(1e-300));
    }
    let passed = add_worst <= 1e-6 && shift_worst <= 1e-6;
    Ok(check(
        4,
        "integral additivity and shift",
        passed,
        json!({"additivity_defect": add_worst, "shift_defect": shift_worst, "tol": 1e-6}),
    ))
}

pub fn kummer_decay() -> Result<CheckResult> {
    let p = HolderParams::default();
    let (a, b, d) = (-p.alpha, p.alpha - 1.0, p.beta_prime - p.beta);
    let rhos = [1.0, 10.0, 100.0, 1000.0, 10000.0];
    let ks = rhos.iter().map(|r| kummer_k(*r, a, b, d, 1.0)).collect::<Result<Vec<_>>>()?;
    let decreasing = ks.windows(2).all(|w| w[1] < w[0]);
    let ratio = ks[4] / ks[0];
    let k0 = kummer_k(0.0, a, b, d, 1.0)?;
    let beta_ref = statrs::function::beta::beta(1.0 - p.alpha, p.alpha);
    let k0_err = (k0 - beta_ref).abs();
    let passed = decreasing && ratio < 0.05 && k0_err <= 1e-6;
    Ok(check(
        5,
        "kummer decay",
        passed,
        json!({"rho": rhos, "k": ks, "strictly_decreasing": decreasing, "ratio_1e4_to_1": ratio,
               "ratio_tol": 0.05, "k0": k0, "k0_error": k0_err}),
    ))
}

fn heat_setup(cfg: &RunConfig) -> Result<(ProblemSpec, SpectralField, Driver)> {
    let spec = cfg.build_problem()?;
    let u0 = cfg.initial_value();
    let q = sample_qfbm(&spec.operator, cfg.params.hurst, spec.n_steps, spec.dt(), sub_seed(cfg.seed, 600))?;
    Ok((spec, u0, Driver::new(q.path)?))
}

pub fn heat_convergence(cfg: &RunConfig) -> Result<CheckResult> {
    let (spec, u0, drv) = heat_setup(cfg)?;
    let rep = solve_mild(&u0, drv.path(), &spec, &cfg.solver)?;
    let residual_ok = rep.solutions.residuals.iter().all(|r| *r < cfg.solver.fp_tol);
    let decreasing = rep
        .residual_traces
        .iter()
        .all(|t| t.windows(2).all(|w| w[1] < w[0]));
    let geometric = rep.max_residual_ratio < 1.0 && rep.max_residual_ratio <= rep.contraction_factor + 0.05;
    let passed = residual_ok && decreasing && geometric && rep.in_ball.iter().all(|b| *b);
    Ok(check(
        6,
        "heat fixed-point convergence",
        passed,
        json!({"rho": rep.rho, "contraction_factor": rep.contraction_factor,
               "max_residual_ratio": rep.max_residual_ratio, "residuals": rep.solutions.residuals,
               "iterations": rep.residual_traces.iter().map(Vec::len).collect::<Vec<_>>(),
               "n_solutions": rep.solutions.len(), "in_ball": rep.in_ball, "tol": cfg.solver.fp_tol}),
    ))
}

/// `e^{-λ t_k} u0 + σ sum_i e^{-λ(t_k - m_i)} Δω_i` with midpoints `m_i` of the
/// fine grid, evaluated at every `refine`-th fine node.
pub fn stieltjes_oracle(lambda: f64, sigma: f64, u0: f64, fine: &[f64], fine_dt: f64, refine: usize) -> Vec<f64> {
    let n_fine = fine.len() - 1;
    (0..=n_fine / refine)
        .map(|k| {
            let kf = k * refine;
            let t = kf as f64 * fine_dt;
            let acc: f64 = (0..kf)
                .map(|i| (-lambda * (t - (i as f64 + 0.5) * fine_dt)).exp() * (fine[i + 1] - fine[i]))
                .sum();
            (-lambda * t).exp() * u0 + sigma * acc
        })
        .collect()
}

pub fn additive_oracle(seed: u64) -> Result<CheckResult> {
    let n = 1024;
    let dt = 1.0 / n as f64;
    let (lambda, sigma, u0) = (1.0, 0.5, 1.0);
    let op = SpectralOperator::new(vec![lambda], vec![1.0])?;
    let spec = ProblemSpec::new(
        op,
        std::sync::Arc::new(ZeroDrift),
        std::sync::Arc::new(ConstantDiffusion(HsMatrix::scalar(sigma))),
        HolderParams::default(),
        1.0,
        n,
    )?;
    let cfg = SolverConfig::default();
    let u0f = SpectralField::new(vec![u0]);
    let worst_against = |omega: &SampledPath, oracle: &[f64]| -> Result<f64> {
        let rep = solve_mild(&u0f, omega, &spec, &cfg)?;
        Ok(rep.solutions.elements[0]
            .values()
            .iter()
            .zip(oracle)
            .map(|(v, o)| (v[0] - o).abs())
            .fold(0.0, f64::max))
    };
    // smooth driver: oracle on a 64x refined grid
    let refine = 64;
    let fdt = dt / refine as f64;
    let fine: Vec<f64> = (0..=n * refine).map(|k| (3.0 * k as f64 * fdt).sin()).collect();
    let smooth = SampledPath::from_scalar(0.0, dt, fine.iter().step_by(refine).cloned().collect())?;
    let smooth_err = worst_against(&smooth, &stieltjes_oracle(lambda, sigma, u0, &fine, fdt, refine))?;
    // fBm driver: oracle on a 4x refined grid
    let fine_path = FbmSampler::new(0.75, 4 * n, dt / 4.0, SamplerMethod::Auto)?.sample(sub_seed(seed, 700));
    let fine: Vec<f64> = fine_path.scalar_values();
    let coarse = fine_path.subsample(4)?;
    let fbm_err = worst_against(&coarse, &stieltjes_oracle(lambda, sigma, u0, &fine, dt / 4.0, 4))?;
    let passed = smooth_err <= 1e-4 && fbm_err <= 5e-3;
    Ok(check(
        7,
        "additive-noise analytic oracle",
        passed,
        json!({"smooth_max_error": smooth_err, "smooth_tol": 1e-4, "fbm_max_error": fbm_err, "fbm_tol": 5e-3}),
    ))
}

/// Cocycle defects on the configured grid and on the doubled grid with the
/// same underlying path.
pub fn heat_cocycle(cfg: &RunConfig) -> Result<CheckResult> {
    let n = cfg.grid.n_steps;
    let mut fine_cfg = cfg.clone();
    fine_cfg.grid.n_steps = 2 * n;
    let fine_spec = fine_cfg.build_problem()?;
    let spec = cfg.build_problem()?;
    let u0 = cfg.initial_value();
    let fine = sample_qfbm(&fine_spec.operator, cfg.params.hurst, 2 * n, fine_spec.dt(), sub_seed(cfg.seed, 800))?.path;
    let coarse = Driver::new(fine.subsample(2)?)?;
    let fine = Driver::new(fine)?;
    let floor = 2.0 * cfg.solver.fp_tol;
    let horizon = cfg.grid.horizon;
    let mut rows = Vec::new();
    let mut passed = true;
    for [tf, sf] in [[0.25, 0.25], [0.5, 0.25]] {
        let (t, s) = (tf * horizon, sf * horizon);
        let a = check_cocycle(t, s, &coarse, &u0, &spec, &cfg.solver)?;
        let b = check_cocycle(t, s, &fine, &u0, &fine_spec, &cfg.solver)?;
        let (da, db) = (a.d1.max(a.d2), b.d1.max(b.d2));
        let shrinks = db <= 0.5 * da;
        passed &= da <= 5e-3 && db <= 5e-3 && shrinks;
        rows.push(json!({"t": t, "s": s, "d1": a.d1, "d2": a.d2, "d1_doubled": b.d1, "d2_doubled": b.d2,
                         "shrink_ratio": if da > 0.0 { db / da } else { 0.0 }, "shrinks": shrinks,
                         "at_solver_floor": da.max(db) <= floor}));
    }
    Ok(check(8, "strict cocycle", passed, json!({"rows": rows, "tol": 5e-3, "solver_floor": floor})))
}

pub fn heat_usc(cfg: &RunConfig) -> Result<CheckResult> {
    let (spec, u0, drv) = heat_setup(cfg)?;
    let rep = usc_probe(
        cfg.usc.t.min(spec.horizon),
        drv.path(),
        &u0,
        &spec,
        &cfg.solver,
        &[1e-1, 1e-2, 1e-3],
        10,
        cfg.usc.perturb_driver,
        sub_seed(cfg.seed, 900),
    )?;
    let last = rep.rows.last().map(|r| r.excess).unwrap_or(0.0);
    let bound = 10.0 * rep.floor;
    let passed = rep.monotone && last <= bound;
    Ok(check(
        9,
        "upper semicontinuity probe",
        passed,
        json!({"radii": rep.rows.iter().map(|r| r.radius).collect::<Vec<_>>(),
               "excess": rep.rows.iter().map(|r| r.excess).collect::<Vec<_>>(),
               "failures": rep.rows.iter().map(|r| r.failures).sum::<usize>(),
               "monotone": rep.monotone, "smallest_radius_bound": bound}),
    ))
}

pub fn holder_statistics(seed: u64) -> Result<CheckResult> {
    let n = 1024;
    let sampler = FbmSampler::new(0.8, n, 1.0 / n as f64, SamplerMethod::Cholesky)?;
    let mut finite = 0;
    let mut below = 0;
    for k in 0..100 {
        let w = sampler.sample(sub_seed(seed, 1000 + k));
        if holder_seminorm_full(&w, 0.6).is_finite() {
            finite += 1;
        }
        if wiener_modulus(&w, 0.6, 2f64.powi(-6))? < wiener_modulus(&w, 0.6, 0.25)? {
            below += 1;
        }
    }
    let passed = finite == 100 && below >= 95;
    Ok(check(10, "holder statistics", passed, json!({"finite": finite, "modulus_decreasing": below, "required": 95})))
}

pub fn hs_lipschitz(cfg: &RunConfig, seed: u64) -> Result<CheckResult> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let n = cfg.grid.n_modes;
    let grid = std::sync::Arc::new(SineGrid::new(n, cfg.grid.quad_nodes)?);
    let spec = KernelSpec::new(Kernel::SinSinTanh { amp: cfg.problem.kernel_amp }, grid)?;
    let l = spec.lipschitz_norm();
    let mut rng = mode_rng(sub_seed(seed, 1100), 0);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let mut field = || {
            let r = 10f64.powf(rng.gen_range(-2.0..1.0));
            SpectralField::new((0..n).map(|_| r * rng.sample::<f64, _>(StandardNormal)).collect())
        };
        let (u, v) = (field(), field());
        let lhs = kernel_g(&spec, &u).hs_distance(&kernel_g(&spec, &v));
        let rhs = l * u.distance(&v);
        worst = worst.max(lhs / rhs);
        if lhs > rhs + 1e-6 {
            violations += 1;
        }
    }
    Ok(check(
        11,
        "kernel Hilbert-Schmidt Lipschitz bound",
        violations == 0,
        json!({"violations": violations, "max_ratio": worst, "lipschitz_norm": l}),
    ))
}

/// Runs every check; returns the report and per-check wall-clock seconds.
pub fn verify_all(cfg: &RunConfig) -> Result<(VerifyReport, Vec<Timing>)> {
    let seed = cfg.seed;
    let mut checks = Vec::new();
    let mut timings = Vec::new();
    let mut run = |id: u32, f: &dyn Fn() -> Result<CheckResult>| -> Result<()> {
        let start = Instant::now();
        let c = f()?;
        log::info!("check {id} {}: {}", c.name, if c.passed { "pass" } else { "FAIL" });
        checks.push(c);
        timings.push(Timing {
            id,
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(())
    };
    run(1, &fbm_exactness)?;
    run(2, &|| constant_integrand(seed))?;
    run(3, &smooth_young)?;
    run(4, &|| additivity_shift(seed))?;
    run(5, &kummer_decay)?;
    run(6, &|| heat_convergence(cfg))?;
    run(7, &|| additive_oracle(seed))?;
    run(8, &|| heat_cocycle(cfg))?;
    run(9, &|| heat_usc(cfg))?;
    run(10, &|| holder_statistics(seed))?;
    run(11, &|| hs_lipschitz(cfg, seed))?;
    let all_passed = checks.iter().all(|c| c.passed);
    Ok((VerifyReport { seed, checks, all_passed }, timings))
}
