//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//! Run with `cargo test -p fracflow --test acceptance`.

use std::f64::consts::PI;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use fracflow::dynsys::hausdorff_semidist;
use fracflow::fracint::{pathwise_integral, HsMatrix, IntegrandPath, Scheme};
use fracflow::heat::{default_heat_problem, default_initial_value, kernel_g, Kernel, KernelSpec, SineGrid};
use fracflow::kummer::kummer_k;
use fracflow::paths::{
    holder_seminorm, holder_seminorm_full, mode_rng, sample_qfbm, weighted_holder_norm,
    wiener_modulus, wiener_shift, Driver, FbmCovariance, FbmSampler, HolderParams, SampledPath,
    SamplerMethod,
};
use fracflow::solver::{apply_t, solve_mild, ConstantDiffusion, ProblemSpec, SolverConfig, ZeroDrift};
use fracflow::spectral::{SpectralField, SpectralOperator};
use rand::Rng;
use rand_distr::StandardNormal;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn fbm_cov(h: f64, t: f64, s: f64) -> f64 {
    0.5 * (t.abs().powf(2.0 * h) + s.abs().powf(2.0 * h) - (t - s).abs().powf(2.0 * h))
}

fn c1_fbm_exactness() -> Outcome {
    let start = Instant::now();
    let n = 256;
    let times: Vec<f64> = (1..=n).map(|k| k as f64 / n as f64).collect();
    let mut worst: f64 = 0.0;
    for h in [0.6, 0.75, 0.9] {
        let cov = FbmCovariance::new(h, times.clone()).unwrap();
        let l = cov.factor();
        for i in 0..n {
            for j in 0..=i {
                let built: f64 = (0..=j).map(|k| l[(i, k)] * l[(j, k)]).sum();
                worst = worst.max((built - fbm_cov(h, times[i], times[j])).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-10 && secs < 5.0, format!("max entry error {worst:.3e} (tol 1e-10), {secs:.2} s (limit 5 s)"))
}

fn c2_constant_integrand() -> Outcome {
    let n = 1024;
    let dt = 1.0 / n as f64;
    let p = HolderParams::default();
    let sampler = FbmSampler::new(p.hurst, n, dt, SamplerMethod::Cholesky).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..20u64 {
        let w = sampler.sample(31 + k);
        let c = if k % 2 == 0 { 2.5 } else { -0.4 };
        let g = IntegrandPath::new(0.0, dt, vec![HsMatrix::scalar(c); n + 1]).unwrap();
        let (i0, i1) = [(0, n), (n / 8, 5 * n / 8), (3, n - 7)][k as usize % 3];
        let (s, t) = (i0 as f64 * dt, i1 as f64 * dt);
        let got = pathwise_integral(&g, &w, &p, s, t, Scheme::MomentAssembly).unwrap()[0];
        let want = c * (w.value(i1)[0] - w.value(i0)[0]);
        let scale = c.abs() * holder_seminorm(&w, p.beta_prime, s, t).unwrap();
        worst = worst.max((got - want).abs() / scale);
    }
    outcome(worst <= 1e-6, format!("max |I - c Δω| / (|c| |||ω|||) = {worst:.3e} (tol 1e-6)"))
}

fn c3_smooth_young() -> Outcome {
    let err = |n: usize| {
        let dt = 1.0 / n as f64;
        let g: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let gp = IntegrandPath::from_scalar(0.0, dt, &g).unwrap();
        let wp = SampledPath::from_scalar(0.0, dt, g.iter().map(|r| r * r).collect()).unwrap();
        let v = pathwise_integral(&gp, &wp, &HolderParams::default(), 0.0, 1.0, Scheme::MomentAssembly).unwrap()[0];
        (v - 2.0 / 3.0).abs()
    };
    let e = [err(1 << 8), err(1 << 10), err(1 << 12)];
    let order_a = (e[0] / e[1]).log2() / 2.0;
    let order_b = (e[1] / e[2]).log2() / 2.0;
    outcome(
        e[2] <= 1e-3 && order_a >= 1.0 && order_b >= 1.0,
        format!("errors {:.3e} {:.3e} {:.3e}, orders {order_a:.3} {order_b:.3}", e[0], e[1], e[2]),
    )
}

fn c4_additivity_shift() -> Outcome {
    let n = 512;
    let dt = 1.0 / n as f64;
    let p = HolderParams::default();
    // two modes on [0, 2]
    let sampler = FbmSampler::new(0.75, 2 * n, dt, SamplerMethod::Cholesky).unwrap();
    let modes = vec![sampler.sample_values(77, 0), sampler.sample_values(77, 1)];
    let w = SampledPath::from_modes(0.0, dt, &modes).unwrap();
    let g = IntegrandPath::new(
        0.0,
        dt,
        w.values()
            .iter()
            .map(|v| HsMatrix::from_fn(2, |j, i| (v[i] + j as f64).cos() * (1.0 + 0.5 * i as f64)))
            .collect(),
    )
    .unwrap();
    let integral = |g: &IntegrandPath, w: &SampledPath, s: f64, t: f64| {
        pathwise_integral(g, w, &p, s, t, Scheme::MomentAssembly).unwrap()
    };
    let mut rng = mode_rng(5, 0);
    let mut add: f64 = 0.0;
    for _ in 0..10 {
        let a = rng.gen_range(0..n - 2);
        let b = rng.gen_range(a + 1..n - 1);
        let c = rng.gen_range(b + 1..n);
        let (s, tau, t) = (a as f64 * dt, b as f64 * dt, c as f64 * dt);
        let whole = integral(&g, &w, s, t);
        let parts = &integral(&g, &w, s, tau) + &integral(&g, &w, tau, t);
        add = add.max(parts.distance(&whole) / whole.norm().max(1e-12));
    }
    let mut shift: f64 = 0.0;
    for k in 1..=5 {
        let tau = (k * n / 6) as f64 * dt;
        let (s, t) = (0.1015625, 0.8984375);
        let direct = integral(&g, &w, s + tau, t + tau);
        let moved_g = g.time_shifted(tau);
        let moved_w = w.clone().rebased(-tau);
        let via = integral(&moved_g, &moved_w, s, t);
        shift = shift.max(via.distance(&direct) / direct.norm().max(1e-12));
    }
    outcome(add <= 1e-6 && shift <= 1e-6, format!("additivity defect {add:.3e}, shift defect {shift:.3e} (tol 1e-6)"))
}

fn c5_kummer() -> Outcome {
    let p = HolderParams::default();
    let (a, b, d) = (-p.alpha, p.alpha - 1.0, p.beta_prime - p.beta);
    let ks: Vec<f64> = [1.0, 10.0, 100.0, 1e3, 1e4].iter().map(|r| kummer_k(*r, a, b, d, 1.0).unwrap()).collect();
    let decreasing = ks.windows(2).all(|w| w[1] < w[0]);
    let ratio = ks[4] / ks[0];
    let k0 = kummer_k(0.0, a, b, d, 1.0).unwrap();
    // Beta(1-α, α) = π / sin(πα)
    let reference = PI / (PI * p.alpha).sin() * 1f64.powf(d);
    let k0_err = (k0 - reference).abs();
    outcome(
        decreasing && ratio < 0.05 && k0_err <= 1e-6,
        format!(
            "K = {ks:.4?}, strictly decreasing {decreasing}, K(1e4)/K(1) = {ratio:.4} (need < 0.05), |K(0) - B| = {k0_err:.2e}"
        ),
    )
}

fn heat_driver(n: usize, seed: u64) -> (ProblemSpec, Driver) {
    let spec = default_heat_problem(n, 16).unwrap();
    let q = sample_qfbm(&spec.operator, 0.75, n, spec.dt(), seed).unwrap();
    (spec, Driver::new(q.path).unwrap())
}

fn c6_heat_convergence() -> Outcome {
    let start = Instant::now();
    let (spec, drv) = heat_driver(256, 2024);
    let u0 = default_initial_value(16);
    let rep = solve_mild(&u0, drv.path(), &spec, &SolverConfig::default()).unwrap();
    let secs = start.elapsed();
    let beta = spec.params.beta;
    let mut worst: f64 = 0.0;
    for u in &rep.solutions.elements {
        let tu = apply_t(u, drv.path(), &u0, &spec).unwrap();
        let diff = SampledPath::new(0.0, u.dt(), tu.values().iter().zip(u.values()).map(|(a, b)| a - b).collect()).unwrap();
        worst = worst.max(weighted_holder_norm(&diff, beta, rep.rho).unwrap());
    }
    let mut max_ratio: f64 = 0.0;
    let mut monotone = true;
    for trace in &rep.residual_traces {
        for w in trace.windows(2) {
            monotone &= w[1] < w[0];
            max_ratio = max_ratio.max(w[1] / w[0]);
        }
    }
    let geometric = monotone && max_ratio <= rep.contraction_factor + 0.05 && max_ratio < 1.0;
    outcome(
        worst < 1e-8 && geometric && secs < Duration::from_secs(600),
        format!(
            "rho {}, residual {worst:.3e} (tol 1e-8), max ratio {max_ratio:.3} vs q {:.3}, {} solution(s), {:.1} s",
            rep.rho,
            rep.contraction_factor,
            rep.solutions.len(),
            secs.as_secs_f64()
        ),
    )
}

/// `e^{-λt}u0 + σ int_0^t e^{-λ(t-r)} dω(r)` by a midpoint Riemann-Stieltjes sum.
fn rs_oracle(lambda: f64, sigma: f64, u0: f64, fine: &[f64], fdt: f64, t_index: usize) -> f64 {
    let t = t_index as f64 * fdt;
    let mut acc = 0.0;
    for i in 0..t_index {
        acc += (-lambda * (t - (i as f64 + 0.5) * fdt)).exp() * (fine[i + 1] - fine[i]);
    }
    (-lambda * t).exp() * u0 + sigma * acc
}

fn c7_additive_oracle() -> Outcome {
    let n = 1024;
    let dt = 1.0 / n as f64;
    let (lambda, sigma, u0) = (2.0, 0.7, 0.3);
    let spec = ProblemSpec::new(
        SpectralOperator::new(vec![lambda], vec![1.0]).unwrap(),
        Arc::new(ZeroDrift),
        Arc::new(ConstantDiffusion(HsMatrix::scalar(sigma))),
        HolderParams::default(),
        1.0,
        n,
    )
    .unwrap();
    let u0f = SpectralField::new(vec![u0]);
    let max_err = |coarse: &SampledPath, fine: &[f64], refine: usize| {
        let rep = solve_mild(&u0f, coarse, &spec, &SolverConfig::default()).unwrap();
        let u = &rep.solutions.elements[0];
        (0..=n)
            .map(|k| (u.value(k)[0] - rs_oracle(lambda, sigma, u0, fine, dt / refine as f64, k * refine)).abs())
            .fold(0.0, f64::max)
    };
    let refine = 32;
    let fdt = dt / refine as f64;
    let fine: Vec<f64> = (0..=n * refine).map(|k| { let r = k as f64 * fdt; r * r + (4.0 * r).sin() }).collect();
    let coarse = SampledPath::from_scalar(0.0, dt, fine.iter().step_by(refine).cloned().collect()).unwrap();
    let smooth = max_err(&coarse, &fine, refine);
    let fine_path = FbmSampler::new(0.75, 4 * n, dt / 4.0, SamplerMethod::Auto).unwrap().sample(99);
    let fine: Vec<f64> = fine_path.scalar_values();
    let coarse = SampledPath::from_scalar(0.0, dt, fine.iter().step_by(4).cloned().collect()).unwrap();
    let rough = max_err(&coarse, &fine, 4);
    outcome(
        smooth <= 1e-4 && rough <= 5e-3,
        format!("smooth driver {smooth:.3e} (tol 1e-4), fBm driver {rough:.3e} (tol 5e-3)"),
    )
}

/// `max(d1, d2)` for one `(t, s)` pair, composing solver runs directly.
fn cocycle_defect(spec: &ProblemSpec, drv: &Driver, t_steps: usize, s_steps: usize) -> (f64, f64) {
    let cfg = SolverConfig::default();
    let u0 = default_initial_value(16);
    let lhs_rep = solve_mild(&u0, drv.path(), spec, &cfg).unwrap();
    let lhs: Vec<SpectralField> = lhs_rep.solutions.elements.iter().map(|u| u.value(t_steps + s_steps).clone()).collect();
    let rest = spec.n_steps - s_steps;
    let sub = ProblemSpec::new(
        spec.operator.clone(),
        spec.drift.clone(),
        spec.diffusion.clone(),
        spec.params,
        rest as f64 * spec.dt(),
        rest,
    )
    .unwrap();
    let shifted = wiener_shift(drv, s_steps as isize).unwrap().truncated(rest).unwrap();
    let mut rhs = Vec::new();
    for u in &lhs_rep.solutions.elements {
        let rep = solve_mild(u.value(s_steps), &shifted, &sub, &cfg).unwrap();
        rhs.extend(rep.solutions.elements.iter().map(|v| v.value(t_steps).clone()));
    }
    (hausdorff_semidist(&lhs, &rhs).unwrap(), hausdorff_semidist(&rhs, &lhs).unwrap())
}

fn c8_cocycle() -> Outcome {
    let (fine_spec, fine) = heat_driver(512, 808);
    let coarse_spec = default_heat_problem(256, 16).unwrap();
    let coarse = Driver::new(fine.path().subsample(2).unwrap()).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (tq, sq) in [(1usize, 1usize), (2, 1)] {
        let (a1, a2) = cocycle_defect(&coarse_spec, &coarse, tq * 64, sq * 64);
        let (b1, b2) = cocycle_defect(&fine_spec, &fine, tq * 128, sq * 128);
        let (da, db) = (a1.max(a2), b1.max(b2));
        ok &= da <= 5e-3 && db <= 5e-3 && db <= 0.5 * da;
        parts.push(format!(
            "(t,s)=({}T/4,T/4): n=256 d1 {a1:.2e} d2 {a2:.2e}; n=512 d1 {b1:.2e} d2 {b2:.2e}; ratio {:.3} (need <= 0.5)",
            tq,
            db / da
        ));
    }
    outcome(ok, parts.join(" | "))
}

fn c9_usc() -> Outcome {
    let (spec, drv) = heat_driver(256, 909);
    let cfg = SolverConfig::default();
    let u0 = default_initial_value(16);
    let phi = |u0: &SpectralField| -> Vec<SpectralField> {
        solve_mild(u0, drv.path(), &spec, &cfg).unwrap().solutions.evaluate(spec.n_steps)
    };
    let reference = phi(&u0);
    let mut rng = mode_rng(909, 1);
    let mut e = Vec::new();
    for r in [1e-1, 1e-2, 1e-3] {
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let dir = SpectralField::new((0..16).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
            let pert = &u0 + &dir.scaled(r / dir.norm());
            worst = worst.max(hausdorff_semidist(&phi(&pert), &reference).unwrap());
        }
        e.push(worst);
    }
    let monotone = e.windows(2).all(|w| w[1] <= w[0]);
    let bound = 10.0 * 2.0 * cfg.fp_tol;
    outcome(
        monotone && e[2] <= bound,
        format!("e(r) = {:.3e} {:.3e} {:.3e}, nonincreasing {monotone}, e(1e-3) bound {bound:.1e}", e[0], e[1], e[2]),
    )
}

fn c10_holder_statistics() -> Outcome {
    let n = 1024;
    let sampler = FbmSampler::new(0.8, n, 1.0 / n as f64, SamplerMethod::Cholesky).unwrap();
    let mut finite = 0;
    let mut below = 0;
    for seed in 0..100u64 {
        let w = sampler.sample(10_000 + seed);
        if holder_seminorm_full(&w, 0.6).is_finite() {
            finite += 1;
        }
        if wiener_modulus(&w, 0.6, 1.0 / 64.0).unwrap() < wiener_modulus(&w, 0.6, 0.25).unwrap() {
            below += 1;
        }
    }
    outcome(finite == 100 && below >= 95, format!("finite {finite}/100, modulus smaller at 2^-6 in {below}/100 (need 95)"))
}

fn c11_hs_lipschitz() -> Outcome {
    let n = 16;
    let grid = Arc::new(SineGrid::new(n, 256).unwrap());
    let spec = KernelSpec::new(Kernel::SinSinTanh { amp: 0.1 }, Arc::clone(&grid)).unwrap();
    // ||L||_V with L(x) = 0.1 sin x
    let l_norm = 0.1 * (PI / 2.0).sqrt();
    // brute-force double quadrature of one matrix
    let mut rng = mode_rng(11, 0);
    let probe = SpectralField::new((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
    let nodes = grid.nodes();
    let h = grid.weight();
    let c = (2.0 / PI).sqrt();
    let uy: Vec<f64> = nodes.iter().map(|y| (0..n).map(|i| probe[i] * c * ((i + 1) as f64 * y).sin()).sum()).collect();
    let g = kernel_g(&spec, &probe);
    let mut quad_err: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let mut acc = 0.0;
            for (p, x) in nodes.iter().enumerate() {
                for (q, y) in nodes.iter().enumerate() {
                    acc += c * ((j + 1) as f64 * x).sin() * 0.1 * x.sin() * y.sin() * uy[q].tanh() * c * ((i + 1) as f64 * y).sin();
                }
                let _ = p;
            }
            quad_err = quad_err.max((acc * h * h - g.get(j, i)).abs());
        }
    }
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let r1 = 10f64.powf(rng.gen_range(-2.0..1.0));
        let r2 = 10f64.powf(rng.gen_range(-2.0..1.0));
        let u = SpectralField::new((0..n).map(|_| r1 * rng.sample::<f64, _>(StandardNormal)).collect());
        let v = SpectralField::new((0..n).map(|_| r2 * rng.sample::<f64, _>(StandardNormal)).collect());
        let lhs = kernel_g(&spec, &u).hs_distance(&kernel_g(&spec, &v));
        let rhs = l_norm * u.distance(&v);
        worst = worst.max(lhs / rhs);
        if lhs > rhs + 1e-6 {
            violations += 1;
        }
    }
    outcome(
        violations == 0 && quad_err < 1e-12,
        format!("violations {violations}/100, max ratio {worst:.4}, matrix vs brute-force quadrature {quad_err:.1e}"),
    )
}

fn c12_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_fracflow");
    let dir = tempfile::tempdir().unwrap();
    let run = || {
        let out = Command::new(bin)
            .args(["verify-all", "--seed", "12", "--out"])
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(out.status.code().is_some());
        std::fs::read(dir.path().join("verify.json")).unwrap()
    };
    let (a, b) = (run(), run());
    outcome(!a.is_empty() && a == b, format!("verify.json {} bytes, identical {}", a.len(), a == b))
}

fn main() {
    let criteria: Vec<(u32, &str, fn() -> Outcome)> = vec![
        (1, "fBm exactness", c1_fbm_exactness),
        (2, "constant-integrand identity", c2_constant_integrand),
        (3, "smooth Young agreement", c3_smooth_young),
        (4, "additivity and shift", c4_additivity_shift),
        (5, "Kummer decay", c5_kummer),
        (6, "fixed-point convergence", c6_heat_convergence),
        (7, "analytic oracle", c7_additive_oracle),
        (8, "strict cocycle", c8_cocycle),
        (9, "USC probe", c9_usc),
        (10, "Holder statistics", c10_holder_statistics),
        (11, "HS Lipschitz bound", c11_hs_lipschitz),
        (12, "determinism", c12_determinism),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        let o = f();
        if !o.passed {
            failed += 1;
        }
        println!("criterion {id:>2} [{}] {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {failed} criterion(s) failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
