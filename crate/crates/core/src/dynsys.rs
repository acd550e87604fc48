//! The set-valued solution map `Φ(t, ω, u0) = {u(t) : u fixed point}`, the
//! strict cocycle check `Φ(t+s, ω, .) = Φ(t, θ_s ω, Φ(s, ω, .))` and
//! upper-semicontinuity probes.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::paths::{holder_seminorm_full, mode_rng, wiener_shift, Driver, SampledPath};
use crate::solver::{solve_mild, ProblemSpec, SolveReport, SolverConfig};
use crate::spectral::SpectralField;

pub use crate::solver::SolutionSet;

/// `sup_{a in A} inf_{b in B} ||a - b||`.
pub fn hausdorff_semidist(a: &[SpectralField], b: &[SpectralField]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(a.iter()
        .map(|x| b.iter().map(|y| x.distance(y)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max))
}

fn grid_steps(spec: &ProblemSpec, t: f64) -> Result<usize> {
    let k = t / spec.dt();
    let r = k.round();
    if !(t >= 0.0) || (k - r).abs() > 1e-9 || r as usize > spec.n_steps {
        return Err(Error::OutsideWindow {
            time: t,
            start: 0.0,
            end: spec.horizon,
        });
    }
    Ok(r as usize)
}

/// The same problem on the shorter window `[0, n_steps dt]`.
fn shortened(spec: &ProblemSpec, n_steps: usize) -> Result<ProblemSpec> {
    ProblemSpec::new(
        spec.operator.clone(),
        spec.drift.clone(),
        spec.diffusion.clone(),
        spec.params,
        n_steps as f64 * spec.dt(),
        n_steps,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiReport {
    pub t: f64,
    pub values: Vec<SpectralField>,
    /// `None` at `t = 0`, where no solve is needed.
    pub solve: Option<SolveReport>,
}

/// `Φ(t, ω, u0)` from fixed points on `[0, T]`.
pub fn phi(
    t: f64,
    omega: &SampledPath,
    u0: &SpectralField,
    spec: &ProblemSpec,
    cfg: &SolverConfig,
) -> Result<PhiReport> {
    let k = grid_steps(spec, t)?;
    if k == 0 {
        return Ok(PhiReport {
            t,
            values: vec![u0.clone()],
            solve: None,
        });
    }
    let omega = omega.restrict(0, spec.n_steps)?;
    let rep = solve_mild(u0, &omega, spec, cfg)?;
    Ok(PhiReport {
        t,
        values: rep.solutions.evaluate(k),
        solve: Some(rep),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CocycleReport {
    pub t: f64,
    pub s: f64,
    /// `semidist(LHS, RHS)`
    pub d1: f64,
    /// `semidist(RHS, LHS)`
    pub d2: f64,
    pub lhs_size: usize,
    pub rhs_size: usize,
}

/// Compares `Φ(t+s, ω, u0)` with `Φ(t, θ_s ω, Φ(s, ω, u0))`. The right side
/// solves from every element of `Φ(s, ω, u0)` on `[0, T - s]`.
pub fn check_cocycle(
    t: f64,
    s: f64,
    omega: &Driver,
    u0: &SpectralField,
    spec: &ProblemSpec,
    cfg: &SolverConfig,
) -> Result<CocycleReport> {
    let ks = grid_steps(spec, s)?;
    let kt = grid_steps(spec, t)?;
    if ks + kt > spec.n_steps {
        return Err(Error::OutsideWindow {
            time: t + s,
            start: 0.0,
            end: spec.horizon,
        });
    }
    if (omega.path().dt() - spec.dt()).abs() > 1e-12 * spec.dt() {
        return Err(Error::GridMismatch("driver and problem dt differ".into()));
    }
    let base = omega.truncated(spec.n_steps)?;
    let full = solve_mild(u0, &base, spec, cfg)?;
    let lhs = full.solutions.evaluate(ks + kt);
    let mid = full.solutions.evaluate(ks);
    let rest = spec.n_steps - ks;
    let sub = shortened(spec, rest)?;
    let shifted = wiener_shift(omega, ks as isize)?.truncated(rest)?;
    let rhs_sets = mid
        .par_iter()
        .map(|v| solve_mild(v, &shifted, &sub, cfg).map(|r| r.solutions.evaluate(kt)))
        .collect::<Result<Vec<_>>>()?;
    let rhs: Vec<SpectralField> = rhs_sets.into_iter().flatten().collect();
    Ok(CocycleReport {
        t,
        s,
        d1: hausdorff_semidist(&lhs, &rhs)?,
        d2: hausdorff_semidist(&rhs, &lhs)?,
        lhs_size: lhs.len(),
        rhs_size: rhs.len(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct UscRow {
    pub radius: f64,
    /// `max` over samples of `semidist(Φ(t, ω_n, u0_n), Φ(t, ω, u0))`
    pub excess: f64,
    pub samples: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct UscReport {
    pub t: f64,
    pub perturb_driver: bool,
    pub rows: Vec<UscRow>,
    /// `e(r)` never increases as `r` decreases.
    pub monotone: bool,
    /// `2 fp_tol`
    pub floor: f64,
}

fn unit_direction(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> SpectralField {
    loop {
        let v = SpectralField::new((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
        let norm = v.norm();
        if norm > 0.0 {
            return v.scaled(1.0 / norm);
        }
    }
}

/// For each radius `r`, perturbs `u0` by `r` in a random direction (and, when
/// `perturb_driver`, `ω` by a linear path of `β'`-seminorm `r`) and records
/// the worst excess of the perturbed set over the reference set.
#[allow(clippy::too_many_arguments)]
pub fn usc_probe(
    t: f64,
    omega: &SampledPath,
    u0: &SpectralField,
    spec: &ProblemSpec,
    cfg: &SolverConfig,
    radii: &[f64],
    m_per_radius: usize,
    perturb_driver: bool,
    seed: u64,
) -> Result<UscReport> {
    if radii.is_empty()
        || radii.iter().any(|r| !(*r > 0.0))
        || radii.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::param("radii must be positive and strictly decreasing"));
    }
    let k = grid_steps(spec, t)?;
    let omega = omega.restrict(0, spec.n_steps)?;
    let reference = phi(t, &omega, u0, spec, cfg)?.values;
    let n = u0.len();
    let bp = spec.params.beta_prime;
    let mut rows = Vec::new();
    for (ri, &r) in radii.iter().enumerate() {
        let outcomes: Vec<Option<f64>> = (0..m_per_radius)
            .into_par_iter()
            .map(|sample| {
                let mut rng = mode_rng(seed, (ri * m_per_radius + sample) as u64);
                let u0n = u0 + &unit_direction(&mut rng, n).scaled(r);
                let drv = if perturb_driver {
                    let v = unit_direction(&mut rng, n);
                    let ramp = SampledPath::new(
                        0.0,
                        omega.dt(),
                        (0..=omega.n_steps()).map(|j| v.scaled(omega.time(j))).collect(),
                    )
                    .expect("grid");
                    let scale = r / holder_seminorm_full(&ramp, bp);
                    let values = omega
                        .values()
                        .iter()
                        .zip(ramp.values())
                        .map(|(w, e)| w + &e.scaled(scale))
                        .collect();
                    SampledPath::new(0.0, omega.dt(), values).expect("grid")
                } else {
                    omega.clone()
                };
                let set = if k == 0 {
                    Ok(vec![u0n])
                } else {
                    solve_mild(&u0n, &drv, spec, cfg).map(|rep| rep.solutions.evaluate(k))
                };
                match set {
                    Ok(set) => hausdorff_semidist(&set, &reference).ok(),
                    Err(e) => {
                        log::warn!("usc sample failed at radius {r}: {e}");
                        None
                    }
                }
            })
            .collect();
        let failures = outcomes.iter().filter(|o| o.is_none()).count();
        let excess = outcomes.iter().flatten().fold(0.0, |a: f64, b| a.max(*b));
        rows.push(UscRow {
            radius: r,
            excess,
            samples: m_per_radius,
            failures,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].excess <= w[0].excess);
    Ok(UscReport {
        t,
        perturb_driver,
        rows,
        monotone,
        floor: 2.0 * cfg.fp_tol,
    })
}
