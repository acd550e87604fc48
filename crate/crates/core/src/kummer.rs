//! The decay function
//! `K(rho) = sup_{t in [0,T]} t^d int_0^1 e^{-rho t (1-v)} v^a (1-v)^b dv`
//! that controls the weighted-norm contraction estimate.
//!
//! The inner integral is `B(a+1, b+1) M(b+1, a+b+2, -x)` with Kummer's
//! confluent hypergeometric function `M`. For moderate `x` it is summed via
//! Kummer's transformation (positive series); for large `x` by the Watson
//! expansion at `v = 1`.

use statrs::function::beta::beta;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 60.0;

fn check(a: f64, b: f64, d: f64) -> Result<()> {
    if !(a > -1.0 && b > -1.0 && a + b >= -1.0 - 1e-14 && d > 0.0) {
        return Err(Error::param(format!(
            "kummer parameters need a > -1, b > -1, a + b >= -1, d > 0; got a = {a}, b = {b}, d = {d}"
        )));
    }
    Ok(())
}

/// `int_0^1 e^{-x (1-v)} v^a (1-v)^b dv` for `x >= 0`.
pub fn decay_integral(x: f64, a: f64, b: f64) -> f64 {
    if x == 0.0 {
        return beta(a + 1.0, b + 1.0);
    }
    if x <= SERIES_LIMIT {
        // e^{-x} M(a+1, a+b+2, x)
        let (p, q) = (a + 1.0, a + b + 2.0);
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 0.0;
        loop {
            term *= (p + k) / (q + k) * x / (k + 1.0);
            sum += term;
            k += 1.0;
            if term < 1e-17 * sum && k > x {
                break;
            }
        }
        beta(a + 1.0, b + 1.0) * (-x).exp() * sum
    } else {
        // sum_s binom(a, s) (-1)^s Γ(b+s+1) x^{-(b+s+1)}
        let mut coeff = 1.0; // binom(a, s) (-1)^s
        let mut s = 0.0;
        let mut sum = 0.0;
        let mut prev = f64::INFINITY;
        loop {
            let term = coeff * (ln_gamma(b + s + 1.0) - (b + s + 1.0) * x.ln()).exp();
            if term.abs() > prev {
                break;
            }
            sum += term;
            if term.abs() < 1e-17 * sum.abs() || coeff == 0.0 {
                break;
            }
            prev = term.abs();
            coeff *= -(a - s) / (s + 1.0);
            s += 1.0;
        }
        sum
    }
}

/// `K(rho)` for exponents `(a, b, d)` on `[0, horizon]`.
pub fn kummer_k(rho: f64, a: f64, b: f64, d: f64, horizon: f64) -> Result<f64> {
    check(a, b, d)?;
    if !(rho >= 0.0) || !(horizon > 0.0) {
        return Err(Error::param(format!(
            "kummer needs rho >= 0 and horizon > 0; got rho = {rho}, horizon = {horizon}"
        )));
    }
    if rho == 0.0 {
        return Ok(horizon.powf(d) * beta(a + 1.0, b + 1.0));
    }
    let f = |t: f64| t.powf(d) * decay_integral(rho * t, a, b);
    // coarse log-spaced scan, then golden-section refinement around the best node
    let n = 400;
    let lo_exp = -14.0f64;
    let nodes: Vec<f64> = (0..=n)
        .map(|k| horizon * 10f64.powf(lo_exp * (1.0 - k as f64 / n as f64)))
        .collect();
    let (mut best_k, mut best) = (n, f(horizon));
    for (k, &t) in nodes.iter().enumerate() {
        let v = f(t);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    let mut lo = nodes[best_k.saturating_sub(1)];
    let mut hi = nodes[(best_k + 1).min(n)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..100 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(best.max(f1).max(f2))
}
