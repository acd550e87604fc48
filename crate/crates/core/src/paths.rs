//! Driving paths and solution paths on uniform time grids: exact sampling of
//! scalar and Hilbert-valued fractional Brownian motion, the Wiener shift,
//! and grid estimators of Hölder-type norms.

use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{SpectralField, SpectralOperator};

/// Largest grid sampled by Cholesky factorization when the method is `Auto`.
pub const CHOLESKY_MAX_STEPS: usize = 1 << 10;

/// Exponents `(H, beta, beta', alpha)` with
/// `1/2 < beta < beta' < H < 1` and `1 - beta' < alpha < beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderParams {
    pub hurst: f64,
    pub beta: f64,
    pub beta_prime: f64,
    pub alpha: f64,
}

impl Default for HolderParams {
    fn default() -> Self {
        Self {
            hurst: 0.75,
            beta: 0.55,
            beta_prime: 0.65,
            alpha: 0.5,
        }
    }
}

impl HolderParams {
    pub fn new(hurst: f64, beta: f64, beta_prime: f64, alpha: f64) -> Result<Self> {
        let p = Self {
            hurst,
            beta,
            beta_prime,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            hurst,
            beta,
            beta_prime,
            alpha,
        } = *self;
        if !(0.5 < beta && beta < beta_prime && beta_prime < hurst && hurst < 1.0) {
            return Err(Error::ParameterChain(format!(
                "need 1/2 < beta ({beta}) < beta' ({beta_prime}) < H ({hurst}) < 1"
            )));
        }
        if !(1.0 - beta_prime < alpha && alpha < beta) {
            return Err(Error::ParameterChain(format!(
                "need 1 - beta' ({}) < alpha ({alpha}) < beta ({beta})",
                1.0 - beta_prime
            )));
        }
        Ok(())
    }
}

/// A path on the uniform grid `t0 + k dt`, `k = 0..=n_steps`, with values in
/// the truncated eigenbasis. Scalar paths use one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPath {
    t0: f64,
    dt: f64,
    values: Vec<SpectralField>,
}

impl SampledPath {
    pub fn new(t0: f64, dt: f64, values: Vec<SpectralField>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param(format!("dt must be positive, got {dt}")));
        }
        if values.len() < 2 {
            return Err(Error::param("a path needs at least two grid nodes"));
        }
        let n = values[0].len();
        if n == 0 || values.iter().any(|v| v.len() != n) {
            return Err(Error::param("all nodes must carry the same positive number of modes"));
        }
        Ok(Self { t0, dt, values })
    }

    pub fn from_scalar(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        Self::new(
            t0,
            dt,
            values.into_iter().map(|v| SpectralField::new(vec![v])).collect(),
        )
    }

    /// Builds a path from per-mode series (`modes[i][k]` is mode `i` at node `k`).
    pub fn from_modes(t0: f64, dt: f64, modes: &[Vec<f64>]) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::param("no modes"));
        }
        let len = modes[0].len();
        if modes.iter().any(|m| m.len() != len) {
            return Err(Error::param("mode series have different lengths"));
        }
        let values = (0..len)
            .map(|k| SpectralField::new(modes.iter().map(|m| m[k]).collect()))
            .collect();
        Self::new(t0, dt, values)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len()
    }

    pub fn n_modes(&self) -> usize {
        self.values[0].len()
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_steps())
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn values(&self) -> &[SpectralField] {
        &self.values
    }

    pub fn value(&self, k: usize) -> &SpectralField {
        &self.values[k]
    }

    pub fn last(&self) -> &SpectralField {
        self.values.last().expect("path has nodes")
    }

    pub fn into_values(self) -> Vec<SpectralField> {
        self.values
    }

    /// Values of scalar path (mode 0).
    pub fn scalar_values(&self) -> Vec<f64> {
        self.mode_series(0)
    }

    pub fn mode_series(&self, mode: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[mode]).collect()
    }

    /// Grid index of `time`, which must lie on the grid.
    pub fn index_of(&self, time: f64) -> Result<usize> {
        let x = (time - self.t0) / self.dt;
        let k = x.round();
        if (x - k).abs() > 1e-7 || k < 0.0 || k as usize > self.n_steps() {
            return Err(Error::OutsideWindow {
                time,
                start: self.t0,
                end: self.t_end(),
            });
        }
        Ok(k as usize)
    }

    /// Nodes `i0..=i1`, keeping their absolute times.
    pub fn restrict(&self, i0: usize, i1: usize) -> Result<SampledPath> {
        if i1 <= i0 || i1 > self.n_steps() {
            return Err(Error::param(format!(
                "invalid node range {i0}..={i1} for {} steps",
                self.n_steps()
            )));
        }
        Ok(Self {
            t0: self.time(i0),
            dt: self.dt,
            values: self.values[i0..=i1].to_vec(),
        })
    }

    pub fn rebased(mut self, t0: f64) -> SampledPath {
        self.t0 = t0;
        self
    }

    pub fn scaled(&self, factor: f64) -> SampledPath {
        Self {
            t0: self.t0,
            dt: self.dt,
            values: self.values.iter().map(|v| v.scaled(factor)).collect(),
        }
    }

    /// Every `factor`-th node.
    pub fn subsample(&self, factor: usize) -> Result<SampledPath> {
        if factor == 0 || !self.n_steps().is_multiple_of(factor) {
            return Err(Error::param(format!(
                "cannot subsample {} steps by {factor}",
                self.n_steps()
            )));
        }
        Self::new(
            self.t0,
            self.dt * factor as f64,
            self.values.iter().step_by(factor).cloned().collect(),
        )
    }

    pub fn same_grid(&self, other: &SampledPath) -> bool {
        self.n_nodes() == other.n_nodes()
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
            && (self.t0 - other.t0).abs() <= 1e-12 * self.dt.max(1.0)
    }

    /// Writes `t, mode_1, ..., mode_N` rows, preceded by `# `-prefixed header lines.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> Result<()> {
        for line in header {
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut names = vec!["t".to_string()];
        names.extend((1..=self.n_modes()).map(|i| format!("mode_{i}")));
        w.write_record(&names)?;
        for (k, v) in self.values.iter().enumerate() {
            let mut rec = Vec::with_capacity(v.len() + 1);
            rec.push(fmt17(self.time(k)));
            rec.extend(v.coeffs().iter().map(|c| fmt17(*c)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format written by [`SampledPath::write_csv`]. The grid must be
    /// uniform.
    pub fn read_csv<R: Read>(input: R) -> Result<SampledPath> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let nums: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse).collect();
            let nums = nums.map_err(|e| Error::param(format!("bad number in path csv: {e}")))?;
            if nums.len() < 2 {
                return Err(Error::param("path csv rows need t and at least one mode"));
            }
            times.push(nums[0]);
            values.push(SpectralField::new(nums[1..].to_vec()));
        }
        if times.len() < 2 {
            return Err(Error::param("path csv needs at least two rows"));
        }
        let dt = times[1] - times[0];
        for (k, t) in times.iter().enumerate() {
            if (t - (times[0] + k as f64 * dt)).abs() > 1e-9 * dt.abs().max(1.0) {
                return Err(Error::param("path csv grid is not uniform"));
            }
        }
        Self::new(times[0], dt, values)
    }
}

/// Fixed 17-significant-digit formatting used for every emitted number.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// `1/2 (|t|^{2H} + |s|^{2H} - |t - s|^{2H})`.
pub fn fbm_covariance(hurst: f64, t: f64, s: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (t.abs().powf(h2) + s.abs().powf(h2) - (t - s).abs().powf(h2))
}

fn check_hurst(hurst: f64) -> Result<()> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::param(format!("Hurst parameter must lie in (0, 1), got {hurst}")));
    }
    Ok(())
}

fn check_grid(n_steps: usize, dt: f64) -> Result<()> {
    if n_steps == 0 || !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param(format!(
            "need n_steps > 0 and dt > 0, got {n_steps} and {dt}"
        )));
    }
    Ok(())
}

/// Cholesky factor of the fBm covariance at a set of nonzero times.
#[derive(Debug, Clone)]
pub struct FbmCovariance {
    hurst: f64,
    times: Vec<f64>,
    factor: DMatrix<f64>,
}

impl FbmCovariance {
    pub fn new(hurst: f64, times: Vec<f64>) -> Result<Self> {
        check_hurst(hurst)?;
        if times.contains(&0.0) {
            return Err(Error::param("fBm covariance times must exclude 0"));
        }
        let n = times.len();
        let cov = DMatrix::from_fn(n, n, |i, j| fbm_covariance(hurst, times[i], times[j]));
        let chol = cov.cholesky().ok_or_else(|| {
            Error::Factorization(format!("fBm covariance (H = {hurst}, n = {n}) not positive definite"))
        })?;
        Ok(Self {
            hurst,
            times,
            factor: chol.l(),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `max_{ij} |(L L^T)_{ij} - cov(t_i, t_j)|`.
    pub fn max_reconstruction_error(&self) -> f64 {
        let prod = &self.factor * self.factor.transpose();
        let mut err: f64 = 0.0;
        for i in 0..self.times.len() {
            for j in 0..self.times.len() {
                let c = fbm_covariance(self.hurst, self.times[i], self.times[j]);
                err = err.max((prod[(i, j)] - c).abs());
            }
        }
        err
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = self.times.len();
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let l = &self.factor;
        (0..n)
            .map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum())
            .collect()
    }
}

/// Circulant embedding of fractional Gaussian noise (exact when the
/// embedding eigenvalues are nonnegative, which holds for fGn).
#[derive(Debug, Clone)]
pub struct FgnCirculant {
    n_steps: usize,
    dt: f64,
    hurst: f64,
    scaled_sqrt_eigs: Vec<f64>,
}

impl FgnCirculant {
    pub fn new(hurst: f64, n_steps: usize, dt: f64) -> Result<Self> {
        check_hurst(hurst)?;
        check_grid(n_steps, dt)?;
        let h2 = 2.0 * hurst;
        let gamma = |k: usize| {
            let k = k as f64;
            0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
        };
        let m = 2 * n_steps;
        let mut row: Vec<Complex<f64>> = (0..m)
            .map(|j| {
                let k = if j <= n_steps { j } else { m - j };
                Complex::new(gamma(k), 0.0)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut row);
        let mut scaled = Vec::with_capacity(m);
        for c in &row {
            if c.re < -1e-10 {
                return Err(Error::Factorization(format!(
                    "circulant embedding eigenvalue {} < 0 (H = {hurst})",
                    c.re
                )));
            }
            scaled.push((c.re.max(0.0) / m as f64).sqrt());
        }
        Ok(Self {
            n_steps,
            dt,
            hurst,
            scaled_sqrt_eigs: scaled,
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let m = self.scaled_sqrt_eigs.len();
        let mut buf: Vec<Complex<f64>> = self
            .scaled_sqrt_eigs
            .iter()
            .map(|s| {
                let a: f64 = StandardNormal.sample(rng);
                let b: f64 = StandardNormal.sample(rng);
                Complex::new(s * a, s * b)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let scale = self.dt.powf(self.hurst);
        let mut acc = 0.0;
        buf[..self.n_steps]
            .iter()
            .map(|c| {
                acc += scale * c.re;
                acc
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    /// Cholesky up to [`CHOLESKY_MAX_STEPS`], circulant embedding beyond.
    #[default]
    Auto,
    Cholesky,
    Circulant,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Cholesky(FbmCovariance),
    Circulant(FgnCirculant),
}

/// Reusable one-sided fBm sampler on `k dt`, `k = 0..=n_steps`. The
/// factorization is built once and shared by every trajectory and mode.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    n_steps: usize,
    dt: f64,
    kind: Arc<SamplerKind>,
}

impl FbmSampler {
    pub fn new(hurst: f64, n_steps: usize, dt: f64, method: SamplerMethod) -> Result<Self> {
        check_hurst(hurst)?;
        check_grid(n_steps, dt)?;
        let use_cholesky = match method {
            SamplerMethod::Auto => n_steps <= CHOLESKY_MAX_STEPS,
            SamplerMethod::Cholesky => true,
            SamplerMethod::Circulant => false,
        };
        let kind = if use_cholesky {
            let times = (1..=n_steps).map(|k| k as f64 * dt).collect();
            SamplerKind::Cholesky(FbmCovariance::new(hurst, times)?)
        } else {
            SamplerKind::Circulant(FgnCirculant::new(hurst, n_steps, dt)?)
        };
        Ok(Self {
            n_steps,
            dt,
            kind: Arc::new(kind),
        })
    }

    pub fn covariance(&self) -> Option<&FbmCovariance> {
        match self.kind.as_ref() {
            SamplerKind::Cholesky(c) => Some(c),
            SamplerKind::Circulant(_) => None,
        }
    }

    /// Node values (starting with 0) for the given seed and stream.
    pub fn sample_values(&self, seed: u64, stream: u64) -> Vec<f64> {
        let mut rng = mode_rng(seed, stream);
        let tail = match self.kind.as_ref() {
            SamplerKind::Cholesky(c) => c.sample(&mut rng),
            SamplerKind::Circulant(c) => c.sample(&mut rng),
        };
        let mut v = Vec::with_capacity(self.n_steps + 1);
        v.push(0.0);
        v.extend(tail);
        v
    }

    pub fn sample(&self, seed: u64) -> SampledPath {
        SampledPath::from_scalar(0.0, self.dt, self.sample_values(seed, 0))
            .expect("sampler grid is valid")
    }
}

/// Generator for one trajectory mode. Mode `i` of a Hilbert-valued path uses
/// stream `i`, so changing the mode count never reshuffles earlier modes.
pub fn mode_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Exact one-sided scalar fBm on `[0, n_steps dt]`.
pub fn sample_fbm_1d(hurst: f64, n_steps: usize, dt: f64, seed: u64) -> Result<SampledPath> {
    Ok(FbmSampler::new(hurst, n_steps, dt, SamplerMethod::Auto)?.sample(seed))
}

/// Exact two-sided scalar fBm on `[-n_half dt, n_half dt]`, zero at time 0.
pub fn sample_fbm_two_sided(hurst: f64, n_half: usize, dt: f64, seed: u64) -> Result<SampledPath> {
    check_grid(n_half, dt)?;
    let times: Vec<f64> = (0..=2 * n_half)
        .filter(|&k| k != n_half)
        .map(|k| (k as f64 - n_half as f64) * dt)
        .collect();
    let cov = FbmCovariance::new(hurst, times)?;
    let mut rng = mode_rng(seed, 0);
    let mut tail = cov.sample(&mut rng);
    tail.insert(n_half, 0.0);
    SampledPath::from_scalar(-(n_half as f64) * dt, dt, tail)
}

/// A sampled `Q`-fBm together with a flag for the all-zero trace case.
#[derive(Debug, Clone)]
pub struct QfbmSample {
    pub path: SampledPath,
    pub degenerate: bool,
}

/// `B^H(t) = sum_i sqrt(q_i) beta_i^H(t) e_i` with independent scalar fBms.
pub fn sample_qfbm(
    op: &SpectralOperator,
    hurst: f64,
    n_steps: usize,
    dt: f64,
    seed: u64,
) -> Result<QfbmSample> {
    let sampler = FbmSampler::new(hurst, n_steps, dt, SamplerMethod::Auto)?;
    Ok(sample_qfbm_with(&sampler, op, seed))
}

pub fn sample_qfbm_with(sampler: &FbmSampler, op: &SpectralOperator, seed: u64) -> QfbmSample {
    let n = sampler.n_steps;
    let modes: Vec<Vec<f64>> = op
        .trace_weights()
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            if q == 0.0 {
                vec![0.0; n + 1]
            } else {
                let s = q.sqrt();
                sampler
                    .sample_values(seed, i as u64)
                    .into_iter()
                    .map(|x| s * x)
                    .collect()
            }
        })
        .collect();
    let degenerate = op.trace() == 0.0;
    if degenerate {
        log::warn!("trace of Q is zero: driving path is identically zero");
    }
    QfbmSample {
        path: SampledPath::from_modes(0.0, sampler.dt, &modes).expect("valid grid"),
        degenerate,
    }
}

/// A driving path `omega` on `[0, T]` that remembers the sampled root path it
/// was shifted from, so shifts compose exactly: `theta_b theta_a = theta_{a+b}`.
#[derive(Debug, Clone)]
pub struct Driver {
    root: Arc<SampledPath>,
    origin: usize,
    path: SampledPath,
}

impl Driver {
    /// Wraps a root path whose grid contains time 0, where it must vanish.
    pub fn new(root: SampledPath) -> Result<Self> {
        let origin = root.index_of(0.0)?;
        if root.value(origin).norm() != 0.0 {
            return Err(Error::param("driving path must vanish at time 0"));
        }
        Self::at(Arc::new(root), origin)
    }

    fn at(root: Arc<SampledPath>, origin: usize) -> Result<Self> {
        if origin + 1 > root.n_steps() {
            return Err(Error::param("shift leaves fewer than two grid nodes"));
        }
        let base = root.value(origin).clone();
        let values = root.values()[origin..].iter().map(|v| v - &base).collect();
        let path = SampledPath::new(0.0, root.dt(), values)?;
        Ok(Self { root, origin, path })
    }

    pub fn path(&self) -> &SampledPath {
        &self.path
    }

    pub fn root(&self) -> &SampledPath {
        &self.root
    }

    /// Driver restricted to `[0, n_steps dt]`.
    pub fn truncated(&self, n_steps: usize) -> Result<SampledPath> {
        self.path.restrict(0, n_steps)
    }
}

/// `theta_tau omega(.) = omega(tau + .) - omega(tau)` with `tau = shift_steps dt`.
/// Negative shifts need a two-sided root.
pub fn wiener_shift(omega: &Driver, shift_steps: isize) -> Result<Driver> {
    let target = omega.origin as isize + shift_steps;
    if target < 0 || target as usize >= omega.root.n_steps() {
        return Err(Error::OutsideWindow {
            time: shift_steps as f64 * omega.root.dt(),
            start: omega.root.t0() - omega.root.time(omega.origin),
            end: omega.root.t_end() - omega.root.time(omega.origin),
        });
    }
    Driver::at(Arc::clone(&omega.root), target as usize)
}

fn node_range(u: &SampledPath, s: f64, t: f64) -> Result<(usize, usize)> {
    if !(s < t) {
        return Err(Error::param(format!("need s < t, got {s} and {t}")));
    }
    let lo = u.t0() - 1e-9 * u.dt();
    let hi = u.t_end() + 1e-9 * u.dt();
    if s < lo || t > hi {
        return Err(Error::OutsideWindow {
            time: if s < lo { s } else { t },
            start: u.t0(),
            end: u.t_end(),
        });
    }
    let i0 = ((s - u.t0()) / u.dt() - 1e-9).ceil().max(0.0) as usize;
    let i1 = (((t - u.t0()) / u.dt() + 1e-9).floor() as usize).min(u.n_steps());
    if i1 <= i0 {
        return Err(Error::param(format!("fewer than two grid nodes in [{s}, {t}]")));
    }
    Ok((i0, i1))
}

/// Grid estimate of `|||u|||_{beta, s, t}`: the largest Hölder quotient over
/// node pairs inside `[s, t]`. A lower bound of the true seminorm.
pub fn holder_seminorm(u: &SampledPath, beta: f64, s: f64, t: f64) -> Result<f64> {
    let (i0, i1) = node_range(u, s, t)?;
    Ok(seminorm_nodes(u, beta, i0, i1))
}

/// `|||u|||_beta` over the whole window.
pub fn holder_seminorm_full(u: &SampledPath, beta: f64) -> f64 {
    seminorm_nodes(u, beta, 0, u.n_steps())
}

fn seminorm_nodes(u: &SampledPath, beta: f64, i0: usize, i1: usize) -> f64 {
    let inv_gap: Vec<f64> = (0..=i1 - i0)
        .map(|g| (g as f64 * u.dt()).powf(-beta))
        .collect();
    let vals = u.values();
    let mut best: f64 = 0.0;
    for k in i0 + 1..=i1 {
        for j in i0..k {
            best = best.max(vals[k].distance(&vals[j]) * inv_gap[k - j]);
        }
    }
    best
}

pub fn sup_norm(u: &SampledPath) -> f64 {
    u.values().iter().map(SpectralField::norm).fold(0.0, f64::max)
}

/// `||u||_{beta, beta; rho}` over the path's window `[T1, T2]`:
/// `sup_s e^{-rho (s - T1)} ||u(s)|| + sup_{T1 < s < t} (s - T1)^beta e^{-rho (t - T1)} ||u(t) - u(s)|| / (t - s)^beta`.
pub fn weighted_holder_norm(u: &SampledPath, beta: f64, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::param(format!("rho must be >= 0, got {rho}")));
    }
    Ok(weighted_parts(u, beta, rho).iter().sum())
}

/// Sup part and Hölder part of the weighted norm.
pub fn weighted_parts(u: &SampledPath, beta: f64, rho: f64) -> [f64; 2] {
    let n = u.n_steps();
    let dt = u.dt();
    let damp: Vec<f64> = (0..=n).map(|k| (-rho * k as f64 * dt).exp()).collect();
    let pow_beta: Vec<f64> = (0..=n).map(|k| (k as f64 * dt).powf(beta)).collect();
    let vals = u.values();
    let sup = vals
        .iter()
        .zip(&damp)
        .map(|(v, d)| d * v.norm())
        .fold(0.0, f64::max);
    let mut hol: f64 = 0.0;
    for k in 2..=n {
        if damp[k] == 0.0 {
            break;
        }
        let mut inner: f64 = 0.0;
        for j in 1..k {
            inner = inner.max(pow_beta[j] / pow_beta[k - j] * vals[k].distance(&vals[j]));
        }
        hol = hol.max(damp[k] * inner);
    }
    [sup, hol]
}

/// `||u||_{beta, beta}` (the unweighted norm).
pub fn holder_norm_bb(u: &SampledPath, beta: f64) -> f64 {
    weighted_parts(u, beta, 0.0).iter().sum()
}

/// Sup of the Hölder quotient over node pairs with gap at most `delta`.
/// Returns 0 (with a warning) when `delta` is below the grid step.
pub fn wiener_modulus(u: &SampledPath, beta: f64, delta: f64) -> Result<f64> {
    let window = u.t_end() - u.t0();
    if !(delta > 0.0 && delta <= window * (1.0 + 1e-12)) {
        return Err(Error::param(format!(
            "delta must lie in (0, {window}], got {delta}"
        )));
    }
    let max_gap = ((delta / u.dt()) * (1.0 + 1e-12)).floor() as usize;
    if max_gap == 0 {
        log::warn!("wiener modulus window {delta} is below the grid step {}", u.dt());
        return Ok(0.0);
    }
    let vals = u.values();
    let mut best: f64 = 0.0;
    for g in 1..=max_gap.min(u.n_steps()) {
        let w = (g as f64 * u.dt()).powf(-beta);
        for j in 0..=u.n_steps() - g {
            best = best.max(vals[j + g].distance(&vals[j]) * w);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn linear(n: usize, slope: f64) -> SampledPath {
        let dt = 1.0 / n as f64;
        SampledPath::from_scalar(0.0, dt, (0..=n).map(|k| slope * k as f64 * dt).collect()).unwrap()
    }

    #[test]
    fn params_chain() {
        assert!(HolderParams::default().validate().is_ok());
        assert!(HolderParams::new(0.75, 0.45, 0.65, 0.5).is_err());
        assert!(HolderParams::new(0.75, 0.55, 0.8, 0.5).is_err());
        assert!(HolderParams::new(0.75, 0.55, 0.65, 0.3).is_err());
        assert!(HolderParams::new(0.75, 0.55, 0.65, 0.56).is_err());
    }

    #[test]
    fn cholesky_reconstructs_covariance() {
        let s = FbmSampler::new(0.75, 64, 1.0 / 64.0, SamplerMethod::Cholesky).unwrap();
        assert!(s.covariance().unwrap().max_reconstruction_error() < 1e-12);
        let p = s.sample(7);
        assert_eq!(p.value(0)[0], 0.0);
        assert_eq!(p, s.sample(7));
        assert_ne!(p, s.sample(8));
    }

    #[test]
    fn circulant_embedding_is_valid() {
        for &h in &[0.55, 0.75, 0.95] {
            let c = FgnCirculant::new(h, 2048, 1.0 / 2048.0).unwrap();
            assert_eq!(c.scaled_sqrt_eigs.len(), 4096);
        }
        let s = FbmSampler::new(0.75, 2048, 1.0 / 2048.0, SamplerMethod::Auto).unwrap();
        assert!(s.covariance().is_none());
        assert_eq!(s.sample_values(1, 0).len(), 2049);
    }

    #[test]
    fn two_sided_vanishes_at_origin() {
        let p = sample_fbm_two_sided(0.7, 16, 0.1, 3).unwrap();
        assert_eq!(p.n_steps(), 32);
        assert_eq!(p.value(16)[0], 0.0);
        assert_relative_eq!(p.t0(), -1.6, epsilon = 1e-12);
    }

    #[test]
    fn qfbm_degenerate_and_sparse() {
        let op = SpectralOperator::new(vec![1.0, 4.0, 9.0], vec![1.0, 0.0, 0.0]).unwrap();
        let s = sample_qfbm(&op, 0.7, 32, 1.0 / 32.0, 11).unwrap();
        assert!(!s.degenerate);
        assert!(s.path.mode_series(0).iter().any(|x| *x != 0.0));
        assert!(s.path.mode_series(1).iter().all(|x| *x == 0.0));
        assert!(s.path.mode_series(2).iter().all(|x| *x == 0.0));

        let op = op.with_trace_weights(vec![0.0; 3]).unwrap();
        let s = sample_qfbm(&op, 0.7, 32, 1.0 / 32.0, 11).unwrap();
        assert!(s.degenerate);
        assert_eq!(sup_norm(&s.path), 0.0);
    }

    #[test]
    fn qfbm_modes_stable_under_mode_count() {
        let small = SpectralOperator::laplacian_1d(2, std::f64::consts::PI).unwrap();
        let big = SpectralOperator::laplacian_1d(5, std::f64::consts::PI).unwrap();
        let a = sample_qfbm(&small, 0.7, 16, 0.0625, 5).unwrap().path;
        let b = sample_qfbm(&big, 0.7, 16, 0.0625, 5).unwrap().path;
        assert_eq!(a.mode_series(1), b.mode_series(1));
        // mode 0 with q = 1 is the scalar sample for the same seed
        let scalar = sample_fbm_1d(0.7, 16, 0.0625, 5).unwrap();
        assert_eq!(a.mode_series(0), scalar.scalar_values());
    }

    #[test]
    fn shift_identity_linear_and_composition() {
        let w = Driver::new(linear(64, 3.0)).unwrap();
        let w0 = wiener_shift(&w, 0).unwrap();
        assert_eq!(w0.path(), w.path());

        let ws = wiener_shift(&w, 16).unwrap();
        assert_eq!(ws.path().n_steps(), 48);
        assert_eq!(ws.path().value(0)[0], 0.0);
        for k in 0..=48 {
            assert_relative_eq!(ws.path().value(k)[0], 3.0 * ws.path().time(k), epsilon = 1e-13);
        }

        let fbm = Driver::new(sample_fbm_1d(0.7, 128, 1.0 / 128.0, 9).unwrap()).unwrap();
        let ab = wiener_shift(&wiener_shift(&fbm, 20).unwrap(), 31).unwrap();
        let direct = wiener_shift(&fbm, 51).unwrap();
        assert_eq!(ab.path(), direct.path());

        assert!(wiener_shift(&fbm, 128).is_err());
        assert!(wiener_shift(&fbm, -1).is_err());
    }

    #[test]
    fn negative_shift_on_two_sided_root() {
        let root = sample_fbm_two_sided(0.7, 32, 1.0 / 32.0, 2).unwrap();
        let w = Driver::new(root.clone()).unwrap();
        let back = wiener_shift(&w, -8).unwrap();
        assert_eq!(back.path().n_steps(), 40);
        let fwd = wiener_shift(&back, 8).unwrap();
        assert_eq!(fwd.path(), w.path());
        assert_eq!(back.path().value(0)[0], 0.0);
        assert_eq!(back.path().value(8)[0], root.value(32)[0] - root.value(24)[0]);
    }

    #[test]
    fn seminorm_examples() {
        let c = SampledPath::from_scalar(0.0, 0.1, vec![2.0; 11]).unwrap();
        assert_eq!(holder_seminorm(&c, 0.5, 0.0, 1.0).unwrap(), 0.0);
        let u = linear(100, 1.0);
        assert_relative_eq!(holder_seminorm(&u, 0.5, 0.0, 1.0).unwrap(), 1.0, epsilon = 1e-12);
        assert!(holder_seminorm(&u, 0.5, 0.5, 0.505).is_err());
        assert!(holder_seminorm(&u, 0.5, 0.5, 0.4).is_err());
        assert!(holder_seminorm(&u, 0.5, -0.5, 0.4).is_err());
    }

    #[test]
    fn weighted_norm_examples() {
        let c = SampledPath::from_scalar(0.0, 0.1, vec![-1.5; 11]).unwrap();
        assert_eq!(weighted_holder_norm(&c, 0.6, 0.0).unwrap(), 1.5);

        // brute-force double loop over all grid pairs
        let u = linear(64, 1.0);
        let (beta, rho) = (0.6, 10.0);
        let mut sup: f64 = 0.0;
        let mut hol: f64 = 0.0;
        for k in 0..=64 {
            let t = u.time(k);
            sup = sup.max((-rho * t).exp() * t.abs());
            for j in 1..k {
                let s = u.time(j);
                hol = hol.max(s.powf(beta) * (-rho * t).exp() * (t - s) / (t - s).powf(beta));
            }
        }
        assert_relative_eq!(weighted_holder_norm(&u, beta, rho).unwrap(), sup + hol, epsilon = 1e-13);
        assert!(weighted_holder_norm(&u, beta, -1.0).is_err());
    }

    #[test]
    fn modulus_examples() {
        let c = SampledPath::from_scalar(0.0, 0.1, vec![1.0; 11]).unwrap();
        assert_eq!(wiener_modulus(&c, 0.5, 0.3).unwrap(), 0.0);
        let u = linear(64, 1.0);
        assert_relative_eq!(wiener_modulus(&u, 0.5, 0.25).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(wiener_modulus(&u, 0.5, 1e-3).unwrap(), 0.0);
        assert!(wiener_modulus(&u, 0.5, 2.0).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let op = SpectralOperator::laplacian_1d(3, 1.0).unwrap();
        let p = sample_qfbm(&op, 0.8, 8, 0.125, 1).unwrap().path;
        let mut buf = Vec::new();
        p.write_csv(&mut buf, &["hello".into()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# hello\nt,mode_1,mode_2,mode_3\n"));
        let q = SampledPath::read_csv(buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }
}
