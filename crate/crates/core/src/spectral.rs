//! Truncated spectral representation of a strictly positive self-adjoint
//! operator `-A`: its eigenvalues, the diagonal semigroup `S(t) = e^{tA}`,
//! the fractional power norms of `V_delta = D((-A)^delta)`, and measured
//! semigroup constants.

use std::ops::{Add, Index, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of an element of `V` in the eigenbasis `(e_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField(Vec<f64>);

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self(coeffs)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// The basis vector `e_{index+1}` (zero-based index).
    pub fn unit(n: usize, index: usize) -> Self {
        let mut c = vec![0.0; n];
        c[index] = 1.0;
        Self(c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &SpectralField) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, factor: f64) -> SpectralField {
        Self(self.0.iter().map(|c| c * factor).collect())
    }

    pub fn axpy(&mut self, a: f64, x: &SpectralField) {
        for (y, xi) in self.0.iter_mut().zip(&x.0) {
            *y += a * xi;
        }
    }
}

impl Index<usize> for SpectralField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        SpectralField(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        SpectralField(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

/// Eigenvalues of `-A` (ascending, positive) and trace weights of the noise
/// covariance `Q` in the same eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralOperator {
    eigenvalues: Vec<f64>,
    trace_weights: Vec<f64>,
}

impl SpectralOperator {
    pub fn new(eigenvalues: Vec<f64>, trace_weights: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::param("operator needs at least one mode"));
        }
        if eigenvalues.len() != trace_weights.len() {
            return Err(Error::param(format!(
                "{} eigenvalues but {} trace weights",
                eigenvalues.len(),
                trace_weights.len()
            )));
        }
        if !(eigenvalues[0] > 0.0) {
            return Err(Error::param("smallest eigenvalue must be strictly positive"));
        }
        if eigenvalues.iter().any(|l| !l.is_finite()) {
            return Err(Error::param("eigenvalues must be finite"));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("eigenvalues must be nondecreasing"));
        }
        if trace_weights.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(Error::param("trace weights must be finite and nonnegative"));
        }
        Ok(Self {
            eigenvalues,
            trace_weights,
        })
    }

    /// Dirichlet Laplacian on `(0, length)`: `lambda_i = (i pi / length)^2`,
    /// with trace weights `q_i = i^{-2}`.
    pub fn laplacian_1d(n_modes: usize, length: f64) -> Result<Self> {
        if n_modes == 0 || !(length > 0.0) {
            return Err(Error::param("laplacian needs n_modes > 0 and length > 0"));
        }
        let k = std::f64::consts::PI / length;
        let eig = (1..=n_modes).map(|i| (i as f64 * k).powi(2)).collect();
        let q = (1..=n_modes).map(|i| 1.0 / (i * i) as f64).collect();
        Self::new(eig, q)
    }

    pub fn with_trace_weights(self, trace_weights: Vec<f64>) -> Result<Self> {
        Self::new(self.eigenvalues, trace_weights)
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn trace_weights(&self) -> &[f64] {
        &self.trace_weights
    }

    pub fn trace(&self) -> f64 {
        self.trace_weights.iter().sum()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    fn check_field(&self, u: &SpectralField) -> Result<()> {
        if u.len() != self.n_modes() {
            return Err(Error::GridMismatch(format!(
                "field has {} modes, operator has {}",
                u.len(),
                self.n_modes()
            )));
        }
        Ok(())
    }

    /// `S(t)u`, acting as `c_i -> exp(-lambda_i t) c_i`.
    pub fn semigroup_apply(&self, t: f64, u: &SpectralField) -> Result<SpectralField> {
        if !(t >= 0.0) {
            return Err(Error::param(format!("semigroup time must be >= 0, got {t}")));
        }
        self.check_field(u)?;
        if t == 0.0 {
            return Ok(u.clone());
        }
        Ok(SpectralField(
            self.eigenvalues
                .iter()
                .zip(u.coeffs())
                .map(|(l, c)| (-l * t).exp() * c)
                .collect(),
        ))
    }

    /// `||(-A)^delta u||`.
    pub fn frac_power_norm(&self, delta: f64, u: &SpectralField) -> Result<f64> {
        if !(delta >= 0.0) {
            return Err(Error::param(format!("delta must be >= 0, got {delta}")));
        }
        self.check_field(u)?;
        if delta == 0.0 {
            return Ok(u.norm());
        }
        Ok(self
            .eigenvalues
            .iter()
            .zip(u.coeffs())
            .map(|(l, c)| (l.powf(delta) * c).powi(2))
            .sum::<f64>()
            .sqrt())
    }

    /// `||(-A)^gamma S(t)||_{L(V)} = sup_i lambda_i^gamma e^{-lambda_i t}`.
    pub fn smoothing_operator_norm(&self, gamma: f64, t: f64) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.powf(gamma) * (-l * t).exp())
            .fold(0.0, f64::max)
    }

    /// `||S(t) - id||_{L(V_sigma, V_theta)} = sup_i lambda_i^{theta-sigma}(1 - e^{-lambda_i t})`.
    pub fn increment_operator_norm(&self, theta: f64, sigma: f64, t: f64) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.powf(theta - sigma) * -(-l * t).exp_m1())
            .fold(0.0, f64::max)
    }

    /// Measures the smoothing and increment constants of the semigroup on a
    /// time grid. The smoothing bound is taken with decay rate `lambda_1`.
    pub fn verify_semigroup_bounds(
        &self,
        gamma: f64,
        beta: f64,
        t_grid: &[f64],
    ) -> Result<SemigroupReport> {
        if t_grid.is_empty() {
            return Err(Error::param("empty time grid"));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::param(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::param(format!("beta must lie in (0, 1), got {beta}")));
        }
        if t_grid.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::param("time grid must be strictly positive"));
        }
        let lambda1 = self.lambda_min();
        let mut rows = Vec::with_capacity(t_grid.len());
        let mut smoothing_constant: f64 = 0.0;
        let mut within_envelope = true;
        let pairs = [(0.0, 1.0), (0.0, beta), (beta, 1.0)];
        let mut increment_constants = vec![0.0f64; pairs.len()];
        for &t in t_grid {
            let measured = self.smoothing_operator_norm(gamma, t);
            let envelope = (gamma / (std::f64::consts::E * t)).powf(gamma);
            within_envelope &= measured <= envelope * (1.0 + 1e-12);
            smoothing_constant =
                smoothing_constant.max(t.powf(gamma) * (lambda1 * t).exp() * measured);
            let increments: Vec<f64> = pairs
                .iter()
                .map(|&(theta, sigma)| self.increment_operator_norm(theta, sigma, t))
                .collect();
            for (k, (&(theta, sigma), m)) in pairs.iter().zip(&increments).enumerate() {
                increment_constants[k] = increment_constants[k].max(m / t.powf(sigma - theta));
            }
            rows.push(SemigroupRow {
                t,
                smoothing_norm: measured,
                envelope,
                increment_norms: increments,
            });
        }
        Ok(SemigroupReport {
            gamma,
            decay_rate: lambda1,
            smoothing_constant,
            increment_pairs: pairs.to_vec(),
            increment_constants,
            within_envelope,
            rows,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SemigroupRow {
    pub t: f64,
    pub smoothing_norm: f64,
    pub envelope: f64,
    pub increment_norms: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SemigroupReport {
    pub gamma: f64,
    pub decay_rate: f64,
    /// `sup_t t^gamma e^{lambda_1 t} ||(-A)^gamma S(t)||`.
    pub smoothing_constant: f64,
    /// `(theta, sigma)` pairs checked for the increment bound.
    pub increment_pairs: Vec<(f64, f64)>,
    /// `sup_t ||S(t) - id||_{L(V_sigma, V_theta)} / t^{sigma - theta}` per pair.
    pub increment_constants: Vec<f64>,
    pub within_envelope: bool,
    pub rows: Vec<SemigroupRow>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn op(eig: &[f64]) -> SpectralOperator {
        SpectralOperator::new(eig.to_vec(), vec![1.0; eig.len()]).unwrap()
    }

    #[test]
    fn semigroup_examples() {
        let a = op(&[1.0, 4.0, 9.0]);
        let u = SpectralField::new(vec![1.0, 1.0, 1.0]);
        assert_eq!(a.semigroup_apply(0.0, &u).unwrap(), u);

        let a = op(&[1.0]);
        let v = a.semigroup_apply(1.0, &SpectralField::new(vec![1.0])).unwrap();
        assert_relative_eq!(v[0], 0.36787944117144233, epsilon = 1e-15);

        let a = op(&[1.0, 4.0]);
        let v = a.semigroup_apply(0.5, &SpectralField::new(vec![2.0, 3.0])).unwrap();
        assert_relative_eq!(v[0], 2.0 * (-0.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(v[1], 3.0 * (-2.0f64).exp(), epsilon = 1e-15);

        assert!(a.semigroup_apply(-1e-3, &SpectralField::zeros(2)).is_err());
    }

    #[test]
    fn frac_power_norm_examples() {
        let a = op(&[1.0, 4.0]);
        let n = a.frac_power_norm(0.0, &SpectralField::new(vec![3.0, 4.0])).unwrap();
        assert_eq!(n, 5.0);
        let a = op(&[4.0]);
        assert_relative_eq!(a.frac_power_norm(0.5, &SpectralField::new(vec![1.0])).unwrap(), 2.0);
        let a = op(&[1.0, 4.0, 9.0]);
        let n = a.frac_power_norm(1.0, &SpectralField::new(vec![1.0, 1.0, 1.0])).unwrap();
        assert_relative_eq!(n, 98f64.sqrt(), epsilon = 1e-14);
        assert!(a.frac_power_norm(-0.1, &SpectralField::zeros(3)).is_err());
    }

    #[test]
    fn rejects_bad_spectrum() {
        assert!(SpectralOperator::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(SpectralOperator::new(vec![2.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(SpectralOperator::new(vec![1.0], vec![-1.0]).is_err());
        assert!(SpectralOperator::new(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn laplacian_spectrum() {
        let a = SpectralOperator::laplacian_1d(4, std::f64::consts::PI).unwrap();
        for (i, l) in a.eigenvalues().iter().enumerate() {
            assert_relative_eq!(*l, ((i + 1) * (i + 1)) as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn semigroup_bound_examples() {
        let eig: Vec<f64> = (1..=10).map(|i| (i * i) as f64).collect();
        let a = op(&eig);
        let rep = a.verify_semigroup_bounds(1.0, 0.55, &[1.0]).unwrap();
        assert_relative_eq!(rep.rows[0].smoothing_norm, (-1.0f64).exp(), epsilon = 1e-15);
        assert!(rep.within_envelope);

        // gamma -> 0: the bound reduces to the contraction property.
        let rep = a.verify_semigroup_bounds(1e-12, 0.55, &[0.5]).unwrap();
        assert!(rep.rows[0].smoothing_norm <= 1.0 + 1e-9);

        // (theta, sigma) = (0, 1): sup (1 - e^{-lambda t}) / lambda <= t.
        let grid: Vec<f64> = (1..=50).map(|k| k as f64 * 0.02).collect();
        let rep = a.verify_semigroup_bounds(0.5, 0.55, &grid).unwrap();
        for row in &rep.rows {
            assert!(row.increment_norms[0] <= row.t);
        }
        assert!(rep.increment_constants.iter().all(|c| *c <= 1.0));
        assert!(a.verify_semigroup_bounds(0.5, 0.55, &[]).is_err());
    }

    #[test]
    fn semigroup_law_and_monotone_smoothing() {
        let a = SpectralOperator::laplacian_1d(16, std::f64::consts::PI).unwrap();
        let u = SpectralField::new((1..=16).map(|i| 1.0 / i as f64).collect());
        for &(t, s) in &[(0.1, 0.2), (0.05, 0.5), (1.0, 0.25)] {
            let lhs = a.semigroup_apply(t, &a.semigroup_apply(s, &u).unwrap()).unwrap();
            let rhs = a.semigroup_apply(t + s, &u).unwrap();
            assert!(lhs.distance(&rhs) <= 1e-15 * u.norm());
        }
        for &delta in &[0.0, 0.4, 1.0, 2.5] {
            let mut prev = f64::INFINITY;
            for k in 1..=20 {
                let n = a
                    .frac_power_norm(delta, &a.semigroup_apply(k as f64 * 0.05, &u).unwrap())
                    .unwrap();
                assert!(n.is_finite() && n <= prev);
                prev = n;
            }
        }
    }
}
