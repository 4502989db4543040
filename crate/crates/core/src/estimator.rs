//! Forgetting-factor recursive estimator for multivariate linear-Gaussian
//! responses `y = u H + e`, `e ~ N(0, Sigma)`.
//!
//! Each update evaluates every right-hand side from the pre-update state:
//!
//! ```text
//! gamma_n = 1 + lambda gamma_{n-1}
//! H_n     = H_{n-1} + P_{n-1} u' (y - u H_{n-1}) / (lambda + u P_{n-1} u')
//! Sigma_n = Sigma_{n-1} - (Sigma_{n-1} - lambda e' e / (lambda + u P_{n-1} u')) / gamma_n
//! P_n     = (P_{n-1} - P_{n-1} u' u P_{n-1} / (lambda + u P_{n-1} u')) / lambda
//! ```
//!
//! with `e = y - u H_{n-1}`. The state is the posterior mean of a conjugate
//! normal/inverted-Wishart regression where the previous posterior, scaled
//! by `lambda`, acts as the prior; [`batch_oracle`] evaluates the same
//! posterior in closed form.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Negative eigenvalues of `Sigma` above this are rounding noise.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionGuard {
    /// Estimate the condition number of `P` every this many updates; 0 disables.
    pub check_every: u64,
    pub warn_above: f64,
    /// Eigenvalues of `P` are clamped to `[0, p_cap]` once its diagonal
    /// exceeds this, which stops windup along unexcited directions.
    #[serde(default = "default_p_cap")]
    pub p_cap: f64,
}

fn default_p_cap() -> f64 {
    1e8
}

impl Default for ConditionGuard {
    fn default() -> Self {
        ConditionGuard { check_every: 50, warn_above: 1e8, p_cap: default_p_cap() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveState {
    h: Matrix,
    sigma: Matrix,
    p: Matrix,
    gamma: f64,
    lambda: f64,
    n_updates: u64,
    guard: ConditionGuard,
    /// Last condition estimate exceeded the guard threshold.
    ill_conditioned: bool,
}

impl AdaptiveState {
    /// `H = 0`, `Sigma = 0`, `P = I`, `gamma = 0`.
    pub fn new(predictors: usize, responses: usize, lambda: f64) -> Result<Self> {
        if predictors == 0 || responses == 0 {
            return Err(Error::Config(format!(
                "estimator needs p >= 1 and m >= 1, got p={} m={}",
                predictors, responses
            )));
        }
        check_lambda(lambda)?;
        Ok(AdaptiveState {
            h: Matrix::zeros(predictors, responses),
            sigma: Matrix::zeros(responses, responses),
            p: Matrix::identity(predictors),
            gamma: 0.0,
            lambda,
            n_updates: 0,
            guard: ConditionGuard::default(),
            ill_conditioned: false,
        })
    }

    pub fn with_guard(mut self, guard: ConditionGuard) -> Self {
        self.guard = guard;
        self
    }

    pub fn predictors(&self) -> usize {
        self.h.rows()
    }

    pub fn responses(&self) -> usize {
        self.h.cols()
    }

    pub fn coefficients(&self) -> &Matrix {
        &self.h
    }

    pub fn covariance(&self) -> &Matrix {
        &self.sigma
    }

    pub fn state_matrix(&self) -> &Matrix {
        &self.p
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_updates(&self) -> u64 {
        self.n_updates
    }

    pub fn is_trained(&self) -> bool {
        self.gamma > 0.0
    }

    pub fn ill_conditioned(&self) -> bool {
        self.ill_conditioned
    }

    pub fn update(&mut self, u: &[f64], y: &[f64]) -> Result<()> {
        self.check_dims(u)?;
        if y.len() != self.responses() {
            return Err(Error::Dimension(format!(
                "response of length {} for an estimator with {} responses",
                y.len(),
                self.responses()
            )));
        }
        if !u.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("predictor vector"));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("response vector"));
        }
        let lambda = self.lambda;
        let pu = self.p.mul_vec(u)?;
        // u P u' is non-negative in exact arithmetic
        let denom = lambda + dot(u, &pu).max(0.0);
        let fitted = self.h.left_mul(u)?;
        let innovation: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();

        let gamma = 1.0 + lambda * self.gamma;

        let gain = Matrix::outer(&pu, &innovation).scale(1.0 / denom);
        let h = self.h.add(&gain)?;

        let spread = Matrix::outer(&innovation, &innovation).scale(lambda / denom);
        let sigma = self.sigma.sub(&self.sigma.sub(&spread)?.scale(1.0 / gamma))?;

        let mut p = self.p.sub(&Matrix::outer(&pu, &pu).scale(1.0 / denom))?.scale(1.0 / lambda);
        p.symmetrize();
        let p = self.bound_windup(p)?;

        if !(h.is_finite() && sigma.is_finite() && p.is_finite()) {
            return Err(Error::NonFinite("estimator update"));
        }
        self.gamma = gamma;
        self.h = h;
        self.sigma = sigma;
        self.p = p;
        self.n_updates += 1;
        self.check_conditioning();
        Ok(())
    }

    fn bound_windup(&self, p: Matrix) -> Result<Matrix> {
        let cap = self.guard.p_cap;
        let top = p.diagonal().into_iter().fold(0.0, f64::max);
        if !(top > cap) || !p.is_finite() {
            return Ok(p);
        }
        let (values, vectors) = p.symmetric_eigen()?;
        let clamped: Vec<f64> = values.iter().map(|v| v.clamp(0.0, cap)).collect();
        let mut out = vectors.matmul(&Matrix::diag(&clamped))?.matmul(&vectors.transpose())?;
        out.symmetrize();
        Ok(out)
    }

    fn check_conditioning(&mut self) {
        let every = self.guard.check_every;
        if every == 0 || self.n_updates % every != 0 {
            return;
        }
        let cond = self.p.condition_number_symmetric().unwrap_or(f64::INFINITY);
        let was = self.ill_conditioned;
        self.ill_conditioned = cond > self.guard.warn_above;
        if self.ill_conditioned && !was {
            log::warn!(
                "state matrix condition estimate {:.3e} after {} updates (lambda = {})",
                cond,
                self.n_updates,
                self.lambda
            );
        }
    }

    fn check_dims(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.predictors() {
            return Err(Error::Dimension(format!(
                "predictor of length {} for an estimator with {} predictors",
                u.len(),
                self.predictors()
            )));
        }
        Ok(())
    }

    /// Conditional mean `u H`.
    pub fn predict_mean(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(u)?;
        self.h.left_mul(u)
    }

    /// `Sigma` with tiny negative eigenvalues floored at zero.
    ///
    /// Fails when an eigenvalue is below `-PSD_TOLERANCE`.
    pub fn checked_covariance(&self) -> Result<Matrix> {
        let (values, vectors) = self.sigma.symmetric_eigen()?;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOLERANCE {
            return Err(Error::NotPsd(min));
        }
        if min >= 0.0 {
            return Ok(self.sigma.clone());
        }
        let floored: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
        let mut out = vectors.matmul(&Matrix::diag(&floored))?.matmul(&vectors.transpose())?;
        out.symmetrize();
        Ok(out)
    }

    /// Structural validation used after deserialisation.
    pub fn validate(&self) -> Result<()> {
        let (p, m) = self.h.shape();
        check_lambda(self.lambda)?;
        if p == 0 || m == 0 || self.sigma.shape() != (m, m) || self.p.shape() != (p, p) {
            return Err(Error::Dimension(format!(
                "estimator with H {:?}, Sigma {:?}, P {:?}",
                self.h.shape(),
                self.sigma.shape(),
                self.p.shape()
            )));
        }
        if !(self.gamma >= 0.0) || !(self.h.is_finite() && self.sigma.is_finite() && self.p.is_finite()) {
            return Err(Error::NonFinite("estimator state"));
        }
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("forgetting factor {} outside (0, 1]", lambda)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOracleResult {
    pub h: Matrix,
    pub sigma: Matrix,
    /// Inverse of the state matrix: the weighted information matrix.
    pub p_inverse: Matrix,
    pub gamma: f64,
}

/// Closed-form posterior after `history`, without recursion.
///
/// With weights `w_i = lambda^(n-i)`:
///
/// ```text
/// P_n^-1  = sum_i w_i u_i' u_i + lambda^n P_0^-1
/// H_n     = P_n (sum_i w_i u_i' y_i + lambda^n P_0^-1 H_0)
/// gamma_n Sigma_n = sum_i w_i c_i e_i' e_i
/// ```
///
/// where `e_i` and `c_i = lambda / (lambda + u_i P_{i-1} u_i')` use the
/// closed-form posterior of the first `i - 1` observations. `Sigma_0 = 0`.
pub fn batch_oracle(
    history: &[(Vec<f64>, Vec<f64>)],
    lambda: f64,
    prior_h: &Matrix,
    prior_p: &Matrix,
) -> Result<BatchOracleResult> {
    check_lambda(lambda)?;
    if history.is_empty() {
        return Err(Error::Input("batch oracle needs at least one observation".into()));
    }
    let (p, m) = prior_h.shape();
    if prior_p.shape() != (p, p) {
        return Err(Error::Dimension(format!("prior P {:?} for p = {}", prior_p.shape(), p)));
    }
    for (u, y) in history {
        if u.len() != p || y.len() != m {
            return Err(Error::Dimension(format!("pair ({}, {}) for p={} m={}", u.len(), y.len(), p, m)));
        }
    }
    let prior_precision = prior_p.inverse()?;
    let prior_moment = prior_precision.matmul(prior_h)?;
    let n = history.len();
    let mut powers = Vec::with_capacity(n + 1);
    let mut acc = 1.0;
    for _ in 0..=n {
        powers.push(acc);
        acc *= lambda;
    }

    // Posterior after the first `t` observations.
    let posterior = |t: usize| -> Result<(Matrix, Matrix, Matrix)> {
        let mut info = prior_precision.scale(powers[t]);
        let mut moment = prior_moment.scale(powers[t]);
        for (j, (u, y)) in history[..t].iter().enumerate() {
            let w = powers[t - 1 - j];
            for a in 0..p {
                for b in 0..p {
                    info[(a, b)] += w * u[a] * u[b];
                }
                for b in 0..m {
                    moment[(a, b)] += w * u[a] * y[b];
                }
            }
        }
        let cov = info.inverse()?;
        let h = cov.matmul(&moment)?;
        Ok((info, cov, h))
    };

    let mut weighted_spread = Matrix::zeros(m, m);
    for (i, (u, y)) in history.iter().enumerate() {
        let (_, cov_prev, h_prev) = posterior(i)?;
        let fitted = h_prev.left_mul(u)?;
        let e: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        let c = lambda / (lambda + dot(u, &cov_prev.mul_vec(u)?));
        let w = powers[n - 1 - i];
        weighted_spread = weighted_spread.add(&Matrix::outer(&e, &e).scale(w * c))?;
    }
    let gamma: f64 = powers[..n].iter().sum();
    let (p_inverse, _, h) = posterior(n)?;
    Ok(BatchOracleResult { h, sigma: weighted_spread.scale(1.0 / gamma), p_inverse, gamma })
}
