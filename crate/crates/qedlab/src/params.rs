//! Limiting parameters, the n-th system's rates under QED scaling, and the
//! rescaling between physical and diffusion coordinates.
//!
//! The n-th system realizes the scaling scheme with exact equalities,
//!
//! ```text
//! lambda_i^n = n*lambda_i + sqrt(n)*lambda_hat_i,
//! mu_i^n     = mu_i + mu_hat_i/sqrt(n),
//! theta_i^n  = theta_i,
//! ```
//!
//! so convergence experiments are clean and reproducible rather than merely
//! asymptotic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the heavy-traffic balance check sum(rho_i) = 1.
pub const BALANCE_TOL: f64 = 1e-12;

/// Limiting constants of the parameter sequence: first-order rates, the
/// second-order (hat) terms, interarrival variability, and the discount rate.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LimitParams {
    /// Limiting arrival rates lambda_i > 0 (per unit time, per unit n).
    pub lambda: Vec<f64>,
    /// Limiting service rates mu_i > 0.
    pub mu: Vec<f64>,
    /// Abandonment rates theta_i >= 0.
    pub theta: Vec<f64>,
    /// Second-order arrival terms lambda_hat_i.
    pub lambda_hat: Vec<f64>,
    /// Second-order service terms mu_hat_i.
    pub mu_hat: Vec<f64>,
    /// Squared coefficients of variation of the interarrival times, >= 0.
    pub c2u: Vec<f64>,
    /// Discount rate gamma > 0.
    pub gamma: f64,
}

impl LimitParams {
    /// Number of customer classes.
    pub fn k(&self) -> usize {
        self.lambda.len()
    }

    /// Traffic mix rho_i = lambda_i / mu_i.
    pub fn rho(&self) -> Vec<f64> {
        self.lambda
            .iter()
            .zip(&self.mu)
            .map(|(l, m)| l / m)
            .collect()
    }

    /// Validates every structural invariant and returns the params unchanged.
    ///
    /// Checks positivity of rates, nonnegativity of theta and c2u, gamma > 0,
    /// equal vector lengths, and the heavy-traffic balance sum(lambda_i/mu_i) = 1
    /// to relative tolerance [`BALANCE_TOL`].
    pub fn validated(self) -> Result<Self> {
        let k = self.k();
        if k == 0 {
            return Err(Error::DimensionMismatch {
                what: "lambda",
                got: 0,
                expected: 1,
            });
        }
        for (what, v) in [
            ("mu", &self.mu),
            ("theta", &self.theta),
            ("lambda_hat", &self.lambda_hat),
            ("mu_hat", &self.mu_hat),
            ("c2u", &self.c2u),
        ] {
            if v.len() != k {
                return Err(Error::DimensionMismatch {
                    what,
                    got: v.len(),
                    expected: k,
                });
            }
        }
        for (i, &l) in self.lambda.iter().enumerate() {
            if !(l > 0.0) {
                return Err(Error::NonPositiveRate {
                    what: "lambda",
                    index: i,
                    value: l,
                });
            }
        }
        for (i, &m) in self.mu.iter().enumerate() {
            if !(m > 0.0) {
                return Err(Error::NonPositiveRate {
                    what: "mu",
                    index: i,
                    value: m,
                });
            }
        }
        for (i, &t) in self.theta.iter().enumerate() {
            if !(t >= 0.0) {
                return Err(Error::NegativeAbandonment { index: i, value: t });
            }
        }
        for (i, &c) in self.c2u.iter().enumerate() {
            if !(c >= 0.0) {
                return Err(Error::NonPositiveRate {
                    what: "c2u",
                    index: i,
                    value: c,
                });
            }
        }
        if !(self.gamma > 0.0) {
            return Err(Error::NonPositiveRate {
                what: "gamma",
                index: 0,
                value: self.gamma,
            });
        }
        let sum: f64 = self.rho().iter().sum();
        if (sum - 1.0).abs() > BALANCE_TOL {
            return Err(Error::BalanceViolation {
                sum,
                tol: BALANCE_TOL,
            });
        }
        Ok(self)
    }
}

/// The n-th system's rates, derived from validated [`LimitParams`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SystemParams {
    /// Server count.
    pub n: u64,
    /// Arrival rates lambda_i^n = n*lambda_i + sqrt(n)*lambda_hat_i.
    pub lambda_n: Vec<f64>,
    /// Service rates mu_i^n = mu_i + mu_hat_i / sqrt(n).
    pub mu_n: Vec<f64>,
    /// Abandonment rates theta_i^n = theta_i.
    pub theta_n: Vec<f64>,
    /// Traffic mix rho_i = lambda_i / mu_i (sums to 1).
    pub rho: Vec<f64>,
}

impl SystemParams {
    pub fn k(&self) -> usize {
        self.lambda_n.len()
    }

    /// Offered-load traffic intensity rho^n = sum_i lambda_i^n / (n mu_i^n).
    pub fn traffic_intensity(&self) -> f64 {
        let n = self.n as f64;
        self.lambda_n
            .iter()
            .zip(&self.mu_n)
            .map(|(l, m)| l / (n * m))
            .sum()
    }
}

/// Constructs the n-th system's rates from validated limits.
///
/// Errors with [`Error::RateUnderflow`] if a negative second-order term makes
/// some lambda_i^n or mu_i^n non-positive at this n.
pub fn build_system(limits: &LimitParams, n: u64) -> Result<SystemParams> {
    assert!(n >= 1, "server count must be at least 1");
    let nf = n as f64;
    let sqrt_n = nf.sqrt();
    let k = limits.k();
    let mut lambda_n = Vec::with_capacity(k);
    let mut mu_n = Vec::with_capacity(k);
    for i in 0..k {
        let l = nf * limits.lambda[i] + sqrt_n * limits.lambda_hat[i];
        if !(l > 0.0) {
            return Err(Error::RateUnderflow {
                n,
                what: "lambda_n",
                index: i,
                value: l,
            });
        }
        lambda_n.push(l);
        let m = limits.mu[i] + limits.mu_hat[i] / sqrt_n;
        if !(m > 0.0) {
            return Err(Error::RateUnderflow {
                n,
                what: "mu_n",
                index: i,
                value: m,
            });
        }
        mu_n.push(m);
    }
    Ok(SystemParams {
        n,
        lambda_n,
        mu_n,
        theta_n: limits.theta.clone(),
        rho: limits.rho(),
    })
}

/// Diffusion-scale constants of the limiting dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionCoeffs {
    /// Diffusion coefficients r_i = sqrt(lambda_i * C2_{U,i} + lambda_i).
    pub r: Vec<f64>,
    /// Limit drift constants ell_i = lambda_hat_i - rho_i * mu_hat_i.
    pub ell: Vec<f64>,
    /// Staffing slack beta = sum_i (rho_i mu_hat_i - lambda_hat_i) / mu_i.
    pub beta: f64,
}

/// Computes the diffusion coefficients, drift constants, and staffing slack.
pub fn diffusion_coeffs(limits: &LimitParams) -> DiffusionCoeffs {
    let rho = limits.rho();
    let r = limits
        .lambda
        .iter()
        .zip(&limits.c2u)
        .map(|(l, c)| (l * c + l).sqrt())
        .collect();
    let ell: Vec<f64> = (0..limits.k())
        .map(|i| limits.lambda_hat[i] - rho[i] * limits.mu_hat[i])
        .collect();
    let beta = ell
        .iter()
        .zip(&limits.mu)
        .map(|(e, m)| -e / m)
        .sum();
    DiffusionCoeffs { r, ell, beta }
}

/// Rescales integer counts to diffusion coordinates:
/// phi_hat = phi / sqrt(n), psi_hat = (psi - rho n) / sqrt(n), x_hat = phi_hat + psi_hat.
///
/// Returns (x_hat, phi_hat, psi_hat).
pub fn rescale_counts(sys: &SystemParams, phi: &[i64], psi: &[i64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = sys.n as f64;
    let inv_sqrt_n = 1.0 / n.sqrt();
    let phi_hat: Vec<f64> = phi.iter().map(|&p| p as f64 * inv_sqrt_n).collect();
    let psi_hat: Vec<f64> = psi
        .iter()
        .zip(&sys.rho)
        .map(|(&p, &rho)| (p as f64 - rho * n) * inv_sqrt_n)
        .collect();
    let x_hat = phi_hat
        .iter()
        .zip(&psi_hat)
        .map(|(a, b)| a + b)
        .collect();
    (x_hat, phi_hat, psi_hat)
}

/// Builds the canonical deterministic initial split for a diffusion-scale
/// starting point x: X_i = round(rho_i n + sqrt(n) x_i) clamped at 0, servers
/// filled work-conservingly, and any excess distributed to the queues by the
/// sum-preserving rounding map applied to an equal-fraction split.
///
/// Returns (phi, psi).
pub fn initial_split(sys: &SystemParams, x: &[f64]) -> (Vec<i64>, Vec<i64>) {
    assert_eq!(x.len(), sys.k(), "x must have one entry per class");
    let n = sys.n as f64;
    let sqrt_n = n.sqrt();
    let total_x: Vec<i64> = (0..sys.k())
        .map(|i| ((sys.rho[i] * n + sqrt_n * x[i]).round() as i64).max(0))
        .collect();
    let total: i64 = total_x.iter().sum();
    let excess = (total - sys.n as i64).max(0);
    if excess == 0 {
        return (vec![0; sys.k()], total_x);
    }
    // Equal-fraction queue target, capped per class at X_i by waterfilling so
    // the rounded queue never exceeds the class population.
    let k = sys.k();
    let mut target = vec![0.0f64; k];
    let mut capped = vec![false; k];
    let mut remaining = excess as f64;
    loop {
        let free: Vec<usize> = (0..k).filter(|&i| !capped[i]).collect();
        let share = remaining / free.len() as f64;
        let mut newly_capped = false;
        for &i in &free {
            let cap = total_x[i] as f64 - target[i];
            if share >= cap {
                target[i] += cap;
                remaining -= cap;
                capped[i] = true;
                newly_capped = true;
            }
        }
        if !newly_capped {
            for &i in &free {
                target[i] += share;
            }
            break;
        }
        if capped.iter().all(|&c| c) {
            break;
        }
    }
    let mut phi = crate::policy::theta_round(&target).expect("equal-split total is integral");
    // The rounding map can push the last class above its cap by < k; repair by
    // shifting units to classes with slack, lowest index first.
    for i in 0..k {
        while phi[i] > total_x[i] {
            let j = (0..k)
                .find(|&j| phi[j] < total_x[j])
                .expect("excess <= total implies some class has slack");
            phi[i] -= 1;
            phi[j] += 1;
        }
    }
    let psi: Vec<i64> = (0..k).map(|i| total_x[i] - phi[i]).collect();
    (phi, psi)
}
