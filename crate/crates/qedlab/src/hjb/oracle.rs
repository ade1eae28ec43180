//! Independent k = 1 reference solution.
//!
//! For a single class the simplex is the singleton {1}, so the HJB equation
//! collapses to a linear two-point boundary value problem
//!
//! ```text
//! (1/2) r^2 f'' + b(x) f' - gamma f + L(x) = 0,
//! b(x) = ell + (mu - theta) x^+ - mu x,
//! ```
//!
//! solved here with central differences on the widened interval [-4B, 4B] at
//! ten times the main grid's resolution. Far-field Dirichlet data comes from
//! the particular polynomial solution of the one-sided (affine-drift)
//! generator matched to the cost's growth; the strong mean reversion makes
//! the boundary choice invisible away from the ends.

use crate::cost::CostSpec;
use crate::error::Result;
use crate::hjb::linsolve::BandedMatrix;
use crate::hjb::GridSpec;
use crate::params::{DiffusionCoeffs, LimitParams};

/// Tabulated k = 1 value function with linear interpolation.
#[derive(Debug, Clone)]
pub struct K1Reference {
    x_left: f64,
    delta: f64,
    values: Vec<f64>,
}

impl K1Reference {
    pub fn value_at(&self, x: f64) -> f64 {
        let t = (x - self.x_left) / self.delta;
        let t = t.clamp(0.0, (self.values.len() - 1) as f64);
        let i = (t.floor() as usize).min(self.values.len() - 2);
        let w = t - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

/// Cost restricted to one branch of x as polynomial coefficients
/// [c_0, c_1, ...], or None when the power is not an integer.
fn branch_cost_poly(cost: &CostSpec, limits: &LimitParams, right: bool) -> Option<Vec<f64>> {
    let zero = vec![0.0];
    match cost {
        CostSpec::LinearQueue { coeffs } => {
            Some(if right { vec![0.0, coeffs[0]] } else { zero })
        }
        CostSpec::Abandonment { coeffs } => Some(if right {
            vec![0.0, coeffs[0] * limits.theta[0]]
        } else {
            zero
        }),
        CostSpec::PowerQueue { coeffs, powers } => {
            if !right {
                return Some(zero);
            }
            let p = powers[0];
            if (p - p.round()).abs() > 1e-12 {
                return None;
            }
            let d = p.round() as usize;
            let mut poly = vec![0.0; d + 1];
            poly[d] = coeffs[0];
            Some(poly)
        }
        CostSpec::Idling => Some(if right { zero } else { vec![0.0, -1.0] }),
        CostSpec::CustomersInSystem { coeffs, .. } => Some(vec![0.0, coeffs[0]]),
        CostSpec::WeightedSum { terms } => {
            let mut acc = vec![0.0];
            for t in terms {
                let p = branch_cost_poly(t, limits, right)?;
                if p.len() > acc.len() {
                    acc.resize(p.len(), 0.0);
                }
                for (a, b) in acc.iter_mut().zip(&p) {
                    *a += b;
                }
            }
            Some(acc)
        }
    }
}

/// Particular polynomial solution of
/// (1/2) r^2 f'' + (a - c x) f' - gamma f + L = 0 for polynomial L, by
/// descending coefficient matching. All denominators gamma + c j are
/// positive.
fn particular_poly(l: &[f64], a: f64, c: f64, r2: f64, gamma: f64) -> Vec<f64> {
    let d = l.len();
    let mut alpha = vec![0.0f64; d];
    for j in (0..d).rev() {
        let mut rhs = l[j];
        if j + 2 < d {
            rhs += 0.5 * r2 * ((j + 2) * (j + 1)) as f64 * alpha[j + 2];
        }
        if j + 1 < d {
            rhs += a * (j + 1) as f64 * alpha[j + 1];
        }
        alpha[j] = rhs / (gamma + c * j as f64);
    }
    alpha
}

fn eval_poly(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Solves the k = 1 two-point problem; `spec` provides the main grid's box
/// halfwidth and spacing (the oracle refines both).
pub fn solve_k1_reference(
    cost: &CostSpec,
    coeffs: &DiffusionCoeffs,
    limits: &LimitParams,
    spec: &GridSpec,
) -> Result<K1Reference> {
    assert_eq!(limits.k(), 1, "reference solution only exists for k = 1");
    let b_main = spec.box_halfwidth;
    let wide = 4.0 * b_main;
    // 20x refinement keeps the second-order truncation error below the 1e-6
    // self-convergence budget at production spacings
    let delta = spec.delta() / 20.0;
    let n = (2.0 * wide / delta).round() as usize + 1;
    let delta = 2.0 * wide / (n - 1) as f64;

    let gamma = limits.gamma;
    let r2 = coeffs.r[0] * coeffs.r[0];
    let ell = coeffs.ell[0];
    let mu = limits.mu[0];
    let theta = limits.theta[0];
    let drift = |x: f64| ell + (mu - theta) * x.max(0.0) - mu * x;
    let running = |x: f64| cost.eval_l_unchecked(limits, &[x], &[1.0]);

    // Dirichlet data from the branch-matched polynomial solution, or the
    // leading-order balance for non-integer powers.
    let boundary_value = |x: f64| -> f64 {
        let right = x >= 0.0;
        let (a, c) = if right { (ell, theta) } else { (ell, mu) };
        match branch_cost_poly(cost, limits, right) {
            Some(l) => eval_poly(&particular_poly(&l, a, c, r2, gamma), x),
            None => {
                let p = match cost {
                    CostSpec::PowerQueue { powers, .. } => powers[0],
                    _ => 1.0,
                };
                running(x) / (gamma + c * p)
            }
        }
    };

    let mut mat = BandedMatrix::new(n, 1);
    let mut rhs = vec![0.0f64; n];
    for j in 0..n {
        let x = -wide + j as f64 * delta;
        if j == 0 || j == n - 1 {
            mat.set(j, j, 1.0);
            rhs[j] = boundary_value(x);
            continue;
        }
        let b = drift(x);
        let d2 = 0.5 * r2 / (delta * delta);
        let adv = b / (2.0 * delta);
        // (gamma I - A) f = L with central differences
        mat.set(j, j - 1, -(d2 - adv));
        mat.set(j, j, gamma + 2.0 * d2);
        mat.set(j, j + 1, -(d2 + adv));
        rhs[j] = running(x);
    }
    mat.factor()?;
    mat.solve(&mut rhs);
    Ok(K1Reference {
        x_left: -wide,
        delta,
        values: rhs,
    })
}
