//! Euler-Maruyama simulation of the limiting controlled diffusion
//! dX = b(X, u) dt + r dW under a Markov policy, and Monte Carlo estimation
//! of its discounted cost. The noise is additive (constant r), so Euler
//! coincides with Milstein and weak order one is all the tolerances need.
//!
//! Common-random-numbers contract: replication j at step m consumes exactly k
//! standard normals from a stream seeded by seed + j, regardless of the
//! policy, so policy comparisons share noise exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::hjb::drift_into;
use crate::params::{DiffusionCoeffs, LimitParams};
use crate::policy::PolicyFn;
use crate::queue::tail_envelope;

#[derive(Debug, Clone)]
pub struct SdeRunConfig {
    pub x0: Vec<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub reps: usize,
    pub seed: u64,
}

impl SdeRunConfig {
    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.horizon >= self.dt) || self.reps == 0 {
            return Err(Error::InvalidConfig(format!(
                "bad SDE config: dt = {}, horizon = {}, reps = {}",
                self.dt, self.horizon, self.reps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SdeEstimate {
    pub mean: f64,
    pub se: f64,
    /// Envelope on the truncated discounted tail beyond the horizon.
    pub tail_bound: f64,
}

fn run_single(
    cfg: &SdeRunConfig,
    rep: u64,
    policy: &PolicyFn,
    cost: &CostSpec,
    coeffs: &DiffusionCoeffs,
    limits: &LimitParams,
) -> (f64, f64) {
    let k = cfg.x0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(rep));
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let sqrt_dt = cfg.dt.sqrt();
    let decay = (-limits.gamma * cfg.dt).exp();
    let mut disc = 1.0;
    let mut x = cfg.x0.clone();
    let mut u = vec![0.0; k];
    let mut b = vec![0.0; k];
    let mut acc = 0.0;
    let mut max_l = 0.0f64;
    for _ in 0..steps {
        policy.eval_into(&x, &mut u);
        let l = cost.eval_l_unchecked(limits, &x, &u);
        max_l = max_l.max(l.abs());
        acc += disc * l * cfg.dt;
        drift_into(&x, &u, coeffs, limits, &mut b);
        for d in 0..k {
            let z: f64 = StandardNormal.sample(&mut rng);
            x[d] += b[d] * cfg.dt + coeffs.r[d] * sqrt_dt * z;
        }
        disc *= decay;
    }
    (acc, max_l)
}

/// Monte Carlo estimate of the discounted cost under `policy` from cfg.x0.
pub fn simulate_cost(
    cfg: &SdeRunConfig,
    policy: &PolicyFn,
    cost: &CostSpec,
    coeffs: &DiffusionCoeffs,
    limits: &LimitParams,
) -> Result<SdeEstimate> {
    cfg.validate()?;
    let samples: Vec<(f64, f64)> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|j| run_single(cfg, j, policy, cost, coeffs, limits))
        .collect();
    let nf = cfg.reps as f64;
    let mean = samples.iter().map(|s| s.0).sum::<f64>() / nf;
    let se = if cfg.reps >= 2 {
        let var = samples.iter().map(|s| (s.0 - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        (var / nf).sqrt()
    } else {
        0.0
    };
    let max_l = samples.iter().map(|s| s.1).fold(0.0f64, f64::max);
    Ok(SdeEstimate {
        mean,
        se,
        tail_bound: tail_envelope(limits.gamma, cost.growth_degree(), max_l, cfg.horizon),
    })
}

#[derive(Debug, Clone)]
pub struct PolicyComparison {
    pub id: String,
    pub mean: f64,
    pub se: f64,
    /// Mean and standard error of the per-replication cost difference
    /// against the first supplied policy, under common random numbers.
    pub mean_diff_vs_first: f64,
    pub se_diff_vs_first: f64,
}

/// Runs every policy on the same noise streams and reports per-policy means
/// plus paired differences against the first entry.
pub fn compare_policies(
    cfg: &SdeRunConfig,
    policies: &[(String, PolicyFn)],
    cost: &CostSpec,
    coeffs: &DiffusionCoeffs,
    limits: &LimitParams,
) -> Result<Vec<PolicyComparison>> {
    cfg.validate()?;
    assert!(!policies.is_empty());
    let per_policy: Vec<Vec<f64>> = policies
        .iter()
        .map(|(_, pf)| {
            (0..cfg.reps as u64)
                .into_par_iter()
                .map(|j| run_single(cfg, j, pf, cost, coeffs, limits).0)
                .collect()
        })
        .collect();
    let nf = cfg.reps as f64;
    let mut out = Vec::with_capacity(policies.len());
    for (pi, (id, _)) in policies.iter().enumerate() {
        let costs = &per_policy[pi];
        let mean = costs.iter().sum::<f64>() / nf;
        let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
        let se = (var / nf).sqrt();
        let diffs: Vec<f64> = costs
            .iter()
            .zip(&per_policy[0])
            .map(|(a, b)| a - b)
            .collect();
        let mean_diff = diffs.iter().sum::<f64>() / nf;
        let var_diff = diffs.iter().map(|d| (d - mean_diff).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
        out.push(PolicyComparison {
            id: id.clone(),
            mean,
            se,
            mean_diff_vs_first: mean_diff,
            se_diff_vs_first: (var_diff / nf).sqrt(),
        });
    }
    Ok(out)
}

/// Mean and standard error of the increments of the statistic
/// e^{-gamma t} f(X_t) + int_0^t e^{-gamma s} L ds between consecutive sample
/// times (starting from t = 0). Along any policy this process should drift
/// upward when f solves the HJB equation.
pub fn value_process_increments(
    cfg: &SdeRunConfig,
    policy: &PolicyFn,
    cost: &CostSpec,
    coeffs: &DiffusionCoeffs,
    limits: &LimitParams,
    value: &(dyn Fn(&[f64]) -> f64 + Sync),
    times: &[f64],
) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    let k = cfg.x0.len();
    let sample_steps: Vec<usize> = times
        .iter()
        .map(|t| ((t / cfg.dt).round() as usize).max(1))
        .collect();
    let last = *sample_steps.iter().max().unwrap();
    let rows: Vec<Vec<f64>> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(j));
            let sqrt_dt = cfg.dt.sqrt();
            let decay = (-limits.gamma * cfg.dt).exp();
            let mut disc = 1.0;
            let mut x = cfg.x0.clone();
            let mut u = vec![0.0; k];
            let mut b = vec![0.0; k];
            let mut acc = 0.0;
            let mut stats = vec![value(&cfg.x0)];
            for m in 1..=last {
                policy.eval_into(&x, &mut u);
                let l = cost.eval_l_unchecked(limits, &x, &u);
                acc += disc * l * cfg.dt;
                drift_into(&x, &u, coeffs, limits, &mut b);
                for d in 0..k {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x[d] += b[d] * cfg.dt + coeffs.r[d] * sqrt_dt * z;
                }
                disc *= decay;
                if sample_steps.contains(&m) {
                    stats.push(disc * value(&x) + acc);
                }
            }
            stats
        })
        .collect();
    let nf = cfg.reps as f64;
    let n_intervals = sample_steps.len();
    let mut out = Vec::with_capacity(n_intervals);
    for i in 0..n_intervals {
        let incs: Vec<f64> = rows.iter().map(|r| r[i + 1] - r[i]).collect();
        let mean = incs.iter().sum::<f64>() / nf;
        let var = incs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
        out.push((mean, (var / nf).sqrt()));
    }
    Ok(out)
}
