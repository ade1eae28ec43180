//! Shared test oracles, independent of the implementation paths they check.
//! Each test binary uses its own subset.
#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Stationary law of the M/M/n+M (Erlang-A) queue by its birth-death
/// recursion: birth rate lambda, death rate mu*min(j,n) + theta*max(j-n,0).
/// Truncated once the tail falls below 1e-14 of the accumulated mass.
pub fn erlang_a_stationary(lambda: f64, mu: f64, theta: f64, n: u64) -> Vec<f64> {
    assert!(lambda > 0.0 && mu > 0.0 && theta > 0.0);
    let mut weights = vec![1.0f64];
    let mut w = 1.0f64;
    let mut j = 0u64;
    loop {
        j += 1;
        let death = mu * (j.min(n)) as f64 + theta * j.saturating_sub(n) as f64;
        w *= lambda / death;
        weights.push(w);
        let total: f64 = weights.iter().sum();
        if j > n && w / total < 1e-14 {
            break;
        }
        assert!(j < 100_000, "stationary law failed to truncate");
    }
    let total: f64 = weights.iter().sum();
    weights.iter().map(|x| x / total).collect()
}

/// Pearson chi-square goodness-of-fit p-value. Bins with expected count
/// below `min_expected` are merged left to right; a trailing light bin is
/// merged into its predecessor. `observed[j]` counts samples equal to j.
pub fn chi_square_p(observed: &[u64], expected_probs: &[f64], min_expected: f64) -> (f64, f64, usize) {
    let total: u64 = observed.iter().sum();
    let len = observed.len().max(expected_probs.len());
    let obs = |j: usize| *observed.get(j).unwrap_or(&0) as f64;
    let exp = |j: usize| expected_probs.get(j).copied().unwrap_or(0.0) * total as f64;

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for j in 0..len {
        acc_o += obs(j);
        acc_e += exp(j);
        if acc_e >= min_expected {
            bins.push((acc_o, acc_e));
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 || acc_o > 0.0 {
        if let Some(last) = bins.last_mut() {
            last.0 += acc_o;
            last.1 += acc_e;
        } else {
            bins.push((acc_o, acc_e));
        }
    }
    assert!(bins.len() >= 2, "need at least two bins");
    let stat: f64 = bins
        .iter()
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("positive dof");
    let p = 1.0 - dist.cdf(stat);
    (stat, p, dof)
}

pub fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
