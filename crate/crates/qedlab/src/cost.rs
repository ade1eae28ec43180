//! Running-cost catalog: the cost `Ltilde(phi_hat, psi_hat)` on rescaled
//! queue/service counts and its induced form `L(x, u)` under work
//! conservation,
//!
//! ```text
//! L(x, u) = Ltilde((1.x)^+ u, x - (1.x)^+ u).
//! ```
//!
//! Delay costs reduce to queue-length costs and abandonment costs reduce to
//! `sum_i c_i theta_i phi_hat_i`, so both are covered by the kinds below; the
//! simulator audits the abandonment reduction independently rather than
//! assuming it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::LimitParams;

/// Tolerance below which a slightly negative queue component is clamped to 0.
pub const QUEUE_TOL: f64 = 1e-9;
/// Tolerance for membership in the simplex S^k.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Descriptor of a running cost.
///
/// `CustomersInSystem` is the one signed kind: its diffusion-scale recentering
/// `sum_i c_i x_hat_i` can be negative, so it sits outside the nonnegativity
/// contract the other kinds satisfy and is intended for diagnostics. The
/// config requires `scale = "diffusion"` to be spelled out for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSpec {
    /// sum_i c_i phi_hat_i^{p_i}, c_i >= 0, p_i >= 1.
    PowerQueue { coeffs: Vec<f64>, powers: Vec<f64> },
    /// sum_i c_i phi_hat_i.
    LinearQueue { coeffs: Vec<f64> },
    /// Discounted abandonment rate in reduced form sum_i c_i theta_i phi_hat_i.
    Abandonment { coeffs: Vec<f64> },
    /// Scaled number of idling servers (-1 . psi_hat)^+; equals (1 . x_hat)^-
    /// under work conservation.
    Idling,
    /// Diffusion-scale recentered customers in system, sum_i c_i x_hat_i.
    CustomersInSystem { coeffs: Vec<f64>, scale: String },
    /// Sum of catalog terms.
    WeightedSum { terms: Vec<CostSpec> },
}

impl CostSpec {
    pub fn power_queue(coeffs: Vec<f64>, powers: Vec<f64>) -> Self {
        CostSpec::PowerQueue { coeffs, powers }
    }

    pub fn linear_queue(coeffs: Vec<f64>) -> Self {
        CostSpec::LinearQueue { coeffs }
    }

    pub fn abandonment(coeffs: Vec<f64>) -> Self {
        CostSpec::Abandonment { coeffs }
    }

    pub fn idling() -> Self {
        CostSpec::Idling
    }

    pub fn customers_in_system(coeffs: Vec<f64>) -> Self {
        CostSpec::CustomersInSystem {
            coeffs,
            scale: "diffusion".to_owned(),
        }
    }

    pub fn weighted_sum(terms: Vec<CostSpec>) -> Self {
        CostSpec::WeightedSum { terms }
    }

    /// Checks coefficient shapes and ranges against the class count.
    pub fn validate(&self, k: usize) -> Result<()> {
        let check_coeffs = |coeffs: &[f64]| -> Result<()> {
            if coeffs.len() != k {
                return Err(Error::DimensionMismatch {
                    what: "cost coeffs",
                    got: coeffs.len(),
                    expected: k,
                });
            }
            for &c in coeffs {
                if !(c >= 0.0) {
                    return Err(Error::InvalidCostSpec(format!(
                        "coefficient {c} is negative"
                    )));
                }
            }
            Ok(())
        };
        match self {
            CostSpec::PowerQueue { coeffs, powers } => {
                check_coeffs(coeffs)?;
                if powers.len() != k {
                    return Err(Error::DimensionMismatch {
                        what: "cost powers",
                        got: powers.len(),
                        expected: k,
                    });
                }
                for &p in powers {
                    if !(p >= 1.0) {
                        return Err(Error::InvalidCostSpec(format!("power {p} < 1")));
                    }
                }
                Ok(())
            }
            CostSpec::LinearQueue { coeffs } | CostSpec::Abandonment { coeffs } => {
                check_coeffs(coeffs)
            }
            CostSpec::Idling => Ok(()),
            CostSpec::CustomersInSystem { coeffs, scale } => {
                check_coeffs(coeffs)?;
                if scale != "diffusion" {
                    return Err(Error::InvalidCostSpec(
                        "customers_in_system requires explicit scale = \"diffusion\"".into(),
                    ));
                }
                Ok(())
            }
            CostSpec::WeightedSum { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidCostSpec("weighted_sum with no terms".into()));
                }
                for t in terms {
                    t.validate(k)?;
                }
                Ok(())
            }
        }
    }

    /// Declared polynomial growth exponent m_L (used by the tail-truncation
    /// bound in the simulator).
    pub fn growth_degree(&self) -> u32 {
        match self {
            CostSpec::PowerQueue { powers, .. } => powers
                .iter()
                .map(|p| p.ceil() as u32)
                .max()
                .unwrap_or(1)
                .max(1),
            CostSpec::WeightedSum { terms } => {
                terms.iter().map(|t| t.growth_degree()).max().unwrap_or(1)
            }
            _ => 1,
        }
    }

    /// True for every catalog kind: u -> L(x, u) is convex on the simplex.
    pub fn convex_in_u(&self) -> bool {
        match self {
            CostSpec::WeightedSum { terms } => terms.iter().all(|t| t.convex_in_u()),
            _ => true,
        }
    }

    /// True when u -> L(x, u) is strictly convex for 1.x > 0, which enables
    /// the continuous argmin polish.
    pub fn strictly_convex_in_u(&self) -> bool {
        match self {
            CostSpec::PowerQueue { coeffs, powers } => coeffs
                .iter()
                .zip(powers)
                .all(|(&c, &p)| c > 0.0 && p > 1.0),
            CostSpec::WeightedSum { terms } => {
                terms.iter().any(|t| t.strictly_convex_in_u())
                    && terms.iter().all(|t| t.convex_in_u())
            }
            _ => false,
        }
    }

    /// True when the cost falls into the separable family with uniformly
    /// convex per-class terms (all powers >= 2, positive coefficients), for
    /// which the extracted Markov policy is expected to be locally Holder on
    /// {1.x > 0}.
    pub fn smooth_policy_expected(&self) -> bool {
        fn queue_only(spec: &CostSpec) -> bool {
            matches!(
                spec,
                CostSpec::PowerQueue { .. } | CostSpec::LinearQueue { .. } | CostSpec::Abandonment { .. }
            )
        }
        match self {
            CostSpec::PowerQueue { coeffs, powers } => coeffs
                .iter()
                .zip(powers)
                .all(|(&c, &p)| c > 0.0 && p >= 2.0),
            CostSpec::WeightedSum { terms } => {
                terms.iter().all(queue_only)
                    && terms.iter().any(|t| t.smooth_policy_expected())
            }
            _ => false,
        }
    }

    /// Short identifier for CSV rows; deliberately comma-free.
    pub fn cost_id(&self) -> String {
        fn join(v: &[f64]) -> String {
            v.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join("_")
        }
        match self {
            CostSpec::PowerQueue { coeffs, powers } => {
                format!("power(c={};p={})", join(coeffs), join(powers))
            }
            CostSpec::LinearQueue { coeffs } => format!("linear(c={})", join(coeffs)),
            CostSpec::Abandonment { coeffs } => format!("aband(c={})", join(coeffs)),
            CostSpec::Idling => "idling".into(),
            CostSpec::CustomersInSystem { coeffs, .. } => format!("cis(c={})", join(coeffs)),
            CostSpec::WeightedSum { terms } => {
                let inner: Vec<String> = terms.iter().map(|t| t.cost_id()).collect();
                format!("sum[{}]", inner.join("+"))
            }
        }
    }

    /// Evaluates Ltilde on rescaled counts (phi_hat componentwise >= 0).
    pub fn eval_ltilde(
        &self,
        limits: &LimitParams,
        phi_hat: &[f64],
        psi_hat: &[f64],
    ) -> Result<f64> {
        for (i, &p) in phi_hat.iter().enumerate() {
            if p < -QUEUE_TOL {
                return Err(Error::NegativeQueue { index: i, value: p });
            }
        }
        Ok(self.ltilde_unchecked(limits, phi_hat, psi_hat))
    }

    fn ltilde_unchecked(&self, limits: &LimitParams, phi_hat: &[f64], psi_hat: &[f64]) -> f64 {
        let phi = |i: usize| phi_hat[i].max(0.0);
        match self {
            CostSpec::PowerQueue { coeffs, powers } => (0..phi_hat.len())
                .map(|i| coeffs[i] * phi(i).powf(powers[i]))
                .sum(),
            CostSpec::LinearQueue { coeffs } => {
                (0..phi_hat.len()).map(|i| coeffs[i] * phi(i)).sum()
            }
            CostSpec::Abandonment { coeffs } => (0..phi_hat.len())
                .map(|i| coeffs[i] * limits.theta[i] * phi(i))
                .sum(),
            CostSpec::Idling => {
                let s: f64 = psi_hat.iter().sum();
                (-s).max(0.0)
            }
            CostSpec::CustomersInSystem { coeffs, .. } => (0..phi_hat.len())
                .map(|i| coeffs[i] * (phi_hat[i] + psi_hat[i]))
                .sum(),
            CostSpec::WeightedSum { terms } => terms
                .iter()
                .map(|t| t.ltilde_unchecked(limits, phi_hat, psi_hat))
                .sum(),
        }
    }

    /// Evaluates the induced cost L(x, u) = Ltilde((1.x)^+ u, x - (1.x)^+ u)
    /// after validating that u lies in the simplex.
    pub fn eval_l(&self, limits: &LimitParams, x_hat: &[f64], u: &[f64]) -> Result<f64> {
        check_simplex(u)?;
        Ok(self.eval_l_unchecked(limits, x_hat, u))
    }

    /// Same as [`eval_l`](Self::eval_l) without the simplex check, for inner
    /// loops where u comes from a trusted mesh.
    pub fn eval_l_unchecked(&self, limits: &LimitParams, x_hat: &[f64], u: &[f64]) -> f64 {
        let q = x_hat.iter().sum::<f64>().max(0.0);
        match self {
            CostSpec::PowerQueue { coeffs, powers } => (0..u.len())
                .map(|i| coeffs[i] * (q * u[i]).powf(powers[i]))
                .sum(),
            CostSpec::LinearQueue { coeffs } => {
                (0..u.len()).map(|i| coeffs[i] * q * u[i]).sum()
            }
            CostSpec::Abandonment { coeffs } => (0..u.len())
                .map(|i| coeffs[i] * limits.theta[i] * q * u[i])
                .sum(),
            CostSpec::Idling => {
                let s: f64 = x_hat.iter().sum();
                (-s).max(0.0)
            }
            CostSpec::CustomersInSystem { coeffs, .. } => x_hat
                .iter()
                .zip(coeffs)
                .map(|(x, c)| c * x)
                .sum(),
            CostSpec::WeightedSum { terms } => terms
                .iter()
                .map(|t| t.eval_l_unchecked(limits, x_hat, u))
                .sum(),
        }
    }

    /// A valid Holder (in fact Lipschitz) constant for x -> L(x, u) on the
    /// centered box of the given radius, uniform over u. Returns (c, rho)
    /// with rho = 1, where |L(x,u) - L(y,u)| <= c * max_j |x_j - y_j|.
    pub fn local_holder_bound(&self, limits: &LimitParams, box_radius: f64) -> Result<(f64, f64)> {
        let c = self.holder_constant(limits, box_radius, 0)?;
        Ok((c, 1.0))
    }

    fn holder_constant(&self, limits: &LimitParams, radius: f64, depth: usize) -> Result<f64> {
        let k = limits.k() as f64;
        let q_max = k * radius;
        let max0 = |v: &[f64]| v.iter().cloned().fold(0.0f64, f64::max);
        match self {
            // Per-coordinate gradient bound summed over coordinates: for the
            // separable queue kinds d/dx_j L = sum_i c_i p_i (q u_i)^{p_i-1} u_i,
            // maximized at a simplex vertex and q = q_max.
            CostSpec::PowerQueue { coeffs, powers } => {
                let per_coord = coeffs
                    .iter()
                    .zip(powers)
                    .map(|(&c, &p)| c * p * q_max.powf(p - 1.0))
                    .fold(0.0f64, f64::max);
                Ok(k * per_coord)
            }
            CostSpec::LinearQueue { coeffs } => Ok(k * max0(coeffs)),
            CostSpec::Abandonment { coeffs } => {
                let ct: Vec<f64> = coeffs
                    .iter()
                    .zip(&limits.theta)
                    .map(|(c, t)| c * t)
                    .collect();
                Ok(k * max0(&ct))
            }
            CostSpec::Idling => Ok(k),
            CostSpec::CustomersInSystem { coeffs, .. } => Ok(coeffs.iter().sum()),
            CostSpec::WeightedSum { terms } => {
                if depth > 0 {
                    return Err(Error::UnsupportedSpec(
                        "nested weighted_sum has no catalog Holder bound".into(),
                    ));
                }
                let mut total = 0.0;
                for t in terms {
                    if matches!(t, CostSpec::WeightedSum { .. }) {
                        return Err(Error::UnsupportedSpec(
                            "weighted_sum term is itself a weighted_sum".into(),
                        ));
                    }
                    total += t.holder_constant(limits, radius, depth + 1)?;
                }
                Ok(total)
            }
        }
    }
}

/// Validates membership in S^k: componentwise >= -SIMPLEX_TOL, sums to 1
/// within SIMPLEX_TOL.
pub fn check_simplex(u: &[f64]) -> Result<()> {
    for (i, &ui) in u.iter().enumerate() {
        if ui < -SIMPLEX_TOL {
            return Err(Error::SimplexViolation(format!("u[{i}] = {ui} < 0")));
        }
    }
    let s: f64 = u.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::SimplexViolation(format!("sum(u) = {s}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn limits_k2() -> LimitParams {
        LimitParams {
            lambda: vec![0.5, 0.5],
            mu: vec![1.0, 1.0],
            theta: vec![0.5, 2.0],
            lambda_hat: vec![0.0, 0.0],
            mu_hat: vec![1.0, 1.0],
            c2u: vec![1.0, 1.0],
            gamma: 1.0,
        }
        .validated()
        .unwrap()
    }

    #[test]
    fn ltilde_examples() {
        let lim = limits_k2();
        let lin = CostSpec::linear_queue(vec![1.0, 1.0]);
        assert_abs_diff_eq!(
            lin.eval_ltilde(&lim, &[2.0, 3.0], &[0.0, 0.0]).unwrap(),
            5.0
        );
        let ab = CostSpec::abandonment(vec![1.0, 1.0]);
        assert_abs_diff_eq!(
            ab.eval_ltilde(&lim, &[2.0, 1.0], &[0.0, 0.0]).unwrap(),
            3.0
        );
        let pq = CostSpec::power_queue(vec![1.0, 1.0], vec![2.0, 2.0]);
        assert_abs_diff_eq!(
            pq.eval_ltilde(&lim, &[0.0, 0.0], &[0.0, 0.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn ltilde_rejects_negative_queue() {
        let lim = limits_k2();
        let lin = CostSpec::linear_queue(vec![1.0, 1.0]);
        assert!(matches!(
            lin.eval_ltilde(&lim, &[-0.1, 0.0], &[0.0, 0.0]),
            Err(Error::NegativeQueue { index: 0, .. })
        ));
        // within tolerance is clamped, not rejected
        assert_abs_diff_eq!(
            lin.eval_ltilde(&lim, &[-1e-12, 1.0], &[0.0, 0.0]).unwrap(),
            1.0
        );
    }

    #[test]
    fn eval_l_examples() {
        let lim = limits_k2();
        let lin = CostSpec::linear_queue(vec![1.0, 1.0]);
        // 1.x <= 0 -> 0
        assert_abs_diff_eq!(
            lin.eval_l(&lim, &[-1.0, 0.5], &[0.3, 0.7]).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            lin.eval_l(&lim, &[1.0, 1.0], &[0.5, 0.5]).unwrap(),
            2.0
        );
        let idle = CostSpec::idling();
        assert_abs_diff_eq!(
            idle.eval_l(&lim, &[-1.0, -1.0], &[0.5, 0.5]).unwrap(),
            2.0
        );
    }

    #[test]
    fn eval_l_rejects_bad_u() {
        let lim = limits_k2();
        let lin = CostSpec::linear_queue(vec![1.0, 1.0]);
        assert!(matches!(
            lin.eval_l(&lim, &[1.0, 1.0], &[0.7, 0.7]),
            Err(Error::SimplexViolation(_))
        ));
        assert!(matches!(
            lin.eval_l(&lim, &[1.0, 1.0], &[-0.2, 1.2]),
            Err(Error::SimplexViolation(_))
        ));
    }

    #[test]
    fn eval_l_equals_ltilde_of_split() {
        let lim = limits_k2();
        let specs = [
            CostSpec::power_queue(vec![1.0, 2.0], vec![2.0, 3.0]),
            CostSpec::linear_queue(vec![1.0, 0.5]),
            CostSpec::abandonment(vec![1.0, 1.0]),
            CostSpec::idling(),
            CostSpec::customers_in_system(vec![1.0, 1.0]),
        ];
        let xs: [Vec<f64>; 4] = [
            vec![1.0, 1.0],
            vec![2.5, -0.5],
            vec![-1.0, -2.0],
            vec![0.0, 0.0],
        ];
        let us = [vec![0.5, 0.5], vec![1.0, 0.0], vec![0.25, 0.75]];
        for spec in &specs {
            for x in &xs {
                for u in &us {
                    let q = (x[0] + x[1]).max(0.0);
                    let phi = [q * u[0], q * u[1]];
                    let psi = [x[0] - phi[0], x[1] - phi[1]];
                    let via_split = spec.eval_ltilde(&lim, &phi, &psi).unwrap();
                    let direct = spec.eval_l(&lim, x, u).unwrap();
                    assert_abs_diff_eq!(direct, via_split, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn holder_examples() {
        let lim = limits_k2();
        let (c, rho) = CostSpec::linear_queue(vec![1.0, 1.0])
            .local_holder_bound(&lim, 5.0)
            .unwrap();
        assert_abs_diff_eq!(c, 2.0);
        assert_abs_diff_eq!(rho, 1.0);
        let (c, _) = CostSpec::idling().local_holder_bound(&lim, 3.0).unwrap();
        assert_abs_diff_eq!(c, 2.0);
        // p = 2, c = 1, radius R: per-coordinate 2*(2R), times k = 2
        let r = 4.0;
        let (c, _) = CostSpec::power_queue(vec![1.0, 1.0], vec![2.0, 2.0])
            .local_holder_bound(&lim, r)
            .unwrap();
        assert_abs_diff_eq!(c, 2.0 * (2.0 * r) * 2.0);
    }

    #[test]
    fn holder_rejects_nested_sum() {
        let lim = limits_k2();
        let nested = CostSpec::weighted_sum(vec![CostSpec::weighted_sum(vec![
            CostSpec::idling(),
        ])]);
        assert!(matches!(
            nested.local_holder_bound(&lim, 1.0),
            Err(Error::UnsupportedSpec(_))
        ));
    }

    #[test]
    fn holder_bound_is_valid_on_samples() {
        use rand::prelude::*;
        let lim = limits_k2();
        let radius = 3.0;
        let specs = [
            CostSpec::power_queue(vec![1.0, 1.0], vec![2.0, 2.0]),
            CostSpec::linear_queue(vec![1.0, 2.0]),
            CostSpec::abandonment(vec![1.0, 1.0]),
            CostSpec::idling(),
            CostSpec::weighted_sum(vec![
                CostSpec::power_queue(vec![1.0, 1.0], vec![2.0, 2.0]),
                CostSpec::idling(),
            ]),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for spec in &specs {
            let (c, rho) = spec.local_holder_bound(&lim, radius).unwrap();
            assert_eq!(rho, 1.0);
            for _ in 0..2000 {
                let x: Vec<f64> = (0..2).map(|_| rng.random_range(-radius..radius)).collect();
                let y: Vec<f64> = (0..2).map(|_| rng.random_range(-radius..radius)).collect();
                let t: f64 = rng.random_range(0.0..1.0);
                let u = vec![t, 1.0 - t];
                let lx = spec.eval_l(&lim, &x, &u).unwrap();
                let ly = spec.eval_l(&lim, &y, &u).unwrap();
                let dist = x
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                assert!(
                    (lx - ly).abs() <= c * dist + 1e-9,
                    "{}: |{lx} - {ly}| > {c} * {dist}",
                    spec.cost_id()
                );
            }
        }
    }

    #[test]
    fn customers_in_system_requires_diffusion_scale() {
        let bad = CostSpec::CustomersInSystem {
            coeffs: vec![1.0, 1.0],
            scale: "physical".into(),
        };
        assert!(bad.validate(2).is_err());
        assert!(CostSpec::customers_in_system(vec![1.0, 1.0]).validate(2).is_ok());
    }

    #[test]
    fn flags() {
        let pq = CostSpec::power_queue(vec![1.0, 1.0], vec![2.0, 2.0]);
        assert!(pq.smooth_policy_expected());
        assert!(pq.strictly_convex_in_u());
        assert!(pq.convex_in_u());
        let lin = CostSpec::linear_queue(vec![1.0, 1.0]);
        assert!(!lin.smooth_policy_expected());
        assert!(!lin.strictly_convex_in_u());
        assert!(lin.convex_in_u());
        let p15 = CostSpec::power_queue(vec![1.0, 1.0], vec![1.5, 1.5]);
        assert!(!p15.smooth_policy_expected());
        assert!(p15.strictly_convex_in_u());
        assert_eq!(p15.growth_degree(), 2);
    }

    #[test]
    fn toml_roundtrip() {
        let spec = CostSpec::power_queue(vec![1.0, 1.0], vec![2.0, 2.0]);
        let s = toml::to_string(&spec).unwrap();
        let back: CostSpec = toml::from_str(&s).unwrap();
        assert_eq!(spec, back);
    }

    proptest! {
        // u-independence whenever 1.x <= 0 (the (1.x)^+ factor vanishes).
        #[test]
        fn u_independent_when_total_nonpositive(
            x0 in -5.0f64..5.0,
            shift in 0.0f64..5.0,
            t1 in 0.0f64..1.0,
            t2 in 0.0f64..1.0,
        ) {
            let lim = limits_k2();
            // force 1.x <= 0
            let x = vec![x0, -x0 - shift];
            let u1 = vec![t1, 1.0 - t1];
            let u2 = vec![t2, 1.0 - t2];
            for spec in [
                CostSpec::power_queue(vec![1.0, 1.0], vec![2.0, 2.0]),
                CostSpec::linear_queue(vec![1.0, 2.0]),
                CostSpec::abandonment(vec![1.0, 1.0]),
                CostSpec::idling(),
                CostSpec::customers_in_system(vec![1.0, 1.0]),
            ] {
                let a = spec.eval_l(&lim, &x, &u1).unwrap();
                let b = spec.eval_l(&lim, &x, &u2).unwrap();
                prop_assert_eq!(a, b);
            }
        }

        // Convexity of u -> L(x, u) on the simplex.
        #[test]
        fn convex_in_u_property(
            x0 in -4.0f64..4.0,
            x1 in -4.0f64..4.0,
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
            t in 0.0f64..1.0,
        ) {
            let lim = limits_k2();
            let x = vec![x0, x1];
            let u = vec![a, 1.0 - a];
            let v = vec![b, 1.0 - b];
            let w = vec![t * a + (1.0 - t) * b, t * (1.0 - a) + (1.0 - t) * (1.0 - b)];
            for spec in [
                CostSpec::power_queue(vec![1.0, 1.0], vec![2.0, 3.0]),
                CostSpec::linear_queue(vec![1.0, 2.0]),
                CostSpec::abandonment(vec![1.0, 1.0]),
                CostSpec::idling(),
                CostSpec::customers_in_system(vec![1.0, 1.0]),
            ] {
                let lw = spec.eval_l(&lim, &x, &w).unwrap();
                let lu = spec.eval_l(&lim, &x, &u).unwrap();
                let lv = spec.eval_l(&lim, &x, &v).unwrap();
                prop_assert!(lw <= t * lu + (1.0 - t) * lv + 1e-12);
            }
        }

        // Nonnegativity and polynomial growth for the nonneg catalog kinds.
        #[test]
        fn nonneg_and_growth(
            x0 in -1000.0f64..1000.0,
            x1 in -1000.0f64..1000.0,
            a in 0.0f64..1.0,
        ) {
            let lim = limits_k2();
            let x = vec![x0, x1];
            let u = vec![a, 1.0 - a];
            let norm = x0.abs() + x1.abs();
            for spec in [
                CostSpec::power_queue(vec![1.0, 1.0], vec![2.0, 2.0]),
                CostSpec::linear_queue(vec![1.0, 2.0]),
                CostSpec::abandonment(vec![1.0, 1.0]),
                CostSpec::idling(),
            ] {
                let l = spec.eval_l(&lim, &x, &u).unwrap();
                prop_assert!(l >= 0.0);
                let m = spec.growth_degree() as i32;
                // generous envelope constant c = 4 max coeff = 8
                prop_assert!(l <= 8.0 * (1.0 + norm.powi(m)));
            }
        }
    }
}
