//! Scheduling control policies: the preemptive and nonpreemptive rules driven
//! by a Markov policy on the diffusion state, plus static baselines.
//!
//! All shipped policies are work conserving and see only the current state,
//! which makes them admissible by the state-feedback construction.

use std::fmt;
use std::sync::Arc;

use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::params::{rescale_counts, SystemParams};
use crate::simplex::project_to_simplex;

/// Shape of the state-to-control maps wrapped by [`PolicyFn`]: writes the
/// control for `x` into the output slice.
pub type PolicyEval = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A measurable map from the diffusion state to a simplex control.
#[derive(Clone)]
pub struct PolicyFn {
    k: usize,
    f: Arc<PolicyEval>,
}

impl fmt::Debug for PolicyFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PolicyFn(k={})", self.k)
    }
}

impl PolicyFn {
    pub fn new(k: usize, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Self { k, f: Arc::new(f) }
    }

    /// Constant policy u(x) = u.
    pub fn constant(u: Vec<f64>) -> Self {
        let k = u.len();
        Self::new(k, move |_x, out| out.copy_from_slice(&u))
    }

    /// Uniform mixing policy (1/k, ..., 1/k).
    pub fn uniform(k: usize) -> Self {
        Self::constant(vec![1.0 / k as f64; k])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Writes u(x) into `out`; the result is always projected onto S^k.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.k);
        debug_assert_eq!(out.len(), self.k);
        (self.f)(x, out);
        project_to_simplex(out);
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        self.eval_into(x, &mut out);
        out
    }
}

/// Absolute tolerance for the integer-total precondition of [`theta_round`].
pub const THETA_ROUND_TOL: f64 = 1e-6;

/// Sum-preserving integer rounding of a nonnegative vector with integer total:
/// floors every component but the last and pushes the accumulated fractional
/// mass into the last one. The result z satisfies 1.z = 1.y exactly,
/// z in Z_+^k, and ||z - y||_1 <= 2k.
pub fn theta_round(y: &[f64]) -> Result<Vec<i64>> {
    let total_f: f64 = y.iter().sum();
    let total = total_f.round();
    if (total_f - total).abs() > THETA_ROUND_TOL || total < 0.0 {
        return Err(Error::NonIntegerTotal { total: total_f });
    }
    let k = y.len();
    let mut z = Vec::with_capacity(k);
    let mut partial: i64 = 0;
    for &yi in &y[..k - 1] {
        debug_assert!(yi >= -THETA_ROUND_TOL);
        let zi = yi.max(0.0).floor() as i64;
        z.push(zi);
        partial += zi;
    }
    // last component absorbs the fractional mass; exact by construction
    z.push(total as i64 - partial);
    Ok(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Pscp,
    Nscp1,
    Nscp2,
    StaticPriority,
    CMu,
    CMuTheta,
    /// Test hook: deliberately violates the assignment contract.
    CorruptForTests,
}

/// A scheduling policy the event simulator can drive. Preemptive kinds
/// reassign the whole service vector after every event; nonpreemptive kinds
/// only pick which class to route when a server frees up.
#[derive(Debug, Clone)]
pub struct SchedulingPolicy {
    pub kind: PolicyKind,
    policy_fn: Option<PolicyFn>,
    /// Classes in descending priority (first entry served first).
    priority_order: Vec<usize>,
    /// Index weights for the c-mu style rules.
    weights: Vec<f64>,
    pub declares_work_conserving: bool,
    pub declares_nonpreemptive: bool,
    id: String,
}

impl SchedulingPolicy {
    /// Preemptive rule: queue vector tracks the sum-preserving rounding of
    /// (1.X - n)^+ h(x_hat) whenever that is feasible, with the fixed
    /// highest-class-first priority fallback otherwise.
    pub fn pscp(h: PolicyFn) -> Self {
        Self {
            kind: PolicyKind::Pscp,
            policy_fn: Some(h),
            priority_order: Vec::new(),
            weights: Vec::new(),
            declares_work_conserving: true,
            declares_nonpreemptive: false,
            id: "pscp".into(),
        }
    }

    /// Nonpreemptive rule driven directly by h.
    pub fn nscp1(h: PolicyFn) -> Self {
        Self {
            kind: PolicyKind::Nscp1,
            policy_fn: Some(h),
            priority_order: Vec::new(),
            weights: Vec::new(),
            declares_work_conserving: true,
            declares_nonpreemptive: true,
            id: "nscp1".into(),
        }
    }

    /// Nonpreemptive rule driven by the mollified policy h^{eps(n)}; requires
    /// a cost that is convex in u. The default epsilon rule is n^{-1/4}.
    pub fn nscp2(
        h: &PolicyFn,
        n: u64,
        eps_rule: impl Fn(u64) -> f64,
        cost: &CostSpec,
    ) -> Result<Self> {
        if !cost.convex_in_u() {
            return Err(Error::NonConvexCost {
                cost_id: cost.cost_id(),
            });
        }
        let eps = eps_rule(n);
        let smoothed = crate::hjb::mollify_policy(h, eps);
        Ok(Self {
            kind: PolicyKind::Nscp2,
            policy_fn: Some(smoothed),
            priority_order: Vec::new(),
            weights: Vec::new(),
            declares_work_conserving: true,
            declares_nonpreemptive: true,
            id: format!("nscp2(eps={eps:.4})"),
        })
    }

    pub fn default_eps_rule(n: u64) -> f64 {
        (n as f64).powf(-0.25)
    }

    /// Fixed priority baseline; `order` lists classes in descending priority.
    pub fn static_priority(order: Vec<usize>) -> Self {
        let id = format!(
            "prio({})",
            order
                .iter()
                .map(|c| (c + 1).to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        Self {
            kind: PolicyKind::StaticPriority,
            policy_fn: None,
            priority_order: order,
            weights: Vec::new(),
            declares_work_conserving: true,
            declares_nonpreemptive: true,
            id,
        }
    }

    /// Serve the nonempty class maximizing c_i mu_i.
    pub fn cmu(coeffs: &[f64], mu_n: &[f64]) -> Self {
        let weights = coeffs.iter().zip(mu_n).map(|(c, m)| c * m).collect();
        Self {
            kind: PolicyKind::CMu,
            policy_fn: None,
            priority_order: Vec::new(),
            weights,
            declares_work_conserving: true,
            declares_nonpreemptive: true,
            id: "cmu".into(),
        }
    }

    /// Serve the nonempty class maximizing c_i mu_i / theta_i.
    pub fn cmutheta(coeffs: &[f64], mu_n: &[f64], theta_n: &[f64]) -> Result<Self> {
        for (i, &t) in theta_n.iter().enumerate() {
            if t <= 0.0 {
                return Err(Error::ZeroTheta { index: i });
            }
        }
        let weights = (0..coeffs.len())
            .map(|i| coeffs[i] * mu_n[i] / theta_n[i])
            .collect();
        Ok(Self {
            kind: PolicyKind::CMuTheta,
            policy_fn: None,
            priority_order: Vec::new(),
            weights,
            declares_work_conserving: true,
            declares_nonpreemptive: true,
            id: "cmutheta".into(),
        })
    }

    /// Returns a policy that reports itself as work conserving and
    /// nonpreemptive but hands back an over-full assignment; used by the
    /// audit command to prove the simulator rejects contract breakers.
    pub fn corrupted_for_tests() -> Self {
        Self {
            kind: PolicyKind::CorruptForTests,
            policy_fn: None,
            priority_order: Vec::new(),
            weights: Vec::new(),
            declares_work_conserving: true,
            declares_nonpreemptive: false,
            id: "corrupt".into(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn is_preemptive(&self) -> bool {
        matches!(self.kind, PolicyKind::Pscp | PolicyKind::CorruptForTests)
    }

    /// The Markov policy driving this rule, when there is one.
    pub fn markov_policy(&self) -> Option<&PolicyFn> {
        self.policy_fn.as_ref()
    }

    /// Preemptive assignment: returns the full target service vector for the
    /// current class populations x.
    pub fn target_psi(&self, sys: &SystemParams, x: &[i64]) -> Vec<i64> {
        match self.kind {
            PolicyKind::Pscp => {
                let h = self.policy_fn.as_ref().expect("pscp carries a policy");
                p_scp_assign(sys, x, h)
            }
            PolicyKind::CorruptForTests => {
                // one phantom server too many
                let mut psi = x.to_vec();
                let total: i64 = psi.iter().sum();
                if total > sys.n as i64 {
                    psi = p_scp_fallback(sys, x);
                }
                psi[0] += 1;
                psi
            }
            _ => panic!("target_psi called on a nonpreemptive policy"),
        }
    }

    /// Nonpreemptive routing decision; `None` when every queue is empty.
    pub fn pick_class(&self, sys: &SystemParams, phi: &[i64], psi: &[i64]) -> Result<Option<usize>> {
        let total_phi: i64 = phi.iter().sum();
        if total_phi == 0 {
            return Ok(None);
        }
        match self.kind {
            PolicyKind::Nscp1 | PolicyKind::Nscp2 => {
                let h = self.policy_fn.as_ref().expect("nscp carries a policy");
                n_scp_pick_class(sys, phi, psi, h).map(Some)
            }
            PolicyKind::StaticPriority => Ok(self
                .priority_order
                .iter()
                .copied()
                .find(|&c| phi[c] > 0)),
            PolicyKind::CMu | PolicyKind::CMuTheta => {
                let mut best: Option<usize> = None;
                for i in 0..phi.len() {
                    if phi[i] == 0 {
                        continue;
                    }
                    best = match best {
                        None => Some(i),
                        // ties go to the larger class index: >= keeps the
                        // later class on equal weights
                        Some(b) if self.weights[i] >= self.weights[b] => Some(i),
                        Some(b) => Some(b),
                    };
                }
                Ok(best)
            }
            _ => panic!("pick_class called on a preemptive policy"),
        }
    }
}

/// Highest-class-index-first work-conserving split, used when the rounded
/// target would require serving customers that are not present.
fn p_scp_fallback(sys: &SystemParams, x: &[i64]) -> Vec<i64> {
    let mut remaining = sys.n as i64;
    let mut psi = vec![0i64; x.len()];
    for i in (0..x.len()).rev() {
        let take = x[i].min(remaining);
        psi[i] = take;
        remaining -= take;
        if remaining == 0 {
            break;
        }
    }
    psi
}

/// The preemptive assignment map: given the class populations X, returns the
/// target service vector. Work conservation holds by construction.
pub fn p_scp_assign(sys: &SystemParams, x: &[i64], h: &PolicyFn) -> Vec<i64> {
    let total: i64 = x.iter().sum();
    let q = (total - sys.n as i64).max(0);
    if q == 0 {
        return x.to_vec();
    }
    if x.iter().any(|&xi| xi < q) {
        return p_scp_fallback(sys, x);
    }
    let phi_zero = vec![0i64; x.len()];
    let (x_hat, _, _) = rescale_counts(sys, &phi_zero, x);
    let mut u = vec![0.0; x.len()];
    h.eval_into(&x_hat, &mut u);
    let y: Vec<f64> = u.iter().map(|ui| q as f64 * ui).collect();
    let phi = theta_round(&y).expect("q * u has integer total");
    x.iter().zip(&phi).map(|(xi, pi)| xi - pi).collect()
}

/// The nonpreemptive pick rule: route the largest class index whose queue
/// meets its target M_i = (1.X - n)^+ h_i(x_hat), or holds at least one
/// customer when the target is below one.
pub fn n_scp_pick_class(
    sys: &SystemParams,
    phi: &[i64],
    psi: &[i64],
    h: &PolicyFn,
) -> Result<usize> {
    let x: Vec<i64> = phi.iter().zip(psi).map(|(a, b)| a + b).collect();
    let total: i64 = x.iter().sum();
    let q = (total - sys.n as i64).max(0) as f64;
    let (x_hat, _, _) = rescale_counts(sys, phi, psi);
    let mut u = vec![0.0; phi.len()];
    h.eval_into(&x_hat, &mut u);
    let mut pick: Option<usize> = None;
    for i in 0..phi.len() {
        let target = (q * u[i]).max(1.0);
        if (phi[i] as f64) >= target {
            pick = Some(i);
        }
    }
    pick.ok_or_else(|| Error::EmptyK0 {
        phi: phi.to_vec(),
        targets: u.iter().map(|ui| q * ui).collect(),
    })
}
