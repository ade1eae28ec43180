//! Exact discrete-event simulation of the n-th queueing system under a
//! pluggable scheduling policy.
//!
//! Service completions and abandonments are driven by aggregate exponential
//! clocks per class (rates mu_i^n Psi_i and theta_i^n Phi_i), redrawn after
//! every event; this is distributionally exact by memorylessness of the
//! time-changed Poisson representation and keeps no per-customer state.
//! Arrivals come from renewal samplers. Between events the state is constant,
//! so the discounted cost accumulates in closed form per segment. Every event
//! re-checks the structural invariants (integer flow balance, capacity,
//! nonnegativity) and counts work-conservation and nonpreemption violations
//! against what the policy declares.
//!
//! Simultaneous event times are broken deterministically in the order
//! abandonment < service completion < arrival, by class index ascending.

mod arrivals;

pub use arrivals::{InterarrivalFamily, InterarrivalSampler};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::params::{initial_split, rescale_counts, LimitParams, SystemParams};
use crate::policy::SchedulingPolicy;

/// Full state of the n-th system at an event epoch.
#[derive(Debug, Clone)]
pub struct QueueState {
    /// Waiting customers per class.
    pub phi: Vec<i64>,
    /// Customers in service per class.
    pub psi: Vec<i64>,
    /// Absolute time of the next renewal arrival per class.
    pub next_arrival: Vec<f64>,
    pub now: f64,
    pub cum_arrivals: Vec<i64>,
    pub cum_services: Vec<i64>,
    pub cum_abandonments: Vec<i64>,
    /// Routing counters B_i: services started minus services preempted.
    pub cum_routed: Vec<i64>,
    /// Time integrals of phi and psi.
    pub int_phi: Vec<f64>,
    pub int_psi: Vec<f64>,
    x0: Vec<i64>,
    psi0: Vec<i64>,
}

impl QueueState {
    fn new(phi: Vec<i64>, psi: Vec<i64>) -> Self {
        let k = phi.len();
        let x0 = phi.iter().zip(&psi).map(|(a, b)| a + b).collect();
        QueueState {
            psi0: psi.clone(),
            x0,
            phi,
            psi,
            next_arrival: vec![f64::INFINITY; k],
            now: 0.0,
            cum_arrivals: vec![0; k],
            cum_services: vec![0; k],
            cum_abandonments: vec![0; k],
            cum_routed: vec![0; k],
            int_phi: vec![0.0; k],
            int_psi: vec![0.0; k],
        }
    }

    pub fn k(&self) -> usize {
        self.phi.len()
    }

    pub fn x(&self) -> Vec<i64> {
        self.phi.iter().zip(&self.psi).map(|(a, b)| a + b).collect()
    }

    pub fn total_in_system(&self) -> i64 {
        self.phi.iter().sum::<i64>() + self.psi.iter().sum::<i64>()
    }

    /// Diffusion-scale coordinates (x_hat, phi_hat, psi_hat).
    pub fn rescaled(&self, sys: &SystemParams) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        rescale_counts(sys, &self.phi, &self.psi)
    }

    /// Structural invariants: nonnegativity, capacity, exact integer flow
    /// balance, and the routing-counter identity.
    pub fn check_invariants(&self, n: u64) -> Result<()> {
        let breach = |what: String| -> Result<()> {
            Err(Error::InvariantBreach {
                t: self.now,
                what,
                dump: format!("{self:?}"),
            })
        };
        let mut psi_total = 0;
        for i in 0..self.k() {
            if self.phi[i] < 0 {
                return breach(format!("phi[{i}] = {} < 0", self.phi[i]));
            }
            if self.psi[i] < 0 {
                return breach(format!("psi[{i}] = {} < 0", self.psi[i]));
            }
            psi_total += self.psi[i];
            let x = self.phi[i] + self.psi[i];
            let balance =
                self.x0[i] + self.cum_arrivals[i] - self.cum_services[i] - self.cum_abandonments[i];
            if x != balance {
                return breach(format!(
                    "flow balance broken for class {i}: X = {x}, X0 + A - S - R = {balance}"
                ));
            }
            let routed = self.psi[i] - self.psi0[i] + self.cum_services[i];
            if routed != self.cum_routed[i] {
                return breach(format!(
                    "routing identity broken for class {i}: {} vs {}",
                    routed, self.cum_routed[i]
                ));
            }
        }
        if psi_total > n as i64 {
            return breach(format!("sum(psi) = {psi_total} > n = {n}"));
        }
        Ok(())
    }
}

/// Options for one replication.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub horizon: f64,
    pub seed: u64,
    /// When set, records the total number in system every `interval` time
    /// units after `burn_in`.
    pub occupancy_sample_interval: Option<f64>,
    pub occupancy_burn_in: f64,
}

impl RunOptions {
    pub fn new(horizon: f64, seed: u64) -> Self {
        RunOptions {
            horizon,
            seed,
            occupancy_sample_interval: None,
            occupancy_burn_in: 0.0,
        }
    }
}

/// One replication's outcome.
#[derive(Debug, Clone)]
pub struct SimResult {
    /// Realized discounted cost integral over [0, horizon].
    pub discounted_cost: f64,
    /// Analytic envelope on the truncated tail beyond the horizon.
    pub tail_bound: f64,
    /// Observed abandonment counts per class.
    pub abandon_observed: Vec<f64>,
    /// theta_i^n * int phi_i ds per class (the abandonment identity's other side).
    pub abandon_predicted: Vec<f64>,
    pub wc_violations: u64,
    pub np_violations: u64,
    pub event_count: u64,
    /// Time-average L1 gap between the realized queue fractions u^n and the
    /// Markov policy h(x_hat) over the overloaded segments, when the policy
    /// carries one.
    pub policy_gap_timeavg: Option<f64>,
    pub occupancy_samples: Vec<i64>,
    pub max_ltilde: f64,
    pub seed: u64,
    pub horizon: f64,
}

enum EventKind {
    Abandonment(usize),
    Service(usize),
    Arrival(usize),
}

/// Simulates one replication from the canonical initial split for `x0`.
pub fn run(
    sys: &SystemParams,
    policy: &SchedulingPolicy,
    cost: &CostSpec,
    limits: &LimitParams,
    x0: &[f64],
    opts: &RunOptions,
) -> Result<SimResult> {
    let k = sys.k();
    let n = sys.n;
    let gamma = limits.gamma;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let samplers: Vec<InterarrivalSampler> = (0..k)
        .map(|i| InterarrivalSampler::for_rate(sys.lambda_n[i], limits.c2u[i]))
        .collect();

    let (phi0, psi0) = initial_split(sys, x0);
    let mut st = QueueState::new(phi0, psi0);
    for i in 0..k {
        st.next_arrival[i] = samplers[i].sample(&mut rng);
    }

    let mut result = SimResult {
        discounted_cost: 0.0,
        tail_bound: 0.0,
        abandon_observed: vec![0.0; k],
        abandon_predicted: vec![0.0; k],
        wc_violations: 0,
        np_violations: 0,
        event_count: 0,
        policy_gap_timeavg: policy.markov_policy().map(|_| 0.0),
        occupancy_samples: Vec::new(),
        max_ltilde: 0.0,
        seed: opts.seed,
        horizon: opts.horizon,
    };
    let mut gap_integral = 0.0;
    let mut next_sample = opts
        .occupancy_sample_interval
        .map(|_| opts.occupancy_burn_in);

    // initial assignment
    apply_policy(sys, policy, &mut st, &mut result)?;
    st.check_invariants(n)?;

    let mut u_buf = vec![0.0; k];
    let mut h_buf = vec![0.0; k];

    loop {
        // next event: abandonment < service < arrival, class ascending
        let mut t_event = f64::INFINITY;
        let mut kind = EventKind::Arrival(0);
        for i in 0..k {
            let rate = sys.theta_n[i] * st.phi[i] as f64;
            if rate > 0.0 {
                let t = st.now + Exp::new(rate).expect("positive rate").sample(&mut rng);
                if t < t_event {
                    t_event = t;
                    kind = EventKind::Abandonment(i);
                }
            }
        }
        for i in 0..k {
            let rate = sys.mu_n[i] * st.psi[i] as f64;
            if rate > 0.0 {
                let t = st.now + Exp::new(rate).expect("positive rate").sample(&mut rng);
                if t < t_event {
                    t_event = t;
                    kind = EventKind::Service(i);
                }
            }
        }
        for i in 0..k {
            if st.next_arrival[i] < t_event {
                t_event = st.next_arrival[i];
                kind = EventKind::Arrival(i);
            }
        }

        let seg_end = t_event.min(opts.horizon);
        // closed-form segment cost: state constant on [now, seg_end)
        let (x_hat, phi_hat, psi_hat) = rescale_counts(sys, &st.phi, &st.psi);
        let ltilde = cost.eval_ltilde(limits, &phi_hat, &psi_hat)?;
        result.max_ltilde = result.max_ltilde.max(ltilde.abs());
        let dt = seg_end - st.now;
        if dt > 0.0 {
            result.discounted_cost +=
                ltilde * ((-gamma * st.now).exp() - (-gamma * seg_end).exp()) / gamma;
            for i in 0..k {
                st.int_phi[i] += st.phi[i] as f64 * dt;
                st.int_psi[i] += st.psi[i] as f64 * dt;
            }
            // realized queue fractions vs the Markov policy; on {1.X <= n}
            // the Hamiltonian gap vanishes for every u, so only overloaded
            // segments contribute
            if let Some(h) = policy.markov_policy() {
                let q: i64 = st.total_in_system() - n as i64;
                if q > 0 {
                    for i in 0..k {
                        u_buf[i] = st.phi[i] as f64 / q as f64;
                    }
                    h.eval_into(&x_hat, &mut h_buf);
                    let gap: f64 = u_buf
                        .iter()
                        .zip(&h_buf)
                        .map(|(a, b)| (a - b).abs())
                        .sum();
                    gap_integral += gap * dt;
                }
            }
        }
        if let (Some(interval), Some(ns)) = (opts.occupancy_sample_interval, next_sample.as_mut()) {
            while *ns <= seg_end {
                if *ns >= st.now {
                    result.occupancy_samples.push(st.total_in_system());
                }
                *ns += interval;
            }
        }

        if t_event > opts.horizon {
            st.now = opts.horizon;
            break;
        }
        st.now = t_event;
        match kind {
            EventKind::Abandonment(i) => {
                st.phi[i] -= 1;
                st.cum_abandonments[i] += 1;
            }
            EventKind::Service(i) => {
                st.psi[i] -= 1;
                st.cum_services[i] += 1;
            }
            EventKind::Arrival(i) => {
                st.phi[i] += 1;
                st.cum_arrivals[i] += 1;
                st.next_arrival[i] = st.now + samplers[i].sample(&mut rng);
            }
        }
        result.event_count += 1;
        apply_policy(sys, policy, &mut st, &mut result)?;
        st.check_invariants(n)?;
    }

    for i in 0..k {
        result.abandon_observed[i] = st.cum_abandonments[i] as f64;
        result.abandon_predicted[i] = sys.theta_n[i] * st.int_phi[i];
    }
    if let Some(g) = result.policy_gap_timeavg.as_mut() {
        *g = gap_integral / opts.horizon;
    }
    result.tail_bound = tail_envelope(
        gamma,
        cost.growth_degree(),
        result.max_ltilde,
        opts.horizon,
    );
    Ok(result)
}

/// Re-invokes the policy after an event: wholesale reassignment for
/// preemptive policies, a routing loop for nonpreemptive ones. Updates the
/// routing counters and the violation audits.
fn apply_policy(
    sys: &SystemParams,
    policy: &SchedulingPolicy,
    st: &mut QueueState,
    result: &mut SimResult,
) -> Result<()> {
    let k = st.k();
    let n = sys.n as i64;
    if policy.is_preemptive() {
        let x = st.x();
        let psi = policy.target_psi(sys, &x);
        let mut total = 0;
        for i in 0..k {
            if psi[i] < 0 || psi[i] > x[i] {
                return Err(Error::PolicyContractViolation {
                    t: st.now,
                    what: format!("target psi[{i}] = {} outside [0, {}]", psi[i], x[i]),
                });
            }
            total += psi[i];
        }
        if total > n {
            return Err(Error::PolicyContractViolation {
                t: st.now,
                what: format!("sum(psi) = {total} > n = {n}"),
            });
        }
        for i in 0..k {
            let routed_now = psi[i] - st.psi0[i] + st.cum_services[i];
            if routed_now < st.cum_routed[i] {
                result.np_violations += 1;
            }
            st.cum_routed[i] = routed_now;
            st.psi[i] = psi[i];
            st.phi[i] = x[i] - psi[i];
        }
    } else {
        let mut free = n - st.psi.iter().sum::<i64>();
        let mut waiting: i64 = st.phi.iter().sum();
        while free > 0 && waiting > 0 {
            match policy.pick_class(sys, &st.phi, &st.psi)? {
                Some(c) => {
                    if st.phi[c] == 0 {
                        return Err(Error::PolicyContractViolation {
                            t: st.now,
                            what: format!("picked class {c} with empty queue"),
                        });
                    }
                    st.phi[c] -= 1;
                    st.psi[c] += 1;
                    st.cum_routed[c] += 1;
                    free -= 1;
                    waiting -= 1;
                }
                None => break,
            }
        }
    }
    if policy.declares_work_conserving {
        let total: i64 = st.total_in_system();
        let queued: i64 = st.phi.iter().sum();
        if (total - n).max(0) != queued {
            result.wc_violations += 1;
        }
    }
    Ok(())
}

/// Conservative analytic tail envelope
/// 10 * max|Ltilde| * (1 + T^mL) * e^{-gamma T} / gamma.
pub fn tail_envelope(gamma: f64, m_l: u32, max_ltilde: f64, horizon: f64) -> f64 {
    10.0 * max_ltilde * (1.0 + horizon.powi(m_l as i32)) * (-gamma * horizon).exp() / gamma
}

/// Smallest horizon T >= pilot_horizon with
/// 10 (1 + T^mL) e^{-gamma T} <= rel_tail, i.e. the tail envelope is at most
/// rel_tail times the running-cost scale pilot_max / gamma.
pub fn horizon_for(gamma: f64, m_l: u32, pilot_max: f64, rel_tail: f64, pilot_horizon: f64) -> f64 {
    assert!(rel_tail > 0.0 && rel_tail <= 1.0);
    assert!(gamma > 0.0);
    if pilot_max <= 0.0 {
        return pilot_horizon;
    }
    let cond = |t: f64| 10.0 * (1.0 + t.powi(m_l as i32)) * (-gamma * t).exp() <= rel_tail;
    // past the envelope's peak the left side is decreasing
    let mut lo = m_l as f64 / gamma;
    if cond(lo) {
        return lo.max(pilot_horizon);
    }
    let mut hi = lo.max(1.0);
    while !cond(hi) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cond(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi.max(pilot_horizon)
}

/// Aggregated replication statistics.
#[derive(Debug, Clone)]
pub struct Replication {
    pub mean_cost: f64,
    pub std_error: f64,
    /// Per class: |mean(observed abandonments) - theta_i^n mean(int phi_i)|
    /// in units of the standard error of the difference (0 when both sides
    /// are exactly zero).
    pub lemma1_gap_se: Vec<f64>,
    pub wc_violations: u64,
    pub np_violations: u64,
    pub event_count: u64,
    pub mean_policy_gap: Option<f64>,
    pub reps: usize,
    pub results: Vec<SimResult>,
}

/// Independent replications with seeds base_seed + j, reduced in seed order.
#[allow(clippy::too_many_arguments)]
pub fn replicate(
    sys: &SystemParams,
    policy: &SchedulingPolicy,
    cost: &CostSpec,
    limits: &LimitParams,
    x0: &[f64],
    horizon: f64,
    reps: usize,
    base_seed: u64,
) -> Result<Replication> {
    assert!(reps >= 2, "need at least two replications for a standard error");
    let results: Vec<SimResult> = (0..reps)
        .into_par_iter()
        .map(|j| {
            let opts = RunOptions::new(horizon, base_seed.wrapping_add(j as u64));
            run(sys, policy, cost, limits, x0, &opts)
        })
        .collect::<Result<Vec<_>>>()?;

    let k = sys.k();
    let nf = reps as f64;
    let mean_cost = results.iter().map(|r| r.discounted_cost).sum::<f64>() / nf;
    let var = results
        .iter()
        .map(|r| (r.discounted_cost - mean_cost).powi(2))
        .sum::<f64>()
        / (nf - 1.0);
    let std_error = (var / nf).sqrt();

    let mut lemma1_gap_se = vec![0.0; k];
    for i in 0..k {
        let diffs: Vec<f64> = results
            .iter()
            .map(|r| r.abandon_observed[i] - r.abandon_predicted[i])
            .collect();
        let mean = diffs.iter().sum::<f64>() / nf;
        let v = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let se = (v / nf).sqrt();
        lemma1_gap_se[i] = if se > 0.0 {
            mean.abs() / se
        } else if mean == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
    }

    Ok(Replication {
        mean_cost,
        std_error,
        lemma1_gap_se,
        wc_violations: results.iter().map(|r| r.wc_violations).sum(),
        np_violations: results.iter().map(|r| r.np_violations).sum(),
        event_count: results.iter().map(|r| r.event_count).sum(),
        mean_policy_gap: results
            .iter()
            .map(|r| r.policy_gap_timeavg)
            .collect::<Option<Vec<_>>>()
            .map(|gaps| gaps.iter().sum::<f64>() / nf),
        reps,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{build_system, diffusion_coeffs, LimitParams};
    use crate::policy::{PolicyFn, SchedulingPolicy};
    use approx::assert_abs_diff_eq;

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
    fn pure_death_drains_all_services() {
        // theta = 0, arrivals silenced: the system is a pure death process
        let limits = LimitParams {
            lambda: vec![1.0],
            mu: vec![1.0],
            theta: vec![0.0],
            lambda_hat: vec![0.0],
            mu_hat: vec![0.0],
            c2u: vec![1.0],
            gamma: 1.0,
        }
        .validated()
        .unwrap();
        let mut sys = build_system(&limits, 10).unwrap();
        sys.lambda_n = vec![0.0];
        let policy = SchedulingPolicy::static_priority(vec![0]);
        let cost = CostSpec::linear_queue(vec![1.0]);
        // x = 0 -> psi = rho n = 10 in service, horizon far beyond 1/mu
        let r = run(
            &sys,
            &policy,
            &cost,
            &limits,
            &[0.0],
            &RunOptions::new(200.0, 7),
        )
        .unwrap();
        assert_eq!(r.event_count, 10);
        assert_eq!(r.wc_violations, 0);
        assert_eq!(r.np_violations, 0);
        assert_eq!(r.abandon_observed, vec![0.0]);
    }

    #[test]
    fn zero_cost_exactly_zero() {
        let limits = limits_k2();
        let sys = build_system(&limits, 20).unwrap();
        let policy = SchedulingPolicy::static_priority(vec![1, 0]);
        let cost = CostSpec::linear_queue(vec![0.0, 0.0]);
        let r = run(
            &sys,
            &policy,
            &cost,
            &limits,
            &[0.5, 0.5],
            &RunOptions::new(10.0, 3),
        )
        .unwrap();
        assert_eq!(r.discounted_cost, 0.0);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let limits = limits_k2();
        let sys = build_system(&limits, 25).unwrap();
        let h = PolicyFn::uniform(2);
        for policy in [
            SchedulingPolicy::pscp(h.clone()),
            SchedulingPolicy::nscp1(h.clone()),
            SchedulingPolicy::cmu(&[1.0, 1.0], &sys.mu_n),
        ] {
            let cost = CostSpec::power_queue(vec![1.0, 1.0], vec![2.0, 2.0]);
            let opts = RunOptions::new(8.0, 42);
            let a = run(&sys, &policy, &cost, &limits, &[0.5, 0.5], &opts).unwrap();
            let b = run(&sys, &policy, &cost, &limits, &[0.5, 0.5], &opts).unwrap();
            assert_eq!(a.discounted_cost.to_bits(), b.discounted_cost.to_bits());
            assert_eq!(a.event_count, b.event_count);
            assert_eq!(a.abandon_observed, b.abandon_observed);
            assert_eq!(a.abandon_predicted, b.abandon_predicted);
        }
    }

    #[test]
    fn audits_are_clean_for_shipped_policies() {
        let limits = limits_k2();
        let sys = build_system(&limits, 25).unwrap();
        let co = diffusion_coeffs(&limits);
        let _ = co;
        let h = PolicyFn::constant(vec![0.3, 0.7]);
        let cost = CostSpec::power_queue(vec![1.0, 1.0], vec![2.0, 2.0]);
        for policy in [
            SchedulingPolicy::pscp(h.clone()),
            SchedulingPolicy::nscp1(h.clone()),
            SchedulingPolicy::static_priority(vec![1, 0]),
            SchedulingPolicy::cmu(&[1.0, 2.0], &sys.mu_n),
        ] {
            let r = run(
                &sys,
                &policy,
                &cost,
                &limits,
                &[1.0, 1.0],
                &RunOptions::new(20.0, 11),
            )
            .unwrap();
            assert_eq!(r.wc_violations, 0, "policy {}", policy.id());
            if policy.declares_nonpreemptive {
                assert_eq!(r.np_violations, 0, "policy {}", policy.id());
            }
            assert!(r.event_count > 100);
        }
    }

    #[test]
    fn corrupted_policy_is_rejected() {
        let limits = limits_k2();
        let sys = build_system(&limits, 10).unwrap();
        let cost = CostSpec::linear_queue(vec![1.0, 1.0]);
        let policy = SchedulingPolicy::corrupted_for_tests();
        let err = run(
            &sys,
            &policy,
            &cost,
            &limits,
            &[0.0, 0.0],
            &RunOptions::new(5.0, 1),
        )
        .unwrap_err();
        assert!(matches!(err, Error::PolicyContractViolation { .. }));
    }

    #[test]
    fn replicate_aggregates_and_zero_theta_identity() {
        let limits = LimitParams {
            lambda: vec![0.5, 0.5],
            mu: vec![1.0, 1.0],
            theta: vec![0.0, 0.0],
            lambda_hat: vec![0.0, 0.0],
            mu_hat: vec![1.0, 1.0],
            c2u: vec![1.0, 1.0],
            gamma: 1.0,
        }
        .validated()
        .unwrap();
        let sys = build_system(&limits, 10).unwrap();
        let policy = SchedulingPolicy::static_priority(vec![1, 0]);
        let cost = CostSpec::linear_queue(vec![1.0, 1.0]);
        let rep = replicate(&sys, &policy, &cost, &limits, &[0.5, 0.5], 5.0, 4, 99).unwrap();
        // theta = 0: both abandonment sides are exactly zero
        assert_eq!(rep.lemma1_gap_se, vec![0.0, 0.0]);
        assert!(rep.mean_cost >= 0.0);
        assert!(rep.std_error >= 0.0);
        // identical seeds give identical costs bit for bit
        let again = replicate(&sys, &policy, &cost, &limits, &[0.5, 0.5], 5.0, 4, 99).unwrap();
        assert_eq!(rep.mean_cost.to_bits(), again.mean_cost.to_bits());
    }

    #[test]
    fn horizon_for_examples() {
        // gamma = 1, rel_tail = 1e-4, bounded pilot: T lands near ln(1e5) plus
        // the slack from the polynomial envelope
        let t = horizon_for(1.0, 1, 1.0, 1e-4, 5.0);
        assert!((11.0..=16.0).contains(&t), "T = {t}");
        // gamma doubled roughly halves the horizon
        let t2 = horizon_for(2.0, 1, 1.0, 1e-4, 0.1);
        let t1 = horizon_for(1.0, 1, 1.0, 1e-4, 0.1);
        assert!((t1 / t2 - 2.0).abs() <= 0.2, "ratio {}", t1 / t2);
        // rel_tail = 1: the pilot horizon floor binds
        let t = horizon_for(1.0, 1, 1.0, 1.0, 5.0);
        assert_abs_diff_eq!(t, 5.0);
    }

    #[test]
    fn tail_bound_reported() {
        let limits = limits_k2();
        let sys = build_system(&limits, 10).unwrap();
        let policy = SchedulingPolicy::static_priority(vec![1, 0]);
        let cost = CostSpec::linear_queue(vec![1.0, 1.0]);
        let r = run(
            &sys,
            &policy,
            &cost,
            &limits,
            &[1.0, 1.0],
            &RunOptions::new(12.0, 5),
        )
        .unwrap();
        assert!(r.tail_bound > 0.0);
        assert_abs_diff_eq!(
            r.tail_bound,
            tail_envelope(1.0, 1, r.max_ltilde, 12.0),
            epsilon = 1e-15
        );
    }
}
