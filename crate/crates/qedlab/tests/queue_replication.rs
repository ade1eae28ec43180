//! Replication-level statistics of the event simulator in the Erlang-A
//! setting used by the occupancy oracle.

use qedlab::cost::CostSpec;
use qedlab::params::{build_system, LimitParams};
use qedlab::policy::SchedulingPolicy;
use qedlab::queue::replicate;

#[test]
fn abandonment_identity_in_erlang_a_setting() {
    // n = 20 at traffic intensity 0.9 with theta = 0.5
    let limits = LimitParams {
        lambda: vec![1.0],
        mu: vec![1.0],
        theta: vec![0.5],
        lambda_hat: vec![-2.0 / 20f64.sqrt()],
        mu_hat: vec![0.0],
        c2u: vec![1.0],
        gamma: 1.0,
    }
    .validated()
    .unwrap();
    let sys = build_system(&limits, 20).unwrap();
    let policy = SchedulingPolicy::static_priority(vec![0]);
    let cost = CostSpec::linear_queue(vec![1.0]);
    let rep = replicate(&sys, &policy, &cost, &limits, &[0.5], 20.0, 200, 8_200).unwrap();
    assert!(
        rep.lemma1_gap_se[0] <= 3.0,
        "abandonment identity gap {:.2} SE",
        rep.lemma1_gap_se[0]
    );
    assert_eq!(rep.wc_violations, 0);
    assert_eq!(rep.np_violations, 0);
    assert!(rep.mean_cost > 0.0 && rep.std_error > 0.0);
}
