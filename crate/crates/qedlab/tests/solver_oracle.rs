//! Cross-validation of the k = 1 solve against the independent two-point ODE
//! oracle, for both drift discretizations.

use qedlab::cost::CostSpec;
use qedlab::hjb::{solve_hjb, solve_k1_reference, DriftScheme, GridSpec};
use qedlab::params::{diffusion_coeffs, LimitParams};

fn limits_k1() -> LimitParams {
    LimitParams {
        lambda: vec![1.0],
        mu: vec![1.0],
        theta: vec![0.5],
        lambda_hat: vec![0.0],
        mu_hat: vec![1.0],
        c2u: vec![1.0],
        gamma: 1.0,
    }
    .validated()
    .unwrap()
}

#[test]
fn k1_solve_matches_ode_oracle_within_budget() {
    let lim = limits_k1();
    let co = diffusion_coeffs(&lim);
    for cost in [
        CostSpec::linear_queue(vec![1.0]),
        CostSpec::power_queue(vec![1.0], vec![2.0]),
        CostSpec::abandonment(vec![1.0]),
        CostSpec::idling(),
        CostSpec::customers_in_system(vec![1.0]),
        CostSpec::weighted_sum(vec![
            CostSpec::power_queue(vec![0.5], vec![2.0]),
            CostSpec::idling(),
        ]),
    ] {
        for scheme in [DriftScheme::Upwind, DriftScheme::ExponentialFit] {
            let spec = GridSpec {
                scheme,
                ..GridSpec::new(6.0, 201)
            };
            let vg = solve_hjb(&spec, &cost, &co, &lim).unwrap();
            let oracle = solve_k1_reference(&cost, &co, &lim, &spec).unwrap();
            let mut max_err = 0.0f64;
            for idx in 0..vg.node_count() {
                let x = vg.node_coords(idx)[0];
                if x.abs() <= spec.box_halfwidth / 2.0 {
                    max_err = max_err.max((vg.values[idx] - oracle.value_at(x)).abs());
                }
            }
            assert!(
                max_err <= 5e-3,
                "cost {} scheme {scheme:?}: max |V - oracle| = {max_err:.3e} on |x| <= B/2",
                cost.cost_id()
            );
            let (max_res, _) = qedlab::hjb::residual_report(&vg, 1e-2);
            assert!(max_res <= 1e-2, "interior residual {max_res:.3e}");
        }
    }
}

#[test]
fn k1_growth_constant_is_modest() {
    let lim = limits_k1();
    let co = diffusion_coeffs(&lim);
    let cost = CostSpec::power_queue(vec![1.0], vec![2.0]);
    let spec = GridSpec::new(6.0, 201);
    let vg = solve_hjb(&spec, &cost, &co, &lim).unwrap();
    let c = vg.growth_constant(cost.growth_degree());
    assert!(c.is_finite() && c > 0.0 && c < 10.0, "growth constant {c}");
}
