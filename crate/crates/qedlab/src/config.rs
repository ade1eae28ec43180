//! Experiment configuration: a TOML file with the limiting parameters, cost,
//! grid, and experiment plan.

use serde::{Deserialize, Serialize};

use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::hjb::GridSpec;
use crate::params::LimitParams;
use crate::policy::{PolicyFn, SchedulingPolicy};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub limits: LimitParams,
    pub cost: CostSpec,
    pub grid: GridSpec,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub sde: SdeSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSection {
    /// Diffusion-scale initial state; also the probe point for V(x).
    pub x0: Vec<f64>,
    pub sweep_n: Vec<u64>,
    /// Policy descriptors: pscp, nscp1, nscp2\[:exponent\], prio:i,j,... (1-based,
    /// descending priority), cmu, cmutheta.
    pub policies: Vec<String>,
    pub reps: usize,
    pub base_seed: u64,
    #[serde(default = "default_rel_tail")]
    pub rel_tail: f64,
    #[serde(default = "default_output_path")]
    pub output_path: String,
}

fn default_rel_tail() -> f64 {
    1e-3
}
fn default_output_path() -> String {
    "results.csv".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdeSection {
    #[serde(default = "default_sde_dt")]
    pub dt: f64,
    /// 0 means: derive from the discount rate and tail target.
    #[serde(default)]
    pub horizon: f64,
    #[serde(default = "default_sde_reps")]
    pub reps: usize,
}

fn default_sde_dt() -> f64 {
    1e-3
}
fn default_sde_reps() -> usize {
    4000
}

impl Default for SdeSection {
    fn default() -> Self {
        SdeSection {
            dt: default_sde_dt(),
            horizon: 0.0,
            reps: default_sde_reps(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.limits.clone().validated()?;
        let k = self.limits.k();
        self.cost.validate(k)?;
        if self.experiment.x0.len() != k {
            return Err(Error::DimensionMismatch {
                what: "x0",
                got: self.experiment.x0.len(),
                expected: k,
            });
        }
        if !self.experiment.sweep_n.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "sweep_n must be strictly increasing".into(),
            ));
        }
        if self.experiment.reps < 2 {
            return Err(Error::InvalidConfig(
                "reps must be at least 2 for standard errors".into(),
            ));
        }
        if !(self.experiment.rel_tail > 0.0 && self.experiment.rel_tail <= 1.0) {
            return Err(Error::InvalidConfig("rel_tail must lie in (0, 1]".into()));
        }
        for desc in &self.experiment.policies {
            parse_policy_descriptor(desc, k)?;
        }
        Ok(())
    }

    /// Stable identifier derived from the configuration content.
    pub fn experiment_id(&self) -> String {
        let text = toml::to_string(self).unwrap_or_default();
        format!("{:016x}", fnv1a64(text.as_bytes()))
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyDescriptor {
    Pscp,
    Nscp1,
    /// Mollified nonpreemptive rule; eps(n) = n^{-exponent}.
    Nscp2 { exponent: f64 },
    StaticPriority(Vec<usize>),
    CMu,
    CMuTheta,
}

impl PolicyDescriptor {
    pub fn needs_markov_policy(&self) -> bool {
        matches!(
            self,
            PolicyDescriptor::Pscp | PolicyDescriptor::Nscp1 | PolicyDescriptor::Nscp2 { .. }
        )
    }
}

/// Parses a policy descriptor string; priorities are 1-based in configs.
pub fn parse_policy_descriptor(desc: &str, k: usize) -> Result<PolicyDescriptor> {
    let bad = |msg: String| Error::InvalidConfig(msg);
    if desc == "pscp" {
        return Ok(PolicyDescriptor::Pscp);
    }
    if desc == "nscp1" {
        return Ok(PolicyDescriptor::Nscp1);
    }
    if desc == "nscp2" {
        return Ok(PolicyDescriptor::Nscp2 { exponent: 0.25 });
    }
    if let Some(rest) = desc.strip_prefix("nscp2:") {
        let exponent: f64 = rest
            .parse()
            .map_err(|e| bad(format!("bad nscp2 exponent {rest:?}: {e}")))?;
        if !(exponent > 0.0) {
            return Err(bad("nscp2 exponent must be positive".into()));
        }
        return Ok(PolicyDescriptor::Nscp2 { exponent });
    }
    if let Some(rest) = desc.strip_prefix("prio:") {
        let mut order = Vec::new();
        for tok in rest.split(',') {
            let c: usize = tok
                .trim()
                .parse()
                .map_err(|e| bad(format!("bad priority class {tok:?}: {e}")))?;
            if c == 0 || c > k {
                return Err(bad(format!("priority class {c} outside 1..={k}")));
            }
            order.push(c - 1);
        }
        let mut seen = vec![false; k];
        for &c in &order {
            if seen[c] {
                return Err(bad(format!("duplicate class {} in priority order", c + 1)));
            }
            seen[c] = true;
        }
        if order.len() != k {
            return Err(bad(format!(
                "priority order must list all {k} classes, got {}",
                order.len()
            )));
        }
        return Ok(PolicyDescriptor::StaticPriority(order));
    }
    if desc == "cmu" {
        return Ok(PolicyDescriptor::CMu);
    }
    if desc == "cmutheta" {
        return Ok(PolicyDescriptor::CMuTheta);
    }
    Err(bad(format!("unknown policy descriptor {desc:?}")))
}

/// Per-class weight vector for the c-mu style baselines: the first-level cost
/// coefficients when the cost kind carries them, otherwise ones.
fn baseline_coeffs(cost: &CostSpec, k: usize) -> Vec<f64> {
    match cost {
        CostSpec::PowerQueue { coeffs, .. }
        | CostSpec::LinearQueue { coeffs }
        | CostSpec::Abandonment { coeffs }
        | CostSpec::CustomersInSystem { coeffs, .. } => coeffs.clone(),
        CostSpec::Idling => vec![1.0; k],
        CostSpec::WeightedSum { terms } => terms
            .first()
            .map(|t| baseline_coeffs(t, k))
            .unwrap_or_else(|| vec![1.0; k]),
    }
}

/// Instantiates a policy for one system size; `h` must be provided for the
/// descriptors driven by the Markov policy.
pub fn build_policy(
    desc: &PolicyDescriptor,
    h: Option<&PolicyFn>,
    cost: &CostSpec,
    sys: &crate::params::SystemParams,
) -> Result<SchedulingPolicy> {
    let need_h = || -> Result<&PolicyFn> {
        h.ok_or_else(|| Error::InvalidConfig("policy requires a solved Markov policy".into()))
    };
    let k = sys.k();
    match desc {
        PolicyDescriptor::Pscp => Ok(SchedulingPolicy::pscp(need_h()?.clone())),
        PolicyDescriptor::Nscp1 => Ok(SchedulingPolicy::nscp1(need_h()?.clone())),
        PolicyDescriptor::Nscp2 { exponent } => {
            let e = *exponent;
            SchedulingPolicy::nscp2(need_h()?, sys.n, |n| (n as f64).powf(-e), cost)
        }
        PolicyDescriptor::StaticPriority(order) => {
            Ok(SchedulingPolicy::static_priority(order.clone()))
        }
        PolicyDescriptor::CMu => Ok(SchedulingPolicy::cmu(&baseline_coeffs(cost, k), &sys.mu_n)),
        PolicyDescriptor::CMuTheta => {
            SchedulingPolicy::cmutheta(&baseline_coeffs(cost, k), &sys.mu_n, &sys.theta_n)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANONICAL: &str = r#"
[limits]
lambda = [0.5, 0.5]
mu = [1.0, 1.0]
theta = [0.5, 2.0]
lambda_hat = [0.0, 0.0]
mu_hat = [1.0, 1.0]
c2u = [1.0, 1.0]
gamma = 1.0

[cost]
kind = "power_queue"
coeffs = [1.0, 1.0]
powers = [2.0, 2.0]

[grid]
box_halfwidth = 5.0
points_per_axis = 81

[experiment]
x0 = [0.5, 0.5]
sweep_n = [25, 100, 400]
policies = ["pscp", "nscp2", "prio:2,1", "cmu"]
reps = 200
base_seed = 20240801
"#;

    #[test]
    fn parses_canonical() {
        let cfg = ExperimentConfig::from_toml(CANONICAL).unwrap();
        assert_eq!(cfg.limits.k(), 2);
        assert_eq!(cfg.grid.points_per_axis, 81);
        assert_eq!(cfg.experiment.sweep_n, vec![25, 100, 400]);
        assert_eq!(cfg.sde.dt, 1e-3);
        assert!(!cfg.experiment_id().is_empty());
    }

    #[test]
    fn rejects_unbalanced_limits() {
        let broken = CANONICAL.replace("lambda = [0.5, 0.5]", "lambda = [0.5, 0.6]");
        let err = ExperimentConfig::from_toml(&broken).unwrap_err();
        assert!(matches!(err, Error::BalanceViolation { .. }));
    }

    #[test]
    fn rejects_bad_sweep_and_reps() {
        let broken = CANONICAL.replace("sweep_n = [25, 100, 400]", "sweep_n = [100, 25]");
        assert!(ExperimentConfig::from_toml(&broken).is_err());
        let broken = CANONICAL.replace("reps = 200", "reps = 1");
        assert!(ExperimentConfig::from_toml(&broken).is_err());
    }

    #[test]
    fn policy_descriptors() {
        assert_eq!(
            parse_policy_descriptor("prio:2,1", 2).unwrap(),
            PolicyDescriptor::StaticPriority(vec![1, 0])
        );
        assert!(parse_policy_descriptor("prio:1", 2).is_err());
        assert!(parse_policy_descriptor("prio:3,1", 2).is_err());
        assert_eq!(
            parse_policy_descriptor("nscp2:0.5", 2).unwrap(),
            PolicyDescriptor::Nscp2 { exponent: 0.5 }
        );
        assert!(parse_policy_descriptor("mystery", 2).is_err());
        assert!(parse_policy_descriptor("nscp2", 2)
            .unwrap()
            .needs_markov_policy());
        assert!(!parse_policy_descriptor("cmu", 2)
            .unwrap()
            .needs_markov_policy());
    }
}
