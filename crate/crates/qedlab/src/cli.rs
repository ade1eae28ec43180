//! Experiment orchestration: the `solve`, `sweep`, `audit`, and `simulate`
//! commands behind the CLI binary. All numeric outputs land in append-safe
//! CSVs with fixed schemas; reruns with identical configs and seeds reproduce
//! every cell bit for bit.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::config::{build_policy, parse_policy_descriptor, ExperimentConfig, PolicyDescriptor};
use crate::cost::check_simplex;
use crate::diffusion::{simulate_cost, SdeRunConfig};
use crate::error::{Error, Result};
use crate::hjb::{extract_policy_fn, mollify_policy, residual_report, solve_hjb, ValueGrid};
use crate::params::{build_system, diffusion_coeffs};
use crate::policy::{theta_round, PolicyFn, SchedulingPolicy};
use crate::queue::{replicate, run, RunOptions};

pub const SWEEP_HEADER: &str = "experiment_id,n,policy_id,cost_id,x0,mean_cost,se,gap_to_V,wc_violations,np_violations,seed_range";
pub const SIM_HEADER: &str = "seed,n,policy_id,cost_id,discounted_cost,tail_bound,abandon_gap_max_se,wc_violations,np_violations,events";

/// Residual threshold reported by `solve`; first-order-in-space defects on
/// production grids sit well below this.
pub const RESIDUAL_REPORT_TOL: f64 = 1e-2;

#[derive(Parser)]
#[command(
    name = "qedlab",
    about = "Scheduling laboratory for multiclass many-server queues in the QED regime",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Solve the HJB equation and write the value grid CSV.
    Solve(CommonArgs),
    /// Run the n-sweep convergence experiment against the HJB value.
    Sweep(CommonArgs),
    /// Run the invariant audit matrix and exit nonzero on any failure.
    Audit(CommonArgs),
    /// Simulate one (n, policy) cell and append per-replication rows.
    Simulate(SimulateArgs),
}

#[derive(Args)]
pub struct CommonArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the replication count.
    #[arg(long)]
    pub reps: Option<usize>,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Server count n, or "diffusion" for the limiting-diffusion simulator.
    #[arg(long)]
    pub n: String,
    /// Policy descriptor (pscp, nscp1, nscp2\[:e\], prio:i,j,..., cmu, cmutheta).
    #[arg(long)]
    pub policy: String,
}

impl Error {
    /// Exit code 2 for configuration problems, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::BalanceViolation { .. }
            | Error::NonPositiveRate { .. }
            | Error::NegativeAbandonment { .. }
            | Error::DimensionMismatch { .. }
            | Error::InvalidCostSpec(_)
            | Error::InvalidGrid(_)
            | Error::InvalidConfig(_)
            | Error::ConfigParse(_)
            | Error::Io(_) => 2,
            _ => 1,
        }
    }
}

/// Parses argv and dispatches; returns the process exit code.
pub fn run_cli() -> i32 {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(a) => with_config(a, |cfg, a| {
            cmd_solve(&cfg, a.out.as_deref()).map(|_| 0)
        }),
        Command::Sweep(a) => with_config(a, |cfg, a| {
            cmd_sweep(&cfg, a.out.as_deref()).map(|_| 0)
        }),
        Command::Audit(a) => with_config(a, |cfg, _| {
            cmd_audit(&cfg).map(|report| if report.all_passed() { 0 } else { 1 })
        }),
        Command::Simulate(a) => with_config(&a.common, |cfg, common| {
            cmd_simulate(&cfg, &a.n, &a.policy, common.out.as_deref()).map(|_| 0)
        }),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn with_config(
    args: &CommonArgs,
    f: impl FnOnce(ExperimentConfig, &CommonArgs) -> Result<i32>,
) -> Result<i32> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.experiment.base_seed = seed;
    }
    if let Some(reps) = args.reps {
        cfg.experiment.reps = reps;
        cfg.validate()?;
    }
    f(cfg, args)
}

fn format_x0(x0: &[f64]) -> String {
    let parts: Vec<String> = x0.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(";"))
}

/// Appends rows to a CSV, creating it with `header` or verifying that an
/// existing file carries the identical header.
pub fn append_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    use std::io::BufRead;
    if path.exists() {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let first = f.lines().next().transpose()?.unwrap_or_default();
        if first != header {
            return Err(Error::Other(format!(
                "refusing to append to {}: header mismatch",
                path.display()
            )));
        }
        let mut f = std::fs::OpenOptions::new().append(true).open(path)?;
        for r in rows {
            writeln!(f, "{r}")?;
        }
    } else {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "{header}")?;
        for r in rows {
            writeln!(f, "{r}")?;
        }
    }
    Ok(())
}

pub struct SolveSummary {
    pub grid_path: PathBuf,
    pub iterations: usize,
    pub max_interior_residual: f64,
    pub residual_fraction_ok: f64,
    /// (probe point, value) at x0, the origin, and a negative-total point.
    pub probes: Vec<(Vec<f64>, f64)>,
}

/// Solves the configured HJB problem, writes the grid CSV, prints a summary.
pub fn cmd_solve(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<SolveSummary> {
    let coeffs = diffusion_coeffs(&cfg.limits);
    let vg = solve_hjb(&cfg.grid, &cfg.cost, &coeffs, &cfg.limits)?;
    let (max_res, frac) = residual_report(&vg, RESIDUAL_REPORT_TOL);
    let grid_path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("grid.csv"));
    vg.save_csv(&grid_path)?;

    let x0 = cfg.experiment.x0.clone();
    let origin = vec![0.0; cfg.limits.k()];
    let negative: Vec<f64> = x0.iter().map(|v| -v.abs() - 0.5).collect();
    let probes: Vec<(Vec<f64>, f64)> = [x0, origin, negative]
        .into_iter()
        .map(|p| {
            let v = vg.value_at(&p);
            (p, v)
        })
        .collect();

    println!(
        "solve: {} policy iterations, max interior residual {max_res:.3e} ({:.1}% of nodes below {RESIDUAL_REPORT_TOL:.0e}), growth constant {:.4} at degree {}, grid -> {}",
        vg.iterations,
        frac * 100.0,
        vg.growth_constant(cfg.cost.growth_degree()),
        cfg.cost.growth_degree(),
        grid_path.display()
    );
    for (p, v) in &probes {
        println!("solve: V({}) = {v:.6}", format_x0(p));
    }
    Ok(SolveSummary {
        grid_path,
        iterations: vg.iterations,
        max_interior_residual: max_res,
        residual_fraction_ok: frac,
        probes,
    })
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub n_label: String,
    pub policy_id: String,
    pub mean: f64,
    pub se: f64,
    pub gap_to_v: f64,
    pub wc_violations: u64,
    pub np_violations: u64,
    pub seed_range: String,
    pub policy_gap_timeavg: Option<f64>,
}

pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub v_at_x0: f64,
    pub horizon: f64,
    pub grid: Option<ValueGrid>,
}

/// Pilot horizon floor used before the tail rule takes over.
fn pilot_horizon(gamma: f64) -> f64 {
    5.0 / gamma
}

/// Derives the simulation horizon from a one-replication pilot run and the
/// configured tail target.
pub fn derive_horizon(
    cfg: &ExperimentConfig,
    policy: &SchedulingPolicy,
    n: u64,
) -> Result<f64> {
    let sys = build_system(&cfg.limits, n)?;
    let pilot = pilot_horizon(cfg.limits.gamma);
    let opts = RunOptions::new(pilot, cfg.experiment.base_seed);
    let r = run(&sys, policy, &cfg.cost, &cfg.limits, &cfg.experiment.x0, &opts)?;
    Ok(crate::queue::horizon_for(
        cfg.limits.gamma,
        cfg.cost.growth_degree(),
        r.max_ltilde,
        cfg.experiment.rel_tail,
        pilot,
    ))
}

/// Runs the full n-sweep: every configured policy at every n, plus the
/// diffusion-simulator row and the grid value row, all against V(x0).
pub fn cmd_sweep(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<SweepOutput> {
    let coeffs = diffusion_coeffs(&cfg.limits);
    let out_path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.experiment.output_path));
    if cfg.experiment.sweep_n.is_empty() || cfg.experiment.policies.is_empty() {
        append_csv(&out_path, SWEEP_HEADER, &[])?;
        println!("sweep: nothing to run, header-only CSV -> {}", out_path.display());
        return Ok(SweepOutput {
            rows: Vec::new(),
            v_at_x0: f64::NAN,
            horizon: 0.0,
            grid: None,
        });
    }
    let descriptors: Vec<PolicyDescriptor> = cfg
        .experiment
        .policies
        .iter()
        .map(|d| parse_policy_descriptor(d, cfg.limits.k()))
        .collect::<Result<_>>()?;
    let needs_h = descriptors.iter().any(|d| d.needs_markov_policy());

    println!("sweep: solving HJB on [-{0},{0}]^{1}...", cfg.grid.box_halfwidth, cfg.limits.k());
    let vg = solve_hjb(&cfg.grid, &cfg.cost, &coeffs, &cfg.limits)?;
    let v0 = vg.value_at(&cfg.experiment.x0);
    let h = needs_h.then(|| extract_policy_fn(&vg));
    println!("sweep: V(x0) = {v0:.6} after {} iterations", vg.iterations);

    let mut rows: Vec<SweepRow> = Vec::new();
    let x0 = &cfg.experiment.x0;
    let reps = cfg.experiment.reps;
    let base_seed = cfg.experiment.base_seed;

    // horizon from a pilot at the largest n with the first policy
    let horizon = {
        let n_max = *cfg.experiment.sweep_n.iter().max().unwrap_or(&100);
        let sys = build_system(&cfg.limits, n_max)?;
        let pilot_policy = build_policy(&descriptors[0], h.as_ref(), &cfg.cost, &sys)?;
        derive_horizon(cfg, &pilot_policy, n_max)?
    };
    println!("sweep: horizon T = {horizon:.3} (rel_tail {})", cfg.experiment.rel_tail);

    // the raw nonpreemptive rule is only backed by theory when the extracted
    // policy is smooth, i.e. for the uniformly convex separable costs
    if descriptors.contains(&PolicyDescriptor::Nscp1) && !cfg.cost.smooth_policy_expected() {
        println!(
            "sweep: note: nscp1 runs with cost {} are outside the smooth-policy family; their convergence is reported, not asserted",
            cfg.cost.cost_id()
        );
    }

    for &n in &cfg.experiment.sweep_n {
        let sys = build_system(&cfg.limits, n)?;
        for desc in &descriptors {
            let policy = build_policy(desc, h.as_ref(), &cfg.cost, &sys)?;
            let rep = replicate(&sys, &policy, &cfg.cost, &cfg.limits, x0, horizon, reps, base_seed)?;
            let row = SweepRow {
                n_label: n.to_string(),
                policy_id: policy.id().to_string(),
                mean: rep.mean_cost,
                se: rep.std_error,
                gap_to_v: rep.mean_cost - v0,
                wc_violations: rep.wc_violations,
                np_violations: rep.np_violations,
                seed_range: format!("{base_seed}..{}", base_seed + reps as u64 - 1),
                policy_gap_timeavg: rep.mean_policy_gap,
            };
            println!(
                "sweep: n={n} policy={} mean={:.6} se={:.6} gap={:+.6}{}",
                row.policy_id,
                row.mean,
                row.se,
                row.gap_to_v,
                row.policy_gap_timeavg
                    .map(|g| format!(" u-gap={g:.4}"))
                    .unwrap_or_default()
            );
            rows.push(row);
        }
    }

    // diffusion row under the extracted policy
    if let Some(hjb_policy) = &h {
        let sde_cfg = SdeRunConfig {
            x0: x0.clone(),
            dt: cfg.sde.dt,
            horizon: if cfg.sde.horizon > 0.0 { cfg.sde.horizon } else { horizon },
            reps: cfg.sde.reps,
            seed: base_seed,
        };
        let est = simulate_cost(&sde_cfg, hjb_policy, &cfg.cost, &coeffs, &cfg.limits)?;
        println!(
            "sweep: n=diffusion policy=hjb mean={:.6} se={:.6} gap={:+.6}",
            est.mean,
            est.se,
            est.mean - v0
        );
        rows.push(SweepRow {
            n_label: "diffusion".into(),
            policy_id: "hjb".into(),
            mean: est.mean,
            se: est.se,
            gap_to_v: est.mean - v0,
            wc_violations: 0,
            np_violations: 0,
            seed_range: format!("{base_seed}..{}", base_seed + cfg.sde.reps as u64 - 1),
            policy_gap_timeavg: None,
        });
    }
    // the grid value itself
    rows.push(SweepRow {
        n_label: "grid".into(),
        policy_id: "hjb".into(),
        mean: v0,
        se: 0.0,
        gap_to_v: 0.0,
        wc_violations: 0,
        np_violations: 0,
        seed_range: "-".into(),
        policy_gap_timeavg: None,
    });

    let experiment_id = cfg.experiment_id();
    let cost_id = cfg.cost.cost_id();
    let x0s = format_x0(x0);
    let csv_rows: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{experiment_id},{},{},{cost_id},{x0s},{},{},{},{},{},{}",
                r.n_label,
                r.policy_id,
                r.mean,
                r.se,
                r.gap_to_v,
                r.wc_violations,
                r.np_violations,
                r.seed_range
            )
        })
        .collect();
    append_csv(&out_path, SWEEP_HEADER, &csv_rows)?;
    println!("sweep: {} rows -> {}", csv_rows.len(), out_path.display());

    Ok(SweepOutput {
        rows,
        v_at_x0: v0,
        horizon,
        grid: Some(vg),
    })
}

/// Simulates one (n, policy) cell and appends per-replication rows;
/// `n = "diffusion"` drives the limiting-diffusion simulator instead of the
/// queueing system.
pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    n_label: &str,
    policy_desc: &str,
    out: Option<&Path>,
) -> Result<()> {
    let desc = parse_policy_descriptor(policy_desc, cfg.limits.k())?;
    let coeffs = diffusion_coeffs(&cfg.limits);
    let h = if desc.needs_markov_policy() || n_label == "diffusion" {
        let vg = solve_hjb(&cfg.grid, &cfg.cost, &coeffs, &cfg.limits)?;
        Some(extract_policy_fn(&vg))
    } else {
        None
    };
    let out_path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.experiment.output_path));
    if n_label == "diffusion" {
        return simulate_diffusion_rows(cfg, &desc, h.as_ref(), &coeffs, &out_path);
    }
    let n: u64 = n_label
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("bad n {n_label:?}: {e}")))?;
    let sys = build_system(&cfg.limits, n)?;
    let policy = build_policy(&desc, h.as_ref(), &cfg.cost, &sys)?;
    let horizon = derive_horizon(cfg, &policy, n)?;
    let rep = replicate(
        &sys,
        &policy,
        &cfg.cost,
        &cfg.limits,
        &cfg.experiment.x0,
        horizon,
        cfg.experiment.reps,
        cfg.experiment.base_seed,
    )?;
    let gap_se = rep
        .lemma1_gap_se
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    let cost_id = cfg.cost.cost_id();
    let rows: Vec<String> = rep
        .results
        .iter()
        .map(|r| {
            format!(
                "{},{n},{},{cost_id},{},{},{gap_se},{},{},{}",
                r.seed,
                policy.id(),
                r.discounted_cost,
                r.tail_bound,
                r.wc_violations,
                r.np_violations,
                r.event_count
            )
        })
        .collect();
    append_csv(&out_path, SIM_HEADER, &rows)?;
    println!(
        "simulate: n={n} policy={} T={horizon:.3} mean={:.6} se={:.6} lemma1_max_se={gap_se:.3} -> {}",
        policy.id(),
        rep.mean_cost,
        rep.std_error,
        out_path.display()
    );
    Ok(())
}

/// Per-replication diffusion rows in the queue-simulator CSV schema, with
/// n = "diffusion" and the audit columns fixed at zero.
fn simulate_diffusion_rows(
    cfg: &ExperimentConfig,
    desc: &PolicyDescriptor,
    h: Option<&PolicyFn>,
    coeffs: &crate::params::DiffusionCoeffs,
    out_path: &Path,
) -> Result<()> {
    let policy = match desc {
        PolicyDescriptor::Pscp | PolicyDescriptor::Nscp1 => h.unwrap().clone(),
        PolicyDescriptor::Nscp2 { .. } => {
            // the diffusion has no system size; mollify at the config's
            // largest sweep entry so the rule matches the finest prelimit
            let n = cfg.experiment.sweep_n.iter().max().copied().unwrap_or(100);
            mollify_policy(h.unwrap(), crate::policy::SchedulingPolicy::default_eps_rule(n))
        }
        _ => {
            return Err(Error::InvalidConfig(format!(
                "policy {desc:?} is a queue routing rule; the diffusion needs a Markov policy (pscp, nscp1, nscp2)"
            )))
        }
    };
    let horizon = if cfg.sde.horizon > 0.0 {
        cfg.sde.horizon
    } else {
        crate::queue::horizon_for(
            cfg.limits.gamma,
            cfg.cost.growth_degree(),
            1.0,
            cfg.experiment.rel_tail,
            pilot_horizon(cfg.limits.gamma),
        )
    };
    let base_seed = cfg.experiment.base_seed;
    let reps = cfg.experiment.reps;
    let cost_id = cfg.cost.cost_id();
    let mut rows = Vec::with_capacity(reps);
    let mut sum = 0.0;
    for j in 0..reps as u64 {
        let one = SdeRunConfig {
            x0: cfg.experiment.x0.clone(),
            dt: cfg.sde.dt,
            horizon,
            reps: 1,
            seed: base_seed.wrapping_add(j),
        };
        let est = simulate_cost(&one, &policy, &cfg.cost, coeffs, &cfg.limits)?;
        sum += est.mean;
        let steps = (horizon / cfg.sde.dt).round() as u64;
        rows.push(format!(
            "{},diffusion,{},{cost_id},{},{},0,0,0,{steps}",
            base_seed.wrapping_add(j),
            policy_label(desc),
            est.mean,
            est.tail_bound
        ));
    }
    append_csv(out_path, SIM_HEADER, &rows)?;
    println!(
        "simulate: n=diffusion policy={} T={horizon:.3} mean={:.6} over {reps} paths -> {}",
        policy_label(desc),
        sum / reps as f64,
        out_path.display()
    );
    Ok(())
}

fn policy_label(desc: &PolicyDescriptor) -> &'static str {
    match desc {
        PolicyDescriptor::Pscp => "pscp",
        PolicyDescriptor::Nscp1 => "nscp1",
        PolicyDescriptor::Nscp2 { .. } => "nscp2",
        PolicyDescriptor::StaticPriority(_) => "prio",
        PolicyDescriptor::CMu => "cmu",
        PolicyDescriptor::CMuTheta => "cmutheta",
    }
}

pub struct AuditReport {
    pub checks: Vec<(String, bool, String)>,
}

impl AuditReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }
}

/// Runs the invariant matrix: rounding-map properties, simplex membership,
/// u-independence below the interface, the per-event audits, the abandonment
/// identity, determinism replay, and the contract-violation negative test.
pub fn cmd_audit(cfg: &ExperimentConfig) -> Result<AuditReport> {
    let mut checks: Vec<(String, bool, String)> = Vec::new();
    let mut push = |name: &str, pass: bool, detail: String| {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        checks.push((name.into(), pass, detail));
    };
    let k = cfg.limits.k();
    let coeffs = diffusion_coeffs(&cfg.limits);
    let base_seed = cfg.experiment.base_seed;
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed ^ 0x000a_0d17);

    // rounding map: sum preserved, integral, error <= 2k over 1e4 fuzz cases
    {
        let mut failures = 0usize;
        for _ in 0..10_000 {
            let total: i64 = rng.random_range(0..500);
            let mut y: Vec<f64> = (0..k).map(|_| rng.random_range(0.0f64..1.0)).collect();
            let s: f64 = y.iter().sum();
            for v in y.iter_mut() {
                *v = if s > 0.0 { *v / s * total as f64 } else { 0.0 };
            }
            if s == 0.0 {
                y[0] = total as f64;
            }
            match theta_round(&y) {
                Ok(z) => {
                    let zt: i64 = z.iter().sum();
                    let err: f64 = z
                        .iter()
                        .zip(&y)
                        .map(|(&zi, yi)| (zi as f64 - yi).abs())
                        .sum();
                    if zt != total || z.iter().any(|&zi| zi < 0) || err > 2.0 * k as f64 {
                        failures += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
        push(
            "theta_round",
            failures == 0,
            format!("{failures} failures in 10000 fuzz cases"),
        );
    }

    // solved policy outputs stay on the simplex
    let vg = solve_hjb(&cfg.grid, &cfg.cost, &coeffs, &cfg.limits)?;
    let h = extract_policy_fn(&vg);
    {
        let he = mollify_policy(&h, 0.1);
        let b = cfg.grid.box_halfwidth;
        let mut bad = 0usize;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..k).map(|_| rng.random_range(-b..b)).collect();
            if check_simplex(&h.eval(&x)).is_err() || check_simplex(&he.eval(&x)).is_err() {
                bad += 1;
            }
        }
        push("simplex_membership", bad == 0, format!("{bad} bad outputs in 1000 samples"));
    }

    // cost independent of u on {1.x <= 0}
    {
        let mut bad = 0usize;
        for _ in 0..100 {
            let mut x: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let total: f64 = x.iter().sum();
            if total > 0.0 {
                let shift = total / k as f64 + rng.random_range(0.0..1.0);
                for v in x.iter_mut() {
                    *v -= shift;
                }
            }
            let mut base: Option<f64> = None;
            for _ in 0..100 {
                let mut u: Vec<f64> = (0..k).map(|_| rng.random_range(0.0f64..1.0)).collect();
                let s: f64 = u.iter().sum();
                for v in u.iter_mut() {
                    *v /= s;
                }
                let l = cfg.cost.eval_l(&cfg.limits, &x, &u)?;
                match base {
                    None => base = Some(l),
                    Some(b0) if l != b0 => bad += 1,
                    _ => {}
                }
            }
        }
        push("u_independence_below_interface", bad == 0, format!("{bad} mismatches"));
    }

    // per-event audits across the shipped policies at a moderate n
    let audit_n = cfg.experiment.sweep_n.get(1).or(cfg.experiment.sweep_n.first()).copied().unwrap_or(100);
    let sys = build_system(&cfg.limits, audit_n)?;
    let audit_reps = cfg.experiment.reps.clamp(2, 50);
    let horizon = pilot_horizon(cfg.limits.gamma);
    {
        let mut wc = 0u64;
        let mut np = 0u64;
        let mut sim_err: Option<String> = None;
        for desc_s in &cfg.experiment.policies {
            let desc = parse_policy_descriptor(desc_s, k)?;
            let policy = build_policy(&desc, Some(&h), &cfg.cost, &sys)?;
            match replicate(
                &sys,
                &policy,
                &cfg.cost,
                &cfg.limits,
                &cfg.experiment.x0,
                horizon,
                audit_reps,
                base_seed,
            ) {
                Ok(rep) => {
                    wc += rep.wc_violations;
                    if policy.declares_nonpreemptive {
                        np += rep.np_violations;
                    }
                }
                Err(e) => sim_err = Some(format!("{desc_s}: {e}")),
            }
        }
        push(
            "flow_balance_and_capacity",
            sim_err.is_none(),
            sim_err.unwrap_or_else(|| format!("all events consistent at n={audit_n}")),
        );
        push("work_conservation", wc == 0, format!("{wc} violations"));
        push("nonpreemption", np == 0, format!("{np} violations"));
    }

    // abandonment identity across replications
    {
        let policy = SchedulingPolicy::static_priority((0..k).rev().collect());
        let rep = replicate(
            &sys,
            &policy,
            &cfg.cost,
            &cfg.limits,
            &cfg.experiment.x0,
            horizon,
            cfg.experiment.reps,
            base_seed,
        )?;
        let worst = rep.lemma1_gap_se.iter().cloned().fold(0.0f64, f64::max);
        push(
            "abandonment_identity",
            worst <= 3.0,
            format!("max gap {worst:.2} SE over {} reps", cfg.experiment.reps),
        );
    }

    // bit-exact seed replay
    {
        let policy = SchedulingPolicy::static_priority((0..k).rev().collect());
        let opts = RunOptions::new(horizon, base_seed);
        let a = run(&sys, &policy, &cfg.cost, &cfg.limits, &cfg.experiment.x0, &opts)?;
        let b = run(&sys, &policy, &cfg.cost, &cfg.limits, &cfg.experiment.x0, &opts)?;
        let same = a.discounted_cost.to_bits() == b.discounted_cost.to_bits()
            && a.event_count == b.event_count;
        push(
            "seed_replay",
            same,
            format!("cost {} replayed bit-exact: {same}", a.discounted_cost),
        );
    }

    // the simulator must reject a contract-breaking policy
    {
        let policy = SchedulingPolicy::corrupted_for_tests();
        let opts = RunOptions::new(1.0, base_seed);
        let rejected = matches!(
            run(&sys, &policy, &cfg.cost, &cfg.limits, &cfg.experiment.x0, &opts),
            Err(Error::PolicyContractViolation { .. })
        );
        push(
            "contract_violation_detected",
            rejected,
            "corrupted policy rejected with PolicyContractViolation".into(),
        );
    }

    Ok(AuditReport { checks })
}
