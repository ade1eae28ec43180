//! HJB equation solver on a truncated box.
//!
//! Solves
//!
//! ```text
//! (1/2) sum_i r_i^2 f_{x_i x_i} + H(x, Df) - gamma f = 0,
//! H(x, p) = inf_{u in S^k} [ b(x, u) . p + L(x, u) ],
//! b(x, u) = ell + (mu - theta)(1.x)^+ u - mu x,
//! ```
//!
//! by policy iteration: the policy-evaluation step discretizes the linear
//! PDE with a monotone stencil (central second differences, drift weighted
//! toward the upwind neighbor) and solves it with a banded LU; the policy
//! improvement step takes a pointwise argmin of the discrete operator over a
//! finite simplex mesh with a continuous polish for strictly convex costs.
//!
//! Boundary closure on the truncated box: zero second normal derivative at
//! faces plus one-sided inward drift differences (an outward drift component
//! at a face is dropped so the stencil stays monotone). The effect of the
//! closure is measured by the domain-doubling check rather than assumed.

mod grid;
mod linsolve;
pub mod oracle;

pub use oracle::solve_k1_reference;

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::params::{DiffusionCoeffs, LimitParams};
use crate::policy::PolicyFn;
use crate::simplex::{project_to_simplex, simplex_mesh};
use grid::Grid;
use linsolve::BandedMatrix;

/// Drift discretization. Both variants weight the first-order term toward the
/// upwind neighbor and yield an M-matrix; the exponentially fitted variant
/// interpolates smoothly between central weights at small cell Peclet numbers
/// and one-sided weights at large ones, which keeps the scheme second-order
/// where the drift is moderate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DriftScheme {
    /// One-sided differences chosen by the sign of the drift.
    Upwind,
    /// Exponentially fitted (Bernoulli-weighted) differences.
    #[default]
    ExponentialFit,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    /// Domain is the box [-B, B]^k.
    pub box_halfwidth: f64,
    /// Nodes per axis (M >= 16).
    pub points_per_axis: usize,
    /// Subdivisions per simplex edge for the argmin mesh.
    #[serde(default = "default_simplex_resolution")]
    pub simplex_resolution: usize,
    /// Stop when the sup-norm value improvement falls below this.
    #[serde(default = "default_tol_residual")]
    pub tol_residual: f64,
    #[serde(default = "default_max_policy_iters")]
    pub max_policy_iters: usize,
    #[serde(default)]
    pub scheme: DriftScheme,
}

fn default_simplex_resolution() -> usize {
    64
}
fn default_tol_residual() -> f64 {
    1e-6
}
fn default_max_policy_iters() -> usize {
    100
}

impl GridSpec {
    pub fn new(box_halfwidth: f64, points_per_axis: usize) -> Self {
        GridSpec {
            box_halfwidth,
            points_per_axis,
            simplex_resolution: default_simplex_resolution(),
            tol_residual: default_tol_residual(),
            max_policy_iters: default_max_policy_iters(),
            scheme: DriftScheme::default(),
        }
    }

    pub fn delta(&self) -> f64 {
        2.0 * self.box_halfwidth / (self.points_per_axis - 1) as f64
    }

    fn validate(&self) -> Result<()> {
        if !(self.box_halfwidth > 0.0) {
            return Err(Error::InvalidGrid("box_halfwidth must be positive".into()));
        }
        if self.points_per_axis < 16 {
            return Err(Error::InvalidGrid(format!(
                "points_per_axis = {} < 16",
                self.points_per_axis
            )));
        }
        if self.simplex_resolution < 2 {
            return Err(Error::InvalidGrid("simplex_resolution must be >= 2".into()));
        }
        if !(self.tol_residual > 0.0) {
            return Err(Error::InvalidGrid("tol_residual must be positive".into()));
        }
        if self.max_policy_iters == 0 {
            return Err(Error::InvalidGrid("max_policy_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// The drift of the limiting controlled diffusion,
/// b_i = ell_i + (mu_i - theta_i)(1.x)^+ u_i - mu_i x_i.
pub fn drift_into(
    x: &[f64],
    u: &[f64],
    coeffs: &DiffusionCoeffs,
    limits: &LimitParams,
    out: &mut [f64],
) {
    let q = x.iter().sum::<f64>().max(0.0);
    for i in 0..x.len() {
        out[i] = coeffs.ell[i] + (limits.mu[i] - limits.theta[i]) * q * u[i] - limits.mu[i] * x[i];
    }
}

pub fn drift(x: &[f64], u: &[f64], coeffs: &DiffusionCoeffs, limits: &LimitParams) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    drift_into(x, u, coeffs, limits, out.as_mut_slice());
    out
}

/// Running cost seen by the solver. Implemented by [`CostSpec`] paired with
/// limits; test code can wrap it to shift or deform costs.
pub trait RunningCost: Sync {
    fn l(&self, x: &[f64], u: &[f64]) -> f64;
    fn strictly_convex(&self) -> bool;
}

pub struct CostOnLimits<'a> {
    pub cost: &'a CostSpec,
    pub limits: &'a LimitParams,
}

impl RunningCost for CostOnLimits<'_> {
    fn l(&self, x: &[f64], u: &[f64]) -> f64 {
        self.cost.eval_l_unchecked(self.limits, x, u)
    }
    fn strictly_convex(&self) -> bool {
        self.cost.strictly_convex_in_u()
    }
}

/// Bernoulli weight z / (e^z - 1), continuously extended to 1 at z = 0.
#[inline]
fn bernoulli(z: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else {
        let e = z.exp_m1();
        if e.is_infinite() {
            0.0
        } else {
            z / e
        }
    }
}

/// Stencil weights (a_lo, a_hi) for one axis: the operator contribution is
/// a_lo (f_lo - f_0) + a_hi (f_hi - f_0), both weights nonnegative.
#[inline]
fn axis_weights(
    scheme: DriftScheme,
    b: f64,
    diff: f64,
    delta: f64,
    at_lo: bool,
    at_hi: bool,
) -> (f64, f64) {
    if at_lo {
        return if b > 0.0 { (0.0, b / delta) } else { (0.0, 0.0) };
    }
    if at_hi {
        return if b < 0.0 { (-b / delta, 0.0) } else { (0.0, 0.0) };
    }
    let d2 = diff / (delta * delta);
    match scheme {
        DriftScheme::Upwind => (d2 + (-b).max(0.0) / delta, d2 + b.max(0.0) / delta),
        DriftScheme::ExponentialFit => {
            let pe = b * delta / diff;
            (d2 * bernoulli(pe), d2 * bernoulli(-pe))
        }
    }
}

/// Golden-section line search for a scalar convex objective; returns the best
/// (t, value) probed, including the endpoints.
fn golden_min(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI2: f64 = 0.381_966_011_250_105_2;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = a + INV_PHI2 * (b - a);
    let mut x2 = b - INV_PHI2 * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for _ in 0..iters {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + INV_PHI2 * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - INV_PHI2 * (b - a);
            f2 = f(x2);
        }
        let cand = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        if cand.1 < best.1 {
            best = cand;
        }
    }
    best
}

/// Pairwise-transfer coordinate descent on the simplex, keeping the current
/// point on ties so constant objectives are left untouched.
fn polish_simplex(obj: &dyn Fn(&[f64]) -> f64, u: &mut [f64], best: &mut f64, passes: usize) {
    let k = u.len();
    if k < 2 {
        return;
    }
    let mut scratch = u.to_vec();
    for _ in 0..passes {
        let mut improved = false;
        for i in 0..k {
            for j in (i + 1)..k {
                let lo = -u[j];
                let hi = u[i];
                if hi - lo <= 1e-14 {
                    continue;
                }
                let (t, val) = golden_min(
                    |t| {
                        scratch.copy_from_slice(u);
                        scratch[i] = (u[i] - t).max(0.0);
                        scratch[j] = (u[j] + t).max(0.0);
                        obj(&scratch)
                    },
                    lo,
                    hi,
                    48,
                );
                if val < *best - 1e-15 * (1.0 + best.abs()) {
                    u[i] = (u[i] - t).max(0.0);
                    u[j] = (u[j] + t).max(0.0);
                    project_to_simplex(u);
                    *best = val;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Reusable evaluator of the continuous Hamiltonian
/// H(x, p) = min_u [ b(x,u) . p + L(x,u) ] over the simplex mesh, with a
/// continuous polish for strictly convex costs. Ties keep the first mesh
/// point in enumeration order, so a constant objective returns (1, 0, .., 0).
pub struct Hamiltonian<'a, C: RunningCost + ?Sized> {
    cost: &'a C,
    coeffs: &'a DiffusionCoeffs,
    limits: &'a LimitParams,
    mesh: Vec<f64>,
    k: usize,
    polish: bool,
}

impl<'a, C: RunningCost + ?Sized> Hamiltonian<'a, C> {
    pub fn new(
        cost: &'a C,
        coeffs: &'a DiffusionCoeffs,
        limits: &'a LimitParams,
        simplex_resolution: usize,
    ) -> Self {
        let k = limits.k();
        Hamiltonian {
            cost,
            coeffs,
            limits,
            mesh: simplex_mesh(k, simplex_resolution),
            k,
            polish: cost.strictly_convex(),
        }
    }

    /// Minimizes b(x,u).p + L(x,u); writes the argmin into `argmin`.
    pub fn eval(&self, x: &[f64], p: &[f64], argmin: &mut [f64]) -> f64 {
        let k = self.k;
        let q = x.iter().sum::<f64>().max(0.0);
        // objective = base + sum_i lin_i u_i + L(x, u)
        let mut base = 0.0;
        for i in 0..k {
            base += (self.coeffs.ell[i] - self.limits.mu[i] * x[i]) * p[i];
        }
        let lin: Vec<f64> = (0..k)
            .map(|i| (self.limits.mu[i] - self.limits.theta[i]) * q * p[i])
            .collect();
        let obj = |u: &[f64]| -> f64 {
            let mut v = base + self.cost.l(x, u);
            for i in 0..k {
                v += lin[i] * u[i];
            }
            v
        };
        let mut best = f64::INFINITY;
        for cand in self.mesh.chunks(k) {
            let v = obj(cand);
            if v < best {
                best = v;
                argmin.copy_from_slice(cand);
            }
        }
        if self.polish {
            polish_simplex(&obj, argmin, &mut best, 20);
        }
        best
    }
}

/// One-shot continuous Hamiltonian evaluation; returns (value, argmin).
pub fn hamiltonian(
    x: &[f64],
    p: &[f64],
    cost: &CostSpec,
    limits: &LimitParams,
    coeffs: &DiffusionCoeffs,
    simplex_resolution: usize,
) -> (f64, Vec<f64>) {
    let wrapped = CostOnLimits { cost, limits };
    let h = Hamiltonian::new(&wrapped, coeffs, limits, simplex_resolution);
    let mut u = vec![0.0; limits.k()];
    let v = h.eval(x, p, &mut u);
    (v, u)
}

/// Discretized value function and policy on the box.
#[derive(Debug, Clone)]
pub struct ValueGrid {
    pub spec: GridSpec,
    pub k: usize,
    pub gamma: f64,
    pub cost_id: String,
    pub values: Vec<f64>,
    /// k policy components per node.
    pub policy: Vec<f64>,
    /// Central-difference HJB defect per node (zero on the outermost layer
    /// where central differences do not exist).
    pub residual: Vec<f64>,
    pub iterations: usize,
    /// Largest pointwise increase between successive policy-evaluation
    /// iterates after the first; policy iteration should keep this at
    /// rounding level.
    pub value_iterate_max_increase: f64,
    grid: Grid,
}

impl ValueGrid {
    /// Multilinear interpolation of the value function (clamped to the box).
    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.grid.interp_scalar(&self.values, x)
    }

    /// Interpolated policy at x, projected onto the simplex.
    pub fn policy_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        self.grid.interp_vector(&self.policy, self.k, x, &mut out);
        project_to_simplex(&mut out);
        out
    }

    pub fn node_count(&self) -> usize {
        self.grid.len
    }

    pub fn node_coords(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.k];
        self.grid.node_coords(idx, &mut x);
        x
    }

    /// Central-difference gradient at a strictly interior node.
    pub fn node_gradient(&self, idx: usize) -> Option<Vec<f64>> {
        let g = &self.grid;
        let mut p = vec![0.0; self.k];
        for d in 0..self.k {
            let ai = g.axis_index(idx, d);
            if ai == 0 || ai == g.m - 1 {
                return None;
            }
            let s = g.stride(d);
            p[d] = (self.values[idx + s] - self.values[idx - s]) / (2.0 * g.delta);
        }
        Some(p)
    }

    /// Smallest C with |values| <= C (1 + ||x||_1^m) over all nodes, the
    /// polynomial-growth constant of the computed solution.
    pub fn growth_constant(&self, m: u32) -> f64 {
        let mut c = 0.0f64;
        let mut x = vec![0.0; self.k];
        for idx in 0..self.grid.len {
            self.grid.node_coords(idx, &mut x);
            let norm: f64 = x.iter().map(|v| v.abs()).sum();
            c = c.max(self.values[idx].abs() / (1.0 + norm.powi(m as i32)));
        }
        c
    }

    /// True when every axis index is at least `margin` nodes away from the
    /// boundary.
    pub fn is_interior(&self, idx: usize, margin: usize) -> bool {
        (0..self.k).all(|d| {
            let ai = self.grid.axis_index(idx, d);
            ai >= margin && ai + margin < self.grid.m
        })
    }

    /// Writes the grid as CSV: two metadata lines, a column header, then one
    /// row per node (coordinates, value, policy components, residual).
    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "k,b,m,s,tol_residual,max_policy_iters,scheme,gamma,cost_id,cost_hash")?;
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{},{:016x}",
            self.k,
            self.spec.box_halfwidth,
            self.spec.points_per_axis,
            self.spec.simplex_resolution,
            self.spec.tol_residual,
            self.spec.max_policy_iters,
            match self.spec.scheme {
                DriftScheme::Upwind => "upwind",
                DriftScheme::ExponentialFit => "exponential_fit",
            },
            self.gamma,
            self.cost_id,
            fnv1a64(self.cost_id.as_bytes()),
        )?;
        let coords: Vec<String> = (0..self.k).map(|d| format!("x{d}")).collect();
        let us: Vec<String> = (0..self.k).map(|d| format!("u{d}")).collect();
        writeln!(f, "{},value,{},residual", coords.join(","), us.join(","))?;
        let mut x = vec![0.0; self.k];
        for idx in 0..self.grid.len {
            self.grid.node_coords(idx, &mut x);
            let xs: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            let ps: Vec<String> = (0..self.k)
                .map(|d| self.policy[idx * self.k + d].to_string())
                .collect();
            writeln!(
                f,
                "{},{},{},{}",
                xs.join(","),
                self.values[idx],
                ps.join(","),
                self.residual[idx]
            )?;
        }
        Ok(())
    }

    /// Reads a grid written by [`save_csv`](Self::save_csv).
    pub fn load_csv(path: &std::path::Path) -> Result<ValueGrid> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = f.lines();
        let _names = lines.next().ok_or_else(|| Error::Other("empty grid file".into()))??;
        let meta = lines.next().ok_or_else(|| Error::Other("missing grid metadata".into()))??;
        let fields: Vec<&str> = meta.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::Other(format!(
                "bad grid metadata: expected 10 fields, got {}",
                fields.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Other(format!("bad number {s:?}: {e}")))
        };
        let k: usize = fields[0]
            .parse()
            .map_err(|e| Error::Other(format!("bad k: {e}")))?;
        let spec = GridSpec {
            box_halfwidth: parse_f(fields[1])?,
            points_per_axis: fields[2]
                .parse()
                .map_err(|e| Error::Other(format!("bad m: {e}")))?,
            simplex_resolution: fields[3]
                .parse()
                .map_err(|e| Error::Other(format!("bad s: {e}")))?,
            tol_residual: parse_f(fields[4])?,
            max_policy_iters: fields[5]
                .parse()
                .map_err(|e| Error::Other(format!("bad iters: {e}")))?,
            scheme: match fields[6] {
                "upwind" => DriftScheme::Upwind,
                "exponential_fit" => DriftScheme::ExponentialFit,
                s => return Err(Error::Other(format!("unknown scheme {s:?}"))),
            },
        };
        let gamma = parse_f(fields[7])?;
        let cost_id = fields[8].to_string();
        let expect_hash = u64::from_str_radix(fields[9], 16)
            .map_err(|e| Error::Other(format!("bad cost hash: {e}")))?;
        if fnv1a64(cost_id.as_bytes()) != expect_hash {
            return Err(Error::Other("cost hash mismatch in grid file".into()));
        }
        let _columns = lines.next().ok_or_else(|| Error::Other("missing column header".into()))??;
        let grid = Grid::new(k, spec.points_per_axis, spec.box_halfwidth);
        let mut values = Vec::with_capacity(grid.len);
        let mut policy = Vec::with_capacity(grid.len * k);
        let mut residual = Vec::with_capacity(grid.len);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 2 * k + 2 {
                return Err(Error::Other(format!("bad grid row: {line:?}")));
            }
            values.push(parse_f(cells[k])?);
            for d in 0..k {
                policy.push(parse_f(cells[k + 1 + d])?);
            }
            residual.push(parse_f(cells[2 * k + 1])?);
        }
        if values.len() != grid.len {
            return Err(Error::Other(format!(
                "grid file has {} rows, expected {}",
                values.len(),
                grid.len
            )));
        }
        Ok(ValueGrid {
            spec,
            k,
            gamma,
            cost_id,
            values,
            policy,
            residual,
            iterations: 0,
            value_iterate_max_increase: 0.0,
            grid,
        })
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

/// Per-node context for the discrete Bellman argmin.
struct NodeView {
    x: Vec<f64>,
    /// (value_lo, value_hi, at_lo_face, at_hi_face) per axis; face sides hold 0.0.
    sides: Vec<(f64, f64, bool, bool)>,
    f0: f64,
}

fn node_view(grid: &Grid, values: &[f64], idx: usize, k: usize) -> NodeView {
    let mut x = vec![0.0; k];
    grid.node_coords(idx, &mut x);
    let mut sides = Vec::with_capacity(k);
    for d in 0..k {
        let ai = grid.axis_index(idx, d);
        let at_lo = ai == 0;
        let at_hi = ai == grid.m - 1;
        let s = grid.stride(d);
        let lo = if at_lo { 0.0 } else { values[idx - s] };
        let hi = if at_hi { 0.0 } else { values[idx + s] };
        sides.push((lo, hi, at_lo, at_hi));
    }
    NodeView {
        x,
        sides,
        f0: values[idx],
    }
}

/// Discrete operator value at a node for control u (excluding the -gamma f
/// and +L terms handled by the caller as needed).
#[inline]
fn node_flow<C: RunningCost + ?Sized>(
    view: &NodeView,
    u: &[f64],
    scheme: DriftScheme,
    coeffs: &DiffusionCoeffs,
    limits: &LimitParams,
    delta: f64,
    _cost: &C,
) -> f64 {
    let q = view.x.iter().sum::<f64>().max(0.0);
    let mut acc = 0.0;
    for d in 0..view.x.len() {
        let b = coeffs.ell[d] + (limits.mu[d] - limits.theta[d]) * q * u[d]
            - limits.mu[d] * view.x[d];
        let diff = 0.5 * coeffs.r[d] * coeffs.r[d];
        let (lo, hi, at_lo, at_hi) = view.sides[d];
        let (a_lo, a_hi) = axis_weights(scheme, b, diff, delta, at_lo, at_hi);
        acc += a_lo * (lo - view.f0) + a_hi * (hi - view.f0);
    }
    acc
}

/// Solves the HJB equation for the given cost; the public entry point over a
/// [`CostSpec`].
pub fn solve_hjb(
    spec: &GridSpec,
    cost: &CostSpec,
    coeffs: &DiffusionCoeffs,
    limits: &LimitParams,
) -> Result<ValueGrid> {
    let wrapped = CostOnLimits { cost, limits };
    solve_hjb_with(spec, &wrapped, coeffs, limits, cost.cost_id())
}

/// Generic solver used by tests that deform the cost.
pub fn solve_hjb_with<C: RunningCost>(
    spec: &GridSpec,
    cost: &C,
    coeffs: &DiffusionCoeffs,
    limits: &LimitParams,
    cost_id: String,
) -> Result<ValueGrid> {
    spec.validate()?;
    let k = limits.k();
    if k > 3 {
        eprintln!(
            "warning: dense grids restrict the solver to k <= 3 in practice; got k = {k}"
        );
    }
    let grid = Grid::new(k, spec.points_per_axis, spec.box_halfwidth);
    let mesh = simplex_mesh(k, spec.simplex_resolution);
    let delta = grid.delta;
    let gamma = limits.gamma;
    let scheme = spec.scheme;

    let mut values = vec![0.0f64; grid.len];
    let mut policy = vec![0.0f64; grid.len * k];
    let polish = cost.strictly_convex();

    // Pointwise argmin of the discrete operator + running cost given the
    // current values; ties keep the earliest mesh point.
    let improve = |values: &[f64], policy: &mut [f64]| {
        policy
            .par_chunks_mut(k)
            .enumerate()
            .for_each(|(idx, u_out)| {
                let view = node_view(&grid, values, idx, k);
                let mut best = f64::INFINITY;
                let obj = |u: &[f64]| -> f64 {
                    node_flow(&view, u, scheme, coeffs, limits, delta, cost)
                        + cost.l(&view.x, u)
                };
                for cand in mesh.chunks(k) {
                    let v = obj(cand);
                    if v < best {
                        best = v;
                        u_out.copy_from_slice(cand);
                    }
                }
                if polish {
                    polish_simplex(&obj, u_out, &mut best, 20);
                }
            });
    };

    improve(&values, &mut policy);

    let mut banded = BandedMatrix::new(grid.len, grid.bandwidth());
    let mut rhs = vec![0.0f64; grid.len];
    let mut iterations = 0usize;
    let mut max_increase = 0.0f64;
    let mut last_delta = f64::INFINITY;
    let mut converged = false;

    for iter in 1..=spec.max_policy_iters {
        iterations = iter;
        banded.reset();
        // assemble (gamma I - A) f = L under the current policy
        let mut x = vec![0.0; k];
        for idx in 0..grid.len {
            grid.node_coords(idx, &mut x);
            let u = &policy[idx * k..(idx + 1) * k];
            let q = x.iter().sum::<f64>().max(0.0);
            let mut diag = gamma;
            let mut off_sum = 0.0;
            for d in 0..k {
                let b = coeffs.ell[d] + (limits.mu[d] - limits.theta[d]) * q * u[d]
                    - limits.mu[d] * x[d];
                let diff = 0.5 * coeffs.r[d] * coeffs.r[d];
                let ai = grid.axis_index(idx, d);
                let (a_lo, a_hi) =
                    axis_weights(scheme, b, diff, delta, ai == 0, ai == grid.m - 1);
                let s = grid.stride(d);
                if a_lo != 0.0 {
                    banded.set(idx, idx - s, -a_lo);
                    off_sum += a_lo;
                }
                if a_hi != 0.0 {
                    banded.set(idx, idx + s, -a_hi);
                    off_sum += a_hi;
                }
                diag += a_lo + a_hi;
            }
            // monotone scheme: nonpositive off-diagonals, strictly dominant diagonal
            assert!(
                diag > 0.0 && diag - off_sum >= gamma * (1.0 - 1e-9),
                "assembled row {idx} lost strict diagonal dominance"
            );
            banded.set(idx, idx, diag);
            rhs[idx] = cost.l(&x, u);
        }
        banded.factor()?;
        banded.solve(&mut rhs);

        let mut delta_max = 0.0f64;
        for idx in 0..grid.len {
            let d = rhs[idx] - values[idx];
            delta_max = delta_max.max(d.abs());
            if iter >= 2 {
                max_increase = max_increase.max(d);
            }
        }
        values.copy_from_slice(&rhs);
        last_delta = delta_max;
        if delta_max < spec.tol_residual {
            converged = true;
            break;
        }
        improve(&values, &mut policy);
    }

    if !converged {
        return Err(Error::NoConvergence {
            last_delta,
            iters: iterations,
        });
    }

    // Defect correction toward the central-difference fixed point: the
    // monotone solution carries an O(delta |b| f'') first-order drift error
    // wherever the fitted weights deviate from central ones, which the
    // central-difference defect report would expose. Each sweep solves
    // M delta = G(f) with the factored monotone matrix as preconditioner,
    // where G is the central HJB defect at strictly interior nodes and the
    // closure defect on the boundary layer.
    let ham = Hamiltonian::new(cost, coeffs, limits, spec.simplex_resolution);
    let target = spec.tol_residual.max(1e-4);
    let mut omega = 1.0f64;
    let mut prev_norm = f64::INFINITY;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut delta_buf = vec![0.0f64; grid.len];
    for _ in 0..60 {
        let defect: Vec<f64> = (0..grid.len)
            .into_par_iter()
            .map(|idx| {
                let interior =
                    (0..k).all(|d| {
                        let ai = grid.axis_index(idx, d);
                        ai > 0 && ai < grid.m - 1
                    });
                let mut x = vec![0.0; k];
                grid.node_coords(idx, &mut x);
                if interior {
                    let mut p = vec![0.0; k];
                    let mut diffusion = 0.0;
                    for d in 0..k {
                        let s = grid.stride(d);
                        let (lo, hi) = (values[idx - s], values[idx + s]);
                        p[d] = (hi - lo) / (2.0 * delta);
                        diffusion += 0.5
                            * coeffs.r[d]
                            * coeffs.r[d]
                            * ((hi - 2.0 * values[idx] + lo) / (delta * delta));
                    }
                    let mut u = vec![0.0; k];
                    diffusion + ham.eval(&x, &p, &mut u) - gamma * values[idx]
                } else {
                    // Bellman defect of the monotone closure row
                    let view = node_view(&grid, &values, idx, k);
                    let mut bestv = f64::INFINITY;
                    let mut u = vec![0.0; k];
                    for cand in mesh.chunks(k) {
                        let v = node_flow(&view, cand, scheme, coeffs, limits, delta, cost)
                            + cost.l(&x, cand);
                        if v < bestv {
                            bestv = v;
                            u.copy_from_slice(cand);
                        }
                    }
                    if polish {
                        let obj = |uu: &[f64]| {
                            node_flow(&view, uu, scheme, coeffs, limits, delta, cost)
                                + cost.l(&x, uu)
                        };
                        polish_simplex(&obj, &mut u, &mut bestv, 20);
                    }
                    bestv - gamma * values[idx]
                }
            })
            .collect();
        let norm = defect.iter().fold(0.0f64, |a, d| a.max(d.abs()));
        if best.as_ref().is_none_or(|(b, _)| norm < *b) {
            best = Some((norm, values.clone()));
        }
        if norm <= target {
            break;
        }
        if norm > prev_norm {
            omega = (omega * 0.5).max(0.25);
        }
        prev_norm = norm;
        delta_buf.copy_from_slice(&defect);
        banded.solve(&mut delta_buf);
        for idx in 0..grid.len {
            values[idx] += omega * delta_buf[idx];
        }
    }
    // keep the iterate with the smallest defect seen
    if let Some((_, best_values)) = best {
        values = best_values;
    }

    // leave the stored policy consistent with the final values: the central
    // Hamiltonian argmin at interior nodes, the monotone closure argmin on
    // the boundary layer
    improve(&values, &mut policy);
    {
        let values_ref = &values;
        policy
            .par_chunks_mut(k)
            .enumerate()
            .for_each(|(idx, u_out)| {
                let interior = (0..k).all(|d| {
                    let ai = grid.axis_index(idx, d);
                    ai > 0 && ai < grid.m - 1
                });
                if !interior {
                    return;
                }
                let mut x = vec![0.0; k];
                grid.node_coords(idx, &mut x);
                let mut p = vec![0.0; k];
                for d in 0..k {
                    let s = grid.stride(d);
                    p[d] = (values_ref[idx + s] - values_ref[idx - s]) / (2.0 * delta);
                }
                ham.eval(&x, &p, u_out);
            });
    }

    let mut vg = ValueGrid {
        spec: spec.clone(),
        k,
        gamma,
        cost_id,
        values,
        policy,
        residual: vec![0.0; grid.len],
        iterations,
        value_iterate_max_increase: max_increase,
        grid,
    };
    fill_residual(&mut vg, cost, coeffs, limits);
    Ok(vg)
}

/// Recomputes the central-difference HJB defect at every strictly interior
/// node and stores it in `vg.residual`.
fn fill_residual<C: RunningCost>(
    vg: &mut ValueGrid,
    cost: &C,
    coeffs: &DiffusionCoeffs,
    limits: &LimitParams,
) {
    let ham = Hamiltonian::new(cost, coeffs, limits, vg.spec.simplex_resolution);
    let grid = &vg.grid;
    let k = vg.k;
    let values = &vg.values;
    let gamma = vg.gamma;
    let residual: Vec<f64> = (0..grid.len)
        .into_par_iter()
        .map(|idx| {
            for d in 0..k {
                let ai = grid.axis_index(idx, d);
                if ai == 0 || ai == grid.m - 1 {
                    return 0.0;
                }
            }
            let mut x = vec![0.0; k];
            grid.node_coords(idx, &mut x);
            let mut p = vec![0.0; k];
            let mut diffusion = 0.0;
            for d in 0..k {
                let s = grid.stride(d);
                let (lo, hi) = (values[idx - s], values[idx + s]);
                p[d] = (hi - lo) / (2.0 * grid.delta);
                diffusion += 0.5
                    * coeffs.r[d]
                    * coeffs.r[d]
                    * ((hi - 2.0 * values[idx] + lo) / (grid.delta * grid.delta));
            }
            let mut u = vec![0.0; k];
            let h = ham.eval(&x, &p, &mut u);
            diffusion + h - gamma * values[idx]
        })
        .collect();
    vg.residual = residual;
}

/// Maximum central-difference defect over interior nodes (excluding a
/// boundary collar of 10% of the box width per face) and the fraction of
/// those nodes with defect below `tol`.
pub fn residual_report(vg: &ValueGrid, tol: f64) -> (f64, f64) {
    let collar = 0.1 * (2.0 * vg.spec.box_halfwidth);
    let margin = (collar / vg.grid.delta).ceil().max(1.0) as usize;
    let mut max_res = 0.0f64;
    let mut total = 0usize;
    let mut below = 0usize;
    for idx in 0..vg.grid.len {
        if !vg.is_interior(idx, margin) {
            continue;
        }
        total += 1;
        let r = vg.residual[idx].abs();
        max_res = max_res.max(r);
        if r <= tol {
            below += 1;
        }
    }
    let fraction = if total == 0 {
        0.0
    } else {
        below as f64 / total as f64
    };
    (max_res, fraction)
}

/// Wraps the solved grid's policy into an interpolated policy function.
/// Points outside the box are clamped to its surface first.
pub fn extract_policy_fn(vg: &ValueGrid) -> PolicyFn {
    let grid = vg.grid.clone();
    let k = vg.k;
    let policy = vg.policy.clone();
    PolicyFn::new(k, move |x, out| {
        grid.interp_vector(&policy, k, x, out);
    })
}

/// Distance-weighted lattice mollification of a policy:
/// h^eps(x) = sum_y d(x,y) h(y) / sum_y d(x,y) over y in eps Z^k within the
/// open ball B(x, eps sqrt(k)), where d is the distance from y to the ball's
/// boundary. The result is locally Lipschitz and simplex-valued.
pub fn mollify_policy(h: &PolicyFn, eps: f64) -> PolicyFn {
    assert!(eps > 0.0, "mollifier radius must be positive");
    let k = h.k();
    let h = h.clone();
    let radius = eps * (k as f64).sqrt();
    PolicyFn::new(k, move |x, out| {
        let lo: Vec<i64> = x.iter().map(|xi| ((xi - radius) / eps).ceil() as i64).collect();
        let hi: Vec<i64> = x.iter().map(|xi| ((xi + radius) / eps).floor() as i64).collect();
        let mut m = lo.clone();
        let mut y = vec![0.0; k];
        let mut hy = vec![0.0; k];
        let mut weight_sum = 0.0;
        out.fill(0.0);
        'outer: loop {
            for d in 0..k {
                y[d] = m[d] as f64 * eps;
            }
            let dist2: f64 = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            let dist = dist2.sqrt();
            if dist < radius {
                let w = radius - dist;
                h.eval_into(&y, &mut hy);
                for d in 0..k {
                    out[d] += w * hy[d];
                }
                weight_sum += w;
            }
            // odometer over the lattice box
            for d in (0..k + 1).rev() {
                if d == 0 {
                    break 'outer;
                }
                m[d - 1] += 1;
                if m[d - 1] <= hi[d - 1] {
                    continue 'outer;
                }
                m[d - 1] = lo[d - 1];
            }
        }
        // the nearest lattice point is within eps*sqrt(k)/2 of x, so the
        // stencil is never empty
        assert!(weight_sum > 0.0, "empty mollifier stencil");
        for d in 0..k {
            out[d] /= weight_sum;
        }
    })
}
