//! Monotone Picard iteration for `f' = -a(‖Λf₀‖)Λf + B(f, f)`.
//!
//! Each sweep integrates the linear problem `u' = -cΛu + B(t)` with `B` frozen
//! from the two previous iterates. Between nodes the propagator is the
//! trapezoid (Crank-Nicolson) rule applied to that linear problem, per size:
//!
//! ```text
//! u[m] = R u[m-1] + W (B[m-1] + B[m]),   R = (1 - x/2)/(1 + x/2),  W = (h/2)/(1 + x/2)
//! ```
//!
//! with `x = h c λ_k`. `R` and `W` are nonnegative while `x <= 2`, so sweeps map
//! ordered cone-valued inputs to ordered cone-valued outputs, and the discrete
//! Λ-moment balance closes exactly at the fixed point.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{audit_assumptions, CollisionModel, ModelSpec};
use crate::space::{moment, StateVec};

/// Relative slack for order checks between consecutive iterates.
pub const ORDER_SLACK: f64 = 1e-12;
/// Relative slack for the Λ and Λ₁ a priori bounds.
pub const MOMENT_BOUND_SLACK: f64 = 1e-8;
/// Multiplicative slack for the second-moment growth bound.
pub const GROWTH_BOUND_SLACK: f64 = 1e-6;
/// Samples drawn when a solve audits its model first.
pub const PRESOLVE_AUDIT_SAMPLES: usize = 2000;
pub const PRESOLVE_AUDIT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!("horizon must be > 0, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::Domain("grid needs at least one step".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn nodes(&self) -> usize {
        self.steps + 1
    }

    pub fn h(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn t(&self, m: usize) -> f64 {
        if m == self.steps {
            self.horizon
        } else {
            m as f64 * self.h()
        }
    }

    /// Grid with `factor` times as many steps over the same horizon.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        Self::new(self.horizon, self.steps * factor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    states: Vec<StateVec>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, states: Vec<StateVec>) -> Result<Self> {
        if states.len() != grid.nodes() {
            return Err(Error::GridMismatch(format!(
                "{} states for a grid of {} nodes",
                states.len(),
                grid.nodes()
            )));
        }
        for s in &states[1..] {
            states[0].same_shape(s)?;
        }
        Ok(Self { grid, states })
    }

    pub fn constant(grid: TimeGrid, g: &StateVec) -> Self {
        Self {
            grid,
            states: vec![g.clone(); grid.nodes()],
        }
    }

    pub fn zeros(grid: TimeGrid, sizes: usize, cells: usize) -> Self {
        Self::constant(grid, &StateVec::zeros(sizes, cells))
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn states(&self) -> &[StateVec] {
        &self.states
    }

    pub fn state(&self, m: usize) -> &StateVec {
        &self.states[m]
    }

    pub fn last(&self) -> &StateVec {
        self.states
            .last()
            .expect("trajectory has at least one node")
    }

    pub fn into_states(self) -> Vec<StateVec> {
        self.states
    }

    pub fn map_nodes<F: Fn(&StateVec) -> f64>(&self, f: F) -> Vec<f64> {
        self.states.iter().map(f).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iters: usize,
    pub audit_first: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_abs: 1e-10,
            tol_rel: 1e-8,
            max_iters: 200,
            audit_first: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_abs > 0.0 && self.tol_abs.is_finite())
            || !(self.tol_rel > 0.0 && self.tol_rel.is_finite())
        {
            return Err(Error::Domain(format!(
                "tolerances must be > 0, got abs {} rel {}",
                self.tol_abs, self.tol_rel
            )));
        }
        if self.max_iters < 3 {
            return Err(Error::Domain(format!(
                "max_iters must be >= 3, got {}",
                self.max_iters
            )));
        }
        Ok(())
    }
}

/// Per-sweep diagnostics. Bound excesses are relative; positive means violated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub sup_increment: f64,
    pub order_violations: usize,
    pub clamped: usize,
    pub lambda_bound_excess: f64,
    pub lambda1_bound_excess: f64,
    pub growth_bound_excess: f64,
}

impl SweepRecord {
    pub fn bounds_hold(&self) -> bool {
        self.lambda_bound_excess <= MOMENT_BOUND_SLACK
            && self.lambda1_bound_excess <= MOMENT_BOUND_SLACK
            && self.growth_bound_excess <= GROWTH_BOUND_SLACK
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub trajectory: Trajectory,
    pub iterations_used: usize,
    pub increment_history: Vec<f64>,
    pub a_f0: f64,
    pub sweeps: Vec<SweepRecord>,
}

impl SolveResult {
    pub fn order_violations(&self) -> usize {
        self.sweeps.iter().map(|s| s.order_violations).sum()
    }
}

/// `Q⁺(g) − Q⁻(g) + a(‖Λg‖ + cum_delta)·Λg` at `node`, with the number of
/// entries clamped from within-slack negatives to zero.
pub fn b_operator<M: CollisionModel + ?Sized>(
    model: &M,
    node: usize,
    g: &StateVec,
    cum_delta: f64,
) -> Result<(StateVec, usize)> {
    if cum_delta.is_nan() || cum_delta < 0.0 {
        return Err(Error::Domain(format!(
            "cumulative dissipation must be >= 0, got {cum_delta}"
        )));
    }
    let lambda = model.lambda();
    let w = lambda.weights();
    let k = w.len();
    let a = model.a_env().eval(moment(lambda, 1, g)? + cum_delta);
    let (gain, loss) = model.gain_loss_at(node, g)?;
    let mut out = gain.into_vec();
    let mut clamped = 0;
    for (idx, (b, (l, gv))) in out
        .iter_mut()
        .zip(loss.as_slice().iter().zip(g.as_slice()))
        .enumerate()
    {
        let env = a * w[idx % k] * gv;
        let scale = b.max(*l).max(env);
        *b = *b - l + env;
        if *b < 0.0 {
            if *b < -ORDER_SLACK * scale {
                return Err(Error::AssumptionViolation(format!(
                    "B is negative ({:e}) at node {node}, entry {idx}: loss exceeds its envelope",
                    *b
                )));
            }
            *b = 0.0;
            clamped += 1;
        }
    }
    Ok((StateVec::from_cone_parts(k, g.cells(), out), clamped))
}

/// Trapezoid running integral of Δ along the trajectory, starting at 0.
pub fn cumulative_delta<M: CollisionModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
) -> Result<Vec<f64>> {
    let deltas: Vec<f64> = traj
        .states()
        .par_iter()
        .enumerate()
        .map(|(m, g)| model.delta_at(m, g))
        .collect::<Result<_>>()?;
    Ok(trapezoid_cumulative(&deltas, traj.grid().h()))
}

pub(crate) fn trapezoid_cumulative(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for pair in values.windows(2) {
        acc += 0.5 * h * (pair[0] + pair[1]);
        out.push(acc);
    }
    out
}

/// Per-size propagator coefficients `(R, W)` for step `h` and rate `c`.
fn propagator(weights: &[f64], c: f64, h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let xmax = h * c * weights.iter().copied().fold(0.0, f64::max);
    if xmax > 2.0 {
        return Err(Error::StepTooLarge(xmax));
    }
    Ok(weights
        .iter()
        .map(|w| {
            let x = h * c * w;
            ((1.0 - 0.5 * x) / (1.0 + 0.5 * x), 0.5 * h / (1.0 + 0.5 * x))
        })
        .unzip())
}

fn check_finite(states: &[StateVec]) -> Result<()> {
    match states
        .iter()
        .position(|s| s.as_slice().iter().any(|v| !v.is_finite()))
    {
        Some(node) => Err(Error::NonfiniteState { node }),
        None => Ok(()),
    }
}

/// Linear part alone: the discrete `V^{t_m} f0`.
pub fn free_trajectory<M: CollisionModel + ?Sized>(
    model: &M,
    f0: &StateVec,
    grid: TimeGrid,
    a_f0: f64,
) -> Result<Trajectory> {
    let (r, _) = propagator(model.lambda().weights(), a_f0, grid.h())?;
    let k = r.len();
    let mut states = Vec::with_capacity(grid.nodes());
    let mut p = f0.as_slice().to_vec();
    states.push(f0.clone());
    for _ in 1..grid.nodes() {
        for (idx, v) in p.iter_mut().enumerate() {
            *v *= r[idx % k];
        }
        states.push(StateVec::from_cone_parts(k, f0.cells(), p.clone()));
    }
    Ok(Trajectory { grid, states })
}

/// Largest relative amount by which `lower` exceeds `upper`, and the number of
/// entries exceeding `slack`. Returns the first offending node too.
fn order_excess(
    lower: &Trajectory,
    upper: &Trajectory,
    slack: f64,
) -> (usize, Option<(usize, f64)>) {
    let mut count = 0;
    let mut worst: Option<(usize, f64)> = None;
    for (m, (a, b)) in lower.states().iter().zip(upper.states()).enumerate() {
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            let excess = x - y;
            if excess > slack * x.abs().max(y.abs()) {
                count += 1;
                let rel = excess / x.abs().max(y.abs());
                if worst.is_none_or(|(_, w)| rel > w) {
                    worst = Some((m, rel));
                }
            }
        }
    }
    (count, worst)
}

/// One application of the iteration map. `cum_prevprev` is the running Δ
/// integral of the iterate before `prev`. Returns the new iterate and the
/// number of clamped B entries.
pub fn picard_sweep<M: CollisionModel + ?Sized>(
    model: &M,
    f0: &StateVec,
    prev: &Trajectory,
    prevprev: &Trajectory,
    cum_prevprev: &[f64],
    a_f0: f64,
) -> Result<(Trajectory, usize)> {
    let grid = prev.grid();
    if prevprev.grid() != grid || cum_prevprev.len() != grid.nodes() {
        return Err(Error::GridMismatch(
            "sweep inputs live on different grids".into(),
        ));
    }
    if let (_, Some((node, excess))) = order_excess(prevprev, prev, ORDER_SLACK) {
        return Err(Error::InternalOrder { node, excess });
    }
    let (r, w) = propagator(model.lambda().weights(), a_f0, grid.h())?;
    let b: Vec<(StateVec, usize)> = prev
        .states()
        .par_iter()
        .zip(cum_prevprev.par_iter())
        .enumerate()
        .map(|(m, (g, cum))| b_operator(model, m, g, *cum))
        .collect::<Result<_>>()?;
    let clamped = b.iter().map(|(_, c)| c).sum();

    let k = r.len();
    let cells = f0.cells();
    let n = k * cells;
    let mut integral = vec![0.0; n];
    let mut free = f0.as_slice().to_vec();
    let mut states = Vec::with_capacity(grid.nodes());
    states.push(f0.clone());
    for m in 1..grid.nodes() {
        let (b0, b1) = (b[m - 1].0.as_slice(), b[m].0.as_slice());
        let mut next = vec![0.0; n];
        for idx in 0..n {
            let s = idx % k;
            integral[idx] = r[s] * integral[idx] + w[s] * (b0[idx] + b1[idx]);
            free[idx] *= r[s];
            next[idx] = free[idx] + integral[idx];
        }
        states.push(StateVec::from_cone_parts(k, cells, next));
    }
    check_finite(&states)?;
    Ok((Trajectory { grid, states }, clamped))
}

/// The first `count` iterates `f₁ = 0, f₂ = V f0, f₃, ...` with the frozen
/// coefficient `a_coef` supplied by the caller.
pub fn picard_iterates<M: CollisionModel + ?Sized>(
    model: &M,
    f0: &StateVec,
    grid: TimeGrid,
    a_coef: f64,
    count: usize,
) -> Result<Vec<Trajectory>> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    out.push(Trajectory::zeros(grid, f0.sizes(), f0.cells()));
    if count == 1 {
        return Ok(out);
    }
    out.push(free_trajectory(model, f0, grid, a_coef)?);
    let mut cum_prevprev = vec![0.0; grid.nodes()];
    while out.len() < count {
        let n = out.len();
        let (next, _) = picard_sweep(model, f0, &out[n - 1], &out[n - 2], &cum_prevprev, a_coef)?;
        cum_prevprev = cumulative_delta(model, &out[n - 1])?;
        out.push(next);
    }
    Ok(out)
}

struct Moments {
    lam: f64,
    lam1: f64,
    lam2: f64,
    rho: f64,
}

fn sweep_record<M: CollisionModel + ?Sized>(
    model: &M,
    sweep: usize,
    new: &Trajectory,
    prev: &Trajectory,
    cum_prev: &[f64],
    clamped: usize,
    m0: &Moments,
) -> Result<SweepRecord> {
    let grid = new.grid();
    let mut sup_increment = 0.0f64;
    let (mut lam_ex, mut lam1_ex, mut growth_ex) =
        (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (m, (f, p)) in new.states().iter().zip(prev.states()).enumerate() {
        sup_increment = sup_increment.max(f.l1_distance(p)?);
        let lam = moment(model.lambda(), 1, f)?;
        lam_ex = lam_ex.max(rel_excess(lam + cum_prev[m], m0.lam));
        lam1_ex = lam1_ex.max(rel_excess(moment(model.lambda1(), 1, f)?, m0.lam1));
        let bound = m0.lam2 * (m0.rho * grid.t(m)).exp();
        growth_ex = growth_ex.max(rel_excess(moment(model.lambda(), 2, f)?, bound));
    }
    let (order_violations, _) = order_excess(prev, new, ORDER_SLACK);
    Ok(SweepRecord {
        sweep,
        sup_increment,
        order_violations,
        clamped,
        lambda_bound_excess: lam_ex,
        lambda1_bound_excess: lam1_ex,
        growth_bound_excess: growth_ex,
    })
}

fn rel_excess(value: f64, bound: f64) -> f64 {
    if bound == 0.0 {
        if value == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        value / bound - 1.0
    }
}

/// Iterates to convergence on any collision model. No audit is run.
pub fn solve_with<M: CollisionModel + ?Sized>(
    model: &M,
    f0: &StateVec,
    grid: TimeGrid,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    cfg.validate()?;
    if f0.sizes() != model.lambda().len() {
        return Err(Error::ShapeMismatch {
            left: (model.lambda().len(), f0.cells()),
            right: f0.shape(),
        });
    }
    let lam0 = moment(model.lambda(), 1, f0)?;
    let a_f0 = model.a_env().eval(lam0);
    // nothing moves: either the zero state or no collisions at all
    if f0.is_zero() || a_f0 == 0.0 {
        return Ok(SolveResult {
            trajectory: Trajectory::constant(grid, f0),
            iterations_used: 0,
            increment_history: Vec::new(),
            a_f0,
            sweeps: Vec::new(),
        });
    }
    let m0 = Moments {
        lam: lam0,
        lam1: moment(model.lambda1(), 1, f0)?,
        lam2: moment(model.lambda(), 2, f0)?,
        rho: model.rho_env().eval(moment(model.lambda1(), 1, f0)?),
    };
    let tol = cfg.tol_abs + cfg.tol_rel * lam0;

    let mut prevprev = Trajectory::zeros(grid, f0.sizes(), f0.cells());
    let mut prev = free_trajectory(model, f0, grid, a_f0)?;
    let mut cum_prevprev = vec![0.0; grid.nodes()];
    let mut history = Vec::new();
    let mut sweeps = Vec::new();
    for sweep in 1..=cfg.max_iters {
        let (next, clamped) = picard_sweep(model, f0, &prev, &prevprev, &cum_prevprev, a_f0)?;
        let cum_prev = cumulative_delta(model, &prev)?;
        let record = sweep_record(model, sweep, &next, &prev, &cum_prev, clamped, &m0)?;
        history.push(record.sup_increment);
        sweeps.push(record);
        prevprev = std::mem::replace(&mut prev, next);
        cum_prevprev = cum_prev;
        if record.sup_increment <= tol {
            return Ok(SolveResult {
                trajectory: prev,
                iterations_used: sweep,
                increment_history: history,
                a_f0,
                sweeps,
            });
        }
    }
    Err(Error::MaxItersExceeded {
        iterations: cfg.max_iters,
        last: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

/// Audits the model first when `cfg.audit_first` is set, then iterates.
pub fn solve(
    model: &ModelSpec,
    f0: &StateVec,
    grid: TimeGrid,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    if cfg.audit_first {
        let report = audit_assumptions(model, PRESOLVE_AUDIT_SAMPLES, PRESOLVE_AUDIT_SEED);
        if !report.all_passed() {
            return Err(Error::AssumptionViolation(format!(
                "audit failed: {}",
                report.failed().join(", ")
            )));
        }
    }
    solve_with(model, f0, grid, cfg)
}

/// ℓ¹ distance per node between the trajectory and the right side of the
/// integral form `f0 + ∫(Q⁺ − Q⁻) + ∫(a(‖Λf‖ + ∫Δ) − a(‖Λf0‖))Λf`, both
/// integrals by the trapezoid rule.
pub fn residual_integral_form<M: CollisionModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
    f0: &StateVec,
) -> Result<Vec<f64>> {
    let grid = traj.grid();
    let lambda = model.lambda();
    let w = lambda.weights();
    let k = w.len();
    let a_f0 = model.a_env().eval(moment(lambda, 1, f0)?);
    let cum = cumulative_delta(model, traj)?;
    let rates: Vec<Vec<f64>> = traj
        .states()
        .par_iter()
        .enumerate()
        .map(|(m, g)| {
            let (gain, loss) = model.gain_loss_at(m, g)?;
            let corr = model.a_env().eval(moment(lambda, 1, g)? + cum[m]) - a_f0;
            Ok(gain
                .as_slice()
                .iter()
                .zip(loss.as_slice())
                .zip(g.as_slice())
                .enumerate()
                .map(|(idx, ((p, q), v))| p - q + corr * w[idx % k] * v)
                .collect())
        })
        .collect::<Result<_>>()?;
    let h = grid.h();
    let mut rhs = f0.as_slice().to_vec();
    let mut out = Vec::with_capacity(grid.nodes());
    out.push(l1_signed(&rhs, traj.state(0).as_slice()));
    for m in 1..grid.nodes() {
        for (idx, v) in rhs.iter_mut().enumerate() {
            *v += 0.5 * h * (rates[m - 1][idx] + rates[m][idx]);
        }
        out.push(l1_signed(&rhs, traj.state(m).as_slice()));
    }
    Ok(out)
}

fn l1_signed(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Sup-norm over nodes of the ℓ¹ distance between two trajectories.
pub fn sup_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch(
            "trajectories use different grids".into(),
        ));
    }
    let mut sup = 0.0f64;
    for (x, y) in a.states().iter().zip(b.states()) {
        sup = sup.max(x.l1_distance(y)?);
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{Envelope, KernelSpec};
    use crate::space::{cone_norm, leq, semigroup_apply};

    fn constant_model(k: usize) -> ModelSpec {
        ModelSpec::with_defaults(KernelSpec::constant(1.0).unwrap(), k, 1.0).unwrap()
    }

    #[test]
    fn b_operator_example() {
        // gain (0, .5, 1, .5), loss (2, 2, 0, 0), a = 5, Λg = (2, 3, 0, 0)
        let expected = [0.0 - 2.0 + 5.0 * 2.0, 0.5 - 2.0 + 5.0 * 3.0, 1.0, 0.5];
        let m = constant_model(4);
        let g = StateVec::from_sizes(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let (b, clamped) = b_operator(&m, 0, &g, 0.0).unwrap();
        assert_eq!(b.as_slice(), &expected);
        assert_eq!(clamped, 0);
        let (z, _) = b_operator(&m, 0, &StateVec::zeros(4, 1), 3.0).unwrap();
        assert!(z.is_zero());
        let (more, _) = b_operator(&m, 0, &g, 0.7).unwrap();
        assert!(leq(&b, &more).unwrap());
    }

    #[test]
    fn b_operator_rejects_broken_envelope() {
        let m = constant_model(4).with_envelopes(Envelope::zero(), Envelope::zero());
        let g = StateVec::from_sizes(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            b_operator(&m, 0, &g, 0.0),
            Err(Error::AssumptionViolation(_))
        ));
    }

    #[test]
    fn cumulative_delta_on_constant_trajectory() {
        let m = constant_model(4);
        let g = StateVec::from_sizes(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let grid = TimeGrid::new(1.5, 30).unwrap();
        let cum = cumulative_delta(&m, &Trajectory::constant(grid, &g)).unwrap();
        for (mi, c) in cum.iter().enumerate() {
            let exact = grid.t(mi) * 2.0;
            assert!((c - exact).abs() <= 1e-13 * exact.max(1.0));
        }
        let zero = cumulative_delta(&m, &Trajectory::zeros(grid, 4, 1)).unwrap();
        assert!(zero.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn trapezoid_refinement_is_second_order() {
        let f = |t: f64| (2.0 * t).sin() + 1.5;
        let exact = |t: f64| t * 1.5 + (1.0 - (2.0 * t).cos()) / 2.0;
        let err = |m: usize| {
            let h = 1.0 / m as f64;
            let v: Vec<f64> = (0..=m).map(|i| f(i as f64 * h)).collect();
            (trapezoid_cumulative(&v, h)[m] - exact(1.0)).abs()
        };
        let order = (err(64) / err(128)).log2();
        assert!(order > 1.9 && order < 2.1, "order {order}");
    }

    #[test]
    fn first_sweep_from_zero_is_free_flow() {
        let m = constant_model(6);
        let f0 = StateVec::monodisperse(6, 1, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let zeros = Trajectory::zeros(grid, 6, 1);
        let (f2, _) = picard_sweep(&m, &f0, &zeros, &zeros, &[0.0; 17], 2.0).unwrap();
        assert_eq!(f2, free_trajectory(&m, &f0, grid, 2.0).unwrap());
        // the discrete free flow stays below the exact semigroup bound
        for (mi, s) in f2.states().iter().enumerate() {
            let bound = semigroup_apply(2.0, m.lambda(), grid.t(mi), &f0).unwrap();
            assert!(s.as_slice()[0] <= bound.as_slice()[0] * (1.0 + 1e-3) + 1e-300);
            let scale = (-2.0 * 1.0 * grid.t(mi)).exp();
            assert!(leq(s, &f0.scale(scale).unwrap()).unwrap());
        }
        let z = StateVec::zeros(6, 1);
        let (zz, _) = picard_sweep(&m, &z, &zeros, &zeros, &[0.0; 17], 2.0).unwrap();
        assert!(zz.states().iter().all(StateVec::is_zero));
    }

    #[test]
    fn one_sweep_dominates_free_flow() {
        let m = constant_model(8);
        let f0 = StateVec::monodisperse(8, 1, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let it = picard_iterates(&m, &f0, grid, 2.0, 3).unwrap();
        for (a, b) in it[1].states().iter().zip(it[2].states()) {
            assert!(leq(a, b).unwrap());
        }
    }

    #[test]
    fn oversized_step_is_refused() {
        let m = constant_model(8);
        let f0 = StateVec::monodisperse(8, 1, 1.0).unwrap();
        let grid = TimeGrid::new(10.0, 4).unwrap();
        let cfg = SolverConfig {
            audit_first: false,
            ..Default::default()
        };
        assert!(matches!(
            solve(&m, &f0, grid, &cfg),
            Err(Error::StepTooLarge(_))
        ));
    }

    #[test]
    fn degenerate_data() {
        let m = constant_model(8);
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let cfg = SolverConfig::default();
        let r = solve(&m, &StateVec::zeros(8, 1), grid, &cfg).unwrap();
        assert_eq!(r.iterations_used, 0);
        assert!(r.trajectory.states().iter().all(StateVec::is_zero));

        let still = ModelSpec::with_defaults(KernelSpec::constant(0.0).unwrap(), 8, 1.0).unwrap();
        let f0 = StateVec::monodisperse(8, 1, 1.0).unwrap();
        let r = solve(&still, &f0, grid, &cfg).unwrap();
        assert_eq!(r.a_f0, 0.0);
        assert!(r.trajectory.states().iter().all(|s| s == &f0));
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            max_iters: 2,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            tol_rel: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn small_solve_converges_and_conserves_mass() {
        let m = constant_model(16);
        let f0 = StateVec::monodisperse(16, 1, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let r = solve(&m, &f0, grid, &SolverConfig::default()).unwrap();
        assert_eq!(r.order_violations(), 0);
        assert!(r.sweeps.iter().all(SweepRecord::bounds_hold));
        for s in r.trajectory.states() {
            let mass: f64 = s
                .as_slice()
                .iter()
                .enumerate()
                .map(|(i, v)| (i + 1) as f64 * v)
                .sum();
            assert!((mass - 1.0).abs() < 1e-6);
        }
        let n = cone_norm(r.trajectory.last());
        assert!((n - 1.0 / 1.5).abs() < 1e-3, "N(1) = {n}");
    }
}
