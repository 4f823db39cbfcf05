//! Coagulation coupled to uniform advection on a periodic lattice.
//!
//! The shift group is exact only at grid times, so the time step must move
//! the profile a whole number of cells. Solving happens in the co-moving frame
//! `F(t) = U^{-t} f(t)`, where the collision operator becomes time dependent
//! through the cell modulation seen by each parcel.

use crate::error::{Error, Result};
use crate::kinetics::{audit_assumptions, CollisionModel, Envelope, ModelSpec};
use crate::solver::{self, SolveResult, SolverConfig, TimeGrid, Trajectory};
use crate::space::{DiagonalOperator, StateVec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportSpec {
    cells: usize,
    speed: f64,
}

impl TransportSpec {
    /// `speed` is in cells per unit time.
    pub fn new(cells: usize, speed: f64) -> Result<Self> {
        if cells < 2 {
            return Err(Error::Domain(format!(
                "transport needs at least 2 cells, got {cells}"
            )));
        }
        if !speed.is_finite() {
            return Err(Error::Domain(format!("speed must be finite, got {speed}")));
        }
        Ok(Self { cells, speed })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    /// Whole cells advanced per time step.
    pub fn shift_per_step(&self, grid: &TimeGrid) -> Result<i64> {
        let s = self.speed * grid.h();
        let rounded = s.round();
        if (s - rounded).abs() > 1e-9 * s.abs().max(1.0) {
            return Err(Error::IncompatibleGrid { shift: s });
        }
        Ok(rounded as i64)
    }
}

/// Moves the content of cell `x` to cell `x + steps (mod L)`.
pub fn shift_apply(g: &StateVec, steps: i64) -> StateVec {
    let (k, cells) = g.shape();
    let s = steps.rem_euclid(cells as i64) as usize;
    if s == 0 {
        return g.clone();
    }
    let src = g.as_slice();
    let mut out = vec![0.0; src.len()];
    for x in 0..cells {
        let y = (x + s) % cells;
        out[y * k..(y + 1) * k].copy_from_slice(&src[x * k..(x + 1) * k]);
    }
    StateVec::from_cone_parts(k, cells, out)
}

fn offset(node: usize, shift: i64, cells: usize) -> usize {
    (node as i64 * shift).rem_euclid(cells as i64) as usize
}

/// `U^{-t_m} Q⁺(U^{t_m} g)`, by literal conjugation.
pub fn conjugated_gain(
    model: &ModelSpec,
    shift: i64,
    node: usize,
    g: &StateVec,
) -> Result<StateVec> {
    let s = node as i64 * shift;
    Ok(shift_apply(&model.gain(&shift_apply(g, s))?, -s))
}

/// `U^{-t_m} Q⁻(U^{t_m} g)`, by literal conjugation.
pub fn conjugated_loss(
    model: &ModelSpec,
    shift: i64,
    node: usize,
    g: &StateVec,
) -> Result<StateVec> {
    let s = node as i64 * shift;
    Ok(shift_apply(&model.loss(&shift_apply(g, s))?, -s))
}

/// The co-moving-frame model. Conjugating a cell-local operator only rotates
/// the modulation, which is how it is evaluated here.
#[derive(Debug, Clone, Copy)]
pub struct Conjugated<'a> {
    model: &'a ModelSpec,
    shift: i64,
}

impl<'a> Conjugated<'a> {
    pub fn new(model: &'a ModelSpec, shift: i64) -> Self {
        Self { model, shift }
    }
}

impl CollisionModel for Conjugated<'_> {
    fn lambda(&self) -> &DiagonalOperator {
        self.model.lambda()
    }

    fn lambda1(&self) -> &DiagonalOperator {
        self.model.lambda1()
    }

    fn a_env(&self) -> Envelope {
        self.model.a_env()
    }

    fn rho_env(&self) -> Envelope {
        self.model.rho_env()
    }

    fn gain_loss_at(&self, node: usize, g: &StateVec) -> Result<(StateVec, StateVec)> {
        self.model
            .gain_loss_offset(g, offset(node, self.shift, g.cells()))
    }
}

/// Co-moving frame trajectory alongside the lab-frame result.
#[derive(Debug, Clone)]
pub struct MildSolution {
    /// `f[m] = U^{t_m} F[m]`
    pub result: SolveResult,
    pub frame: Trajectory,
    pub shift: i64,
}

pub fn solve_mild(
    model: &ModelSpec,
    transport: &TransportSpec,
    f0: &StateVec,
    grid: TimeGrid,
    cfg: &SolverConfig,
) -> Result<MildSolution> {
    if f0.cells() != transport.cells() {
        return Err(Error::ShapeMismatch {
            left: (f0.sizes(), transport.cells()),
            right: f0.shape(),
        });
    }
    let shift = transport.shift_per_step(&grid)?;
    if cfg.audit_first {
        let report = audit_assumptions(
            model,
            solver::PRESOLVE_AUDIT_SAMPLES,
            solver::PRESOLVE_AUDIT_SEED,
        );
        if !report.all_passed() {
            return Err(Error::AssumptionViolation(format!(
                "audit failed: {}",
                report.failed().join(", ")
            )));
        }
    }
    let mut result = solver::solve_with(&Conjugated::new(model, shift), f0, grid, cfg)?;
    let frame = result.trajectory.clone();
    let states = frame
        .states()
        .iter()
        .enumerate()
        .map(|(m, s)| shift_apply(s, m as i64 * shift))
        .collect();
    result.trajectory = Trajectory::new(grid, states)?;
    Ok(MildSolution {
        result,
        frame,
        shift,
    })
}
