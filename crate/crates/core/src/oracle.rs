//! Reference solutions that do not go through the monotone reformulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::ModelSpec;
use crate::solver::{TimeGrid, Trajectory};
use crate::space::{cone_norm, StateVec};
use crate::transport::{shift_apply, TransportSpec};

/// Clamped mass allowed per unit of initial number.
pub const CLAMP_BUDGET: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct OracleRun {
    pub trajectory: Trajectory,
    pub clamped_entries: usize,
    pub clamped_mass: f64,
}

struct Rk4<'a> {
    model: &'a ModelSpec,
    cells: usize,
    budget: f64,
    clamped_entries: usize,
    clamped_mass: f64,
}

impl Rk4<'_> {
    fn field(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.model.net_rate(y, self.cells)
    }

    fn step(&mut self, y: &mut [f64], h: f64, node: usize) -> Result<()> {
        let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, d)| x + s * d).collect()
        };
        let k1 = self.field(y)?;
        let k2 = self.field(&axpy(y, 0.5 * h, &k1))?;
        let k3 = self.field(&axpy(y, 0.5 * h, &k2))?;
        let k4 = self.field(&axpy(y, h, &k3))?;
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if !y[i].is_finite() {
                return Err(Error::NonfiniteState { node });
            }
            if y[i] < 0.0 {
                self.clamped_entries += 1;
                self.clamped_mass -= y[i];
                y[i] = 0.0;
            }
        }
        if self.clamped_mass > self.budget {
            return Err(Error::ClampBudgetExceeded {
                clamped: self.clamped_mass,
                budget: self.budget,
            });
        }
        Ok(())
    }
}

/// Classical RK4 on `f' = Q⁺(f) − Q⁻(f)` over every step of `grid`.
pub fn rk4_solve(model: &ModelSpec, f0: &StateVec, grid: TimeGrid) -> Result<OracleRun> {
    let mut rk = Rk4 {
        model,
        cells: f0.cells(),
        budget: CLAMP_BUDGET * cone_norm(f0),
        clamped_entries: 0,
        clamped_mass: 0.0,
    };
    let (k, cells) = f0.shape();
    let mut y = f0.as_slice().to_vec();
    let mut states = vec![f0.clone()];
    for m in 1..grid.nodes() {
        rk.step(&mut y, grid.h(), m)?;
        states.push(StateVec::new(k, cells, y.clone())?);
    }
    Ok(OracleRun {
        trajectory: Trajectory::new(grid, states)?,
        clamped_entries: rk.clamped_entries,
        clamped_mass: rk.clamped_mass,
    })
}

/// Keeps the nodes of `fine` that coincide with the nodes of `coarse`.
pub fn restrict(fine: &Trajectory, coarse: TimeGrid) -> Result<Trajectory> {
    let fg = fine.grid();
    if fg.horizon() != coarse.horizon() || !fg.steps().is_multiple_of(coarse.steps()) {
        return Err(Error::GridMismatch(format!(
            "{} steps over {} do not refine {} steps over {}",
            fg.steps(),
            fg.horizon(),
            coarse.steps(),
            coarse.horizon()
        )));
    }
    let ratio = fg.steps() / coarse.steps();
    let states = (0..coarse.nodes())
        .map(|m| fine.state(m * ratio).clone())
        .collect();
    Trajectory::new(coarse, states)
}

/// Size-`k` density at time `t` for constant kernel `kappa` from `n0` monomers.
pub fn closed_form_constant_kernel(kappa: f64, n0: f64, k: usize, t: f64) -> f64 {
    assert!(k >= 1, "cluster sizes start at 1");
    let tau = 0.5 * kappa * n0 * t;
    n0 * tau.powi(k as i32 - 1) / (1.0 + tau).powi(k as i32 + 1)
}

/// Strang splitting: per coarse step, RK4 collisions for `h/2`, the exact
/// integer shift, RK4 collisions for `h/2`. Each half step uses `substeps`
/// RK4 steps. Returns the coarse-grid trajectory.
pub fn split_step_transport_oracle(
    model: &ModelSpec,
    transport: &TransportSpec,
    f0: &StateVec,
    grid: TimeGrid,
    substeps: usize,
) -> Result<OracleRun> {
    if f0.cells() != transport.cells() {
        return Err(Error::ShapeMismatch {
            left: (f0.sizes(), transport.cells()),
            right: f0.shape(),
        });
    }
    let shift = transport.shift_per_step(&grid)?;
    let substeps = substeps.max(1);
    let (k, cells) = f0.shape();
    let mut rk = Rk4 {
        model,
        cells,
        budget: CLAMP_BUDGET * cone_norm(f0),
        clamped_entries: 0,
        clamped_mass: 0.0,
    };
    let dt = 0.5 * grid.h() / substeps as f64;
    let mut y = f0.as_slice().to_vec();
    let mut states = vec![f0.clone()];
    for m in 1..grid.nodes() {
        for _ in 0..substeps {
            rk.step(&mut y, dt, m)?;
        }
        let moved = shift_apply(&StateVec::new(k, cells, y)?, shift);
        y = moved.into_vec();
        for _ in 0..substeps {
            rk.step(&mut y, dt, m)?;
        }
        states.push(StateVec::new(k, cells, y.clone())?);
    }
    Ok(OracleRun {
        trajectory: Trajectory::new(grid, states)?,
        clamped_entries: rk.clamped_entries,
        clamped_mass: rk.clamped_mass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub sup: f64,
    pub per_node: Vec<f64>,
    /// Largest amount by which the first trajectory exceeds the second, in ℓ¹
    /// over the positive part.
    pub max_excess: f64,
}

pub fn compare(a: &Trajectory, b: &Trajectory) -> Result<CompareReport> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch(
            "trajectories use different grids".into(),
        ));
    }
    let mut per_node = Vec::with_capacity(a.grid().nodes());
    let mut max_excess = 0.0f64;
    for (x, y) in a.states().iter().zip(b.states()) {
        per_node.push(x.l1_distance(y)?);
        let excess: f64 = x
            .as_slice()
            .iter()
            .zip(y.as_slice())
            .map(|(p, q)| (p - q).max(0.0))
            .sum();
        max_excess = max_excess.max(excess);
    }
    let sup = per_node.iter().copied().fold(0.0, f64::max);
    Ok(CompareReport {
        sup,
        per_node,
        max_excess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{KernelFamily, KernelSpec};

    #[test]
    fn closed_form_values() {
        assert_eq!(closed_form_constant_kernel(1.0, 1.0, 1, 0.0), 1.0);
        assert_eq!(closed_form_constant_kernel(1.0, 1.0, 3, 0.0), 0.0);
        assert_eq!(closed_form_constant_kernel(1.0, 1.0, 1, 2.0), 0.25);
        assert_eq!(closed_form_constant_kernel(1.0, 1.0, 2, 2.0), 0.125);
        let n: f64 = (1..=200)
            .map(|k| closed_form_constant_kernel(1.0, 1.0, k, 2.0))
            .sum();
        assert!((n - 0.5).abs() < 1e-12);
    }

    #[test]
    fn closed_form_conserves_mass() {
        for t in [0.25, 0.5, 1.0, 2.0] {
            let mass: f64 = (1..=256)
                .map(|k| k as f64 * closed_form_constant_kernel(1.3, 0.8, k, t))
                .sum();
            assert!((mass - 0.8).abs() < 1e-12, "t = {t}: {mass}");
        }
    }

    #[test]
    fn rk4_of_zero_is_zero() {
        let m = ModelSpec::with_defaults(KernelSpec::constant(1.0).unwrap(), 8, 1.0).unwrap();
        let run = rk4_solve(&m, &StateVec::zeros(8, 1), TimeGrid::new(1.0, 10).unwrap()).unwrap();
        assert!(run.trajectory.states().iter().all(StateVec::is_zero));
    }

    #[test]
    fn rk4_additive_conserves_mass() {
        let m = ModelSpec::with_defaults(KernelSpec::new(KernelFamily::Additive).unwrap(), 32, 1.0)
            .unwrap();
        let f0 = StateVec::monodisperse(32, 1, 1.0).unwrap();
        let run = rk4_solve(&m, &f0, TimeGrid::new(1.0, 1024).unwrap()).unwrap();
        for s in run.trajectory.states() {
            let mass: f64 = s
                .as_slice()
                .iter()
                .enumerate()
                .map(|(i, v)| (i + 1) as f64 * v)
                .sum();
            assert!((mass - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn restriction_picks_coinciding_nodes() {
        let fine = TimeGrid::new(1.0, 8).unwrap();
        let states = (0..9)
            .map(|i| StateVec::from_sizes(vec![i as f64]).unwrap())
            .collect();
        let t = Trajectory::new(fine, states).unwrap();
        let r = restrict(&t, TimeGrid::new(1.0, 2).unwrap()).unwrap();
        let got: Vec<f64> = r.states().iter().map(|s| s.as_slice()[0]).collect();
        assert_eq!(got, vec![0.0, 4.0, 8.0]);
        assert!(restrict(&t, TimeGrid::new(1.0, 3).unwrap()).is_err());
    }

    #[test]
    fn compare_basics() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let f0 = StateVec::from_sizes(vec![1.0, 2.0]).unwrap();
        let a = Trajectory::constant(grid, &f0);
        let z = Trajectory::zeros(grid, 2, 1);
        assert_eq!(compare(&a, &a).unwrap().sup, 0.0);
        let r = compare(&z, &a).unwrap();
        assert_eq!(r.sup, 3.0);
        assert_eq!(r.max_excess, 0.0);
        assert_eq!(compare(&a, &z).unwrap().sup, r.sup);
        let other = Trajectory::zeros(TimeGrid::new(1.0, 5).unwrap(), 2, 1);
        assert!(matches!(compare(&a, &other), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn single_split_step_by_hand() {
        // two cells, one step, one substep per half: RK4(h/2) . shift . RK4(h/2)
        let kernel = KernelSpec::constant(1.0)
            .unwrap()
            .with_modulation(vec![0.5, 1.5])
            .unwrap();
        let m = ModelSpec::with_defaults(kernel, 4, 1.0).unwrap();
        let t = TransportSpec::new(2, 1.0).unwrap();
        let grid = TimeGrid::new(1.0, 1).unwrap();
        let f0 = StateVec::new(4, 2, vec![1.0, 0.0, 0.0, 0.0, 0.5, 0.2, 0.0, 0.0]).unwrap();
        let run = split_step_transport_oracle(&m, &t, &f0, grid, 1).unwrap();

        let half = TimeGrid::new(0.5, 1).unwrap();
        let a = rk4_solve(&m, &f0, half).unwrap().trajectory.last().clone();
        let b = shift_apply(&a, 1);
        let c = rk4_solve(&m, &b, half).unwrap().trajectory.last().clone();
        assert_eq!(run.trajectory.last(), &c);
    }
}
