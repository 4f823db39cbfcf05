//! Per-run ledgers of the conservation/dissipation identity and the moment
//! growth bound, with CSV output.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::CollisionModel;
use crate::solver::{cumulative_delta, SolveResult, Trajectory};
use crate::space::{cone_norm, moment, StateVec};

/// Tolerances shared by tests, acceptance checks and run summaries.
pub mod tol {
    /// `|‖Λf‖ + ∫Δ − ‖Λf0‖|` relative to `‖Λf0‖`.
    pub const EQ5_REL: f64 = 1e-5;
    /// Most negative second-moment margin, relative to `‖Λ²f0‖`.
    pub const BOUND7C_REL: f64 = 1e-6;
    /// Order checks between iterates.
    pub const ORDER_REL: f64 = crate::solver::ORDER_SLACK;
    pub const INTEGRAL_RESIDUAL: f64 = 5e-6;
    pub const NUMBER_ABS: f64 = 2e-3;
    pub const MASS_ABS: f64 = 1e-6;
    pub const ORACLE_CONSTANT: f64 = 2e-3;
    pub const ORACLE_ADDITIVE: f64 = 5e-3;
    pub const ORACLE_SELF_CHECK: f64 = 1e-6;
    pub const TRANSPORT: f64 = 1e-3;
    pub const COMMUTATION: f64 = 1e-12;
    pub const MIN_ORDER: f64 = 1.8;
    /// Residuals at or below this fraction of `‖Λf0‖` are at the iteration
    /// floor, where no convergence order can be read off.
    pub const REFINEMENT_FLOOR_REL: f64 = 1e-9;
    pub const RUNTIME_SECS: f64 = 10.0;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub t: f64,
    #[serde(rename = "N")]
    pub n: f64,
    pub mass: f64,
    pub lam_norm: f64,
    pub cum_delta: f64,
    pub eq5_residual: f64,
    pub bound7c_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep: usize,
    pub sup_increment: f64,
    pub order_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLedger {
    pub nodes: Vec<NodeRow>,
    pub sweeps: Vec<SweepRow>,
    pub lam_norm0: f64,
    pub lam2_norm0: f64,
}

pub const NODE_HEADER: [&str; 7] = [
    "t",
    "N",
    "mass",
    "lam_norm",
    "cum_delta",
    "eq5_residual",
    "bound7c_margin",
];
pub const SWEEP_HEADER: [&str; 3] = ["sweep", "sup_increment", "order_violations"];

/// `Σ_k k g_k` over all cells, with size `k = index + 1`.
pub fn mass(g: &StateVec) -> f64 {
    let k = g.sizes();
    g.as_slice()
        .iter()
        .enumerate()
        .map(|(i, v)| ((i % k) + 1) as f64 * v)
        .sum()
}

/// Signed `‖Λf(t)‖ + ∫₀ᵗΔ − ‖Λf0‖` per node.
pub fn eq5_ledger<M: CollisionModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
    f0: &StateVec,
) -> Result<Vec<f64>> {
    let cum = cumulative_delta(model, traj)?;
    let l0 = moment(model.lambda(), 1, f0)?;
    traj.states()
        .iter()
        .zip(&cum)
        .map(|(s, c)| Ok(moment(model.lambda(), 1, s)? + c - l0))
        .collect()
}

/// `‖Λ²f0‖ exp(ρ(‖Λ₁f0‖) t) − ‖Λ²f(t)‖` per node.
pub fn bound7c_margin<M: CollisionModel + ?Sized>(
    model: &M,
    traj: &Trajectory,
    f0: &StateVec,
) -> Result<Vec<f64>> {
    let l2 = moment(model.lambda(), 2, f0)?;
    let rho = model.rho_env().eval(moment(model.lambda1(), 1, f0)?);
    let grid = traj.grid();
    traj.states()
        .iter()
        .enumerate()
        .map(|(m, s)| {
            let t = grid.t(m);
            let bound = if t == 0.0 { l2 } else { l2 * (rho * t).exp() };
            Ok(bound - moment(model.lambda(), 2, s)?)
        })
        .collect()
}

impl RunLedger {
    pub fn build<M: CollisionModel + ?Sized>(
        model: &M,
        result: &SolveResult,
        f0: &StateVec,
    ) -> Result<Self> {
        let traj = &result.trajectory;
        let grid = traj.grid();
        let cum = cumulative_delta(model, traj)?;
        let eq5 = eq5_ledger(model, traj, f0)?;
        let b7c = bound7c_margin(model, traj, f0)?;
        let mut nodes = Vec::with_capacity(grid.nodes());
        for (m, s) in traj.states().iter().enumerate() {
            nodes.push(NodeRow {
                t: grid.t(m),
                n: cone_norm(s),
                mass: mass(s),
                lam_norm: moment(model.lambda(), 1, s)?,
                cum_delta: cum[m],
                eq5_residual: eq5[m],
                bound7c_margin: b7c[m],
            });
        }
        let sweeps = result
            .sweeps
            .iter()
            .map(|r| SweepRow {
                sweep: r.sweep,
                sup_increment: r.sup_increment,
                order_violations: r.order_violations,
            })
            .collect();
        Ok(Self {
            nodes,
            sweeps,
            lam_norm0: moment(model.lambda(), 1, f0)?,
            lam2_norm0: moment(model.lambda(), 2, f0)?,
        })
    }

    pub fn max_abs_eq5(&self) -> f64 {
        self.nodes
            .iter()
            .map(|r| r.eq5_residual.abs())
            .fold(0.0, f64::max)
    }

    pub fn min_bound7c(&self) -> f64 {
        self.nodes
            .iter()
            .map(|r| r.bound7c_margin)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn order_violations(&self) -> usize {
        self.sweeps.iter().map(|s| s.order_violations).sum()
    }

    pub fn eq5_passes(&self) -> bool {
        self.max_abs_eq5() <= tol::EQ5_REL * self.lam_norm0
    }

    pub fn bound7c_passes(&self) -> bool {
        self.nodes.is_empty() || self.min_bound7c() >= -tol::BOUND7C_REL * self.lam2_norm0
    }

    pub fn cum_delta_monotone(&self) -> bool {
        self.nodes
            .windows(2)
            .all(|w| w[0].cum_delta <= w[1].cum_delta)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub(crate) fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidConfig(format!("csv encoding: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv encoding: {e}")))
}

/// Writes a CSV file atomically: readers see either nothing or the whole file.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    write_atomic(path, &csv_bytes(header, rows)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

pub fn node_csv(ledger: &RunLedger) -> Result<Vec<u8>> {
    csv_bytes(
        &NODE_HEADER,
        ledger.nodes.iter().map(|r| {
            [
                r.t,
                r.n,
                r.mass,
                r.lam_norm,
                r.cum_delta,
                r.eq5_residual,
                r.bound7c_margin,
            ]
            .into_iter()
            .map(fmt)
        }),
    )
}

pub fn sweep_csv(ledger: &RunLedger) -> Result<Vec<u8>> {
    csv_bytes(
        &SWEEP_HEADER,
        ledger.sweeps.iter().map(|r| {
            [
                r.sweep.to_string(),
                fmt(r.sup_increment),
                r.order_violations.to_string(),
            ]
        }),
    )
}

/// Node table to `path`.
pub fn emit_csv(ledger: &RunLedger, path: &Path) -> Result<()> {
    write_atomic(path, &node_csv(ledger)?)
}

pub fn emit_sweep_csv(ledger: &RunLedger, path: &Path) -> Result<()> {
    write_atomic(path, &sweep_csv(ledger)?)
}

fn parse_table<T: for<'de> Deserialize<'de>>(bytes: &[u8], header: &[&str]) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let got = rdr
        .headers()
        .map_err(|e| Error::InvalidConfig(format!("ledger header: {e}")))?
        .clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::InvalidConfig(format!(
            "ledger header {:?} does not match {:?}",
            got.iter().collect::<Vec<_>>(),
            header
        )));
    }
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::InvalidConfig(format!("ledger row: {e}"))))
        .collect()
}

pub fn parse_node_csv(bytes: &[u8]) -> Result<Vec<NodeRow>> {
    parse_table(bytes, &NODE_HEADER)
}

pub fn parse_sweep_csv(bytes: &[u8]) -> Result<Vec<SweepRow>> {
    parse_table(bytes, &SWEEP_HEADER)
}

/// One line: overall verdict, then each invariant family.
pub fn emit_summary(ledger: &RunLedger) -> String {
    let v = |ok: bool| if ok { "PASS" } else { "FAIL" };
    let eq5 = ledger.eq5_passes();
    let b7c = ledger.bound7c_passes();
    let order = ledger.order_violations() == 0;
    let cum = ledger.cum_delta_monotone();
    format!(
        "{} eq5={} (max {:e}) bound7c={} (min {:e}) order={} ({} violations) cum_delta={} nodes={} sweeps={}",
        v(eq5 && b7c && order && cum),
        v(eq5),
        ledger.max_abs_eq5(),
        v(b7c),
        if ledger.nodes.is_empty() { 0.0 } else { ledger.min_bound7c() },
        v(order),
        ledger.order_violations(),
        v(cum),
        ledger.nodes.len(),
        ledger.sweeps.len()
    )
}

/// Observed convergence order from errors on grids `ratio` apart.
pub fn observed_order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Refinement {
    /// The coarse error is already at the iteration floor.
    AtFloor {
        coarse: f64,
        floor: f64,
    },
    Order(f64),
}

impl Refinement {
    pub fn assess(coarse: f64, fine: f64, ratio: f64, floor: f64) -> Self {
        if coarse <= floor {
            Refinement::AtFloor { coarse, floor }
        } else {
            Refinement::Order(observed_order(coarse, fine, ratio))
        }
    }

    pub fn passes(&self) -> bool {
        match self {
            Refinement::AtFloor { .. } => true,
            Refinement::Order(p) => *p >= tol::MIN_ORDER,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{KernelSpec, ModelSpec};
    use crate::solver::{solve, SolverConfig, TimeGrid};

    fn three_node() -> RunLedger {
        RunLedger {
            nodes: vec![
                NodeRow {
                    t: 0.0,
                    n: 1.0,
                    mass: 1.0,
                    lam_norm: 2.0,
                    cum_delta: 0.0,
                    eq5_residual: 0.0,
                    bound7c_margin: 0.0,
                },
                NodeRow {
                    t: 0.5,
                    n: 0.8,
                    mass: 1.0,
                    lam_norm: 1.8,
                    cum_delta: 0.2,
                    eq5_residual: 1e-17,
                    bound7c_margin: 3.1,
                },
                NodeRow {
                    t: 1.0,
                    n: 2.0 / 3.0,
                    mass: 0.9999999999999999,
                    lam_norm: 5.0 / 3.0,
                    cum_delta: 1.0 / 3.0,
                    eq5_residual: -2.220446049250313e-16,
                    bound7c_margin: 25.556,
                },
            ],
            sweeps: vec![
                SweepRow {
                    sweep: 1,
                    sup_increment: 0.25,
                    order_violations: 0,
                },
                SweepRow {
                    sweep: 2,
                    sup_increment: 1.5e-9,
                    order_violations: 0,
                },
            ],
            lam_norm0: 2.0,
            lam2_norm0: 4.0,
        }
    }

    #[test]
    fn empty_ledger_is_header_only() {
        let l = RunLedger::default();
        assert_eq!(
            node_csv(&l).unwrap(),
            b"t,N,mass,lam_norm,cum_delta,eq5_residual,bound7c_margin\n"
        );
        assert_eq!(
            sweep_csv(&l).unwrap(),
            b"sweep,sup_increment,order_violations\n"
        );
        assert!(parse_node_csv(&node_csv(&l).unwrap()).unwrap().is_empty());
    }

    #[test]
    fn golden_three_node_ledger() {
        let golden = include_bytes!("../tests/golden/ledger_3node.csv");
        assert_eq!(node_csv(&three_node()).unwrap(), golden.as_slice());
        let golden = include_bytes!("../tests/golden/sweeps_2.csv");
        assert_eq!(sweep_csv(&three_node()).unwrap(), golden.as_slice());
    }

    #[test]
    fn round_trip() {
        let l = three_node();
        assert_eq!(parse_node_csv(&node_csv(&l).unwrap()).unwrap(), l.nodes);
        assert_eq!(parse_sweep_csv(&sweep_csv(&l).unwrap()).unwrap(), l.sweeps);
        assert!(parse_node_csv(b"t,N\n1,2\n").is_err());
    }

    #[test]
    fn atomic_emit_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ledger.csv");
        emit_csv(&three_node(), &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), node_csv(&three_node()).unwrap());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        let bad = dir.path().join("missing").join("ledger.csv");
        assert!(matches!(
            emit_csv(&three_node(), &bad),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn zero_run_passes() {
        let m = ModelSpec::with_defaults(KernelSpec::constant(1.0).unwrap(), 8, 1.0).unwrap();
        let f0 = StateVec::zeros(8, 1);
        let r = solve(
            &m,
            &f0,
            TimeGrid::new(1.0, 4).unwrap(),
            &SolverConfig::default(),
        )
        .unwrap();
        let l = RunLedger::build(&m, &r, &f0).unwrap();
        assert!(l
            .nodes
            .iter()
            .all(|n| n.eq5_residual == 0.0 && n.bound7c_margin == 0.0));
        assert!(emit_summary(&l).starts_with("PASS"));
    }

    #[test]
    fn benchmark_margins() {
        let m = ModelSpec::with_defaults(KernelSpec::constant(1.0).unwrap(), 32, 1.0).unwrap();
        let f0 = StateVec::monodisperse(32, 1, 1.0).unwrap();
        let r = solve(
            &m,
            &f0,
            TimeGrid::new(1.0, 64).unwrap(),
            &SolverConfig::default(),
        )
        .unwrap();
        let l = RunLedger::build(&m, &r, &f0).unwrap();
        assert_eq!(l.nodes[0].bound7c_margin, 0.0);
        assert_eq!(l.nodes[0].eq5_residual, 0.0);
        assert!(l.nodes[1..].iter().all(|n| n.bound7c_margin > 0.0));
        assert!(l.cum_delta_monotone());
        assert!(emit_summary(&l).starts_with("PASS"), "{}", emit_summary(&l));
    }

    #[test]
    fn refinement_assessment() {
        assert!(Refinement::assess(4e-4, 1e-4, 2.0, 1e-9).passes());
        assert!(!Refinement::assess(4e-4, 3e-4, 2.0, 1e-9).passes());
        assert!(matches!(
            Refinement::assess(1e-12, 2e-12, 4.0, 1e-9),
            Refinement::AtFloor { .. }
        ));
        assert!((observed_order(16.0, 1.0, 4.0) - 2.0).abs() < 1e-15);
    }
}
