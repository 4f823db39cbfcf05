#![allow(dead_code)]

use std::path::PathBuf;

use conekit::config::{Run, RunConfig};
use conekit::solver::SolverConfig;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

/// A bundled benchmark, resolved.
pub fn bench(name: &str) -> Run {
    let (cfg, base) = RunConfig::load(&config_path(name)).expect("bundled config parses");
    cfg.resolve(&base).expect("bundled config resolves")
}

/// Tolerances tight enough that the iteration floor sits far below the
/// discretization error being measured.
pub fn tight(cfg: &SolverConfig) -> SolverConfig {
    SolverConfig {
        tol_abs: 1e-14,
        tol_rel: 1e-13,
        max_iters: 1000,
        ..*cfg
    }
}
