//! JSON run configuration (`"schema": "conekit/1"`).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::kinetics::{
    default_envelopes, Envelope, KernelFamily, KernelSpec, Lambda1Choice, ModelSpec, RateTable,
};
use crate::solver::{SolverConfig, TimeGrid};
use crate::space::{DiagonalOperator, StateVec};
use crate::transport::TransportSpec;

pub const SCHEMA: &str = "conekit/1";
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub model: ModelConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kernel: KernelConfig,
    #[serde(default = "one")]
    pub lambda0: f64,
    pub sizes: usize,
    #[serde(default)]
    pub envelopes: Option<EnvelopeConfig>,
    #[serde(default)]
    pub spatial: Option<SpatialConfig>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Constant {
        kappa: f64,
    },
    Additive,
    Multiplicative,
    Tabulated {
        #[serde(default)]
        rates: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        path: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub a: Envelope,
    pub rho: Envelope,
    #[serde(default = "lambda1_default")]
    pub lambda1: Lambda1Choice,
}

fn lambda1_default() -> Lambda1Choice {
    Lambda1Choice::Lambda
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialConfig {
    pub cells: usize,
    #[serde(default)]
    pub speed: f64,
    #[serde(default)]
    pub modulation: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// `n0` monomers, scaled per cell by `profile` when given.
    Monodisperse {
        n0: f64,
        #[serde(default)]
        profile: Option<Vec<f64>>,
    },
    /// Flattened `sizes x cells`, size-major within each cell.
    Vector(Vec<f64>),
    /// JSON array file in the `vector` layout, relative to the config file.
    File(PathBuf),
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Monodisperse {
            n0: 1.0,
            profile: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Fine-grid steps per solver step.
    pub refine: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { refine: 8 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub trajectory: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("conekit-out"),
            trajectory: false,
        }
    }
}

/// Everything a run needs, validated.
#[derive(Debug, Clone)]
pub struct Run {
    pub model: ModelSpec,
    pub transport: Option<TransportSpec>,
    pub f0: StateVec,
    pub grid: TimeGrid,
    pub solver: SolverConfig,
    pub audit: AuditConfig,
    pub oracle: OracleConfig,
    pub outputs: OutputConfig,
}

fn invalid(e: Error) -> Error {
    match e {
        Error::InvalidConfig(_) | Error::InvalidKernel(_) | Error::Io { .. } => e,
        other => Error::InvalidConfig(other.to_string()),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if cfg.schema != SCHEMA {
            return Err(Error::InvalidConfig(format!(
                "schema must be \"{SCHEMA}\", got \"{}\"",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_json(&text)?, base))
    }

    /// Builds the model, datum and grid. Relative paths resolve against `base`.
    pub fn resolve(&self, base: &Path) -> Result<Run> {
        self.resolve_inner(base).map_err(invalid)
    }

    fn resolve_inner(&self, base: &Path) -> Result<Run> {
        let mc = &self.model;
        if !(mc.lambda0.is_finite() && mc.lambda0 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda0 must be > 0, got {}",
                mc.lambda0
            )));
        }
        if mc.sizes == 0 {
            return Err(Error::InvalidConfig("sizes must be >= 1".into()));
        }
        let family = match &mc.kernel {
            KernelConfig::Constant { kappa } => KernelFamily::Constant { kappa: *kappa },
            KernelConfig::Additive => KernelFamily::Additive,
            KernelConfig::Multiplicative => KernelFamily::Multiplicative,
            KernelConfig::Tabulated { rates, path } => match (rates, path) {
                (Some(r), None) => KernelFamily::Tabulated(RateTable::from_matrix(r)?),
                (None, Some(p)) => {
                    KernelFamily::Tabulated(RateTable::from_csv_path(&base.join(p), mc.sizes)?)
                }
                _ => {
                    return Err(Error::InvalidConfig(
                        "tabulated kernel needs exactly one of `rates` or `path`".into(),
                    ))
                }
            },
        };
        let mut kernel = KernelSpec::new(family)?;
        let cells = match &mc.spatial {
            Some(sp) => {
                if let Some(m) = &sp.modulation {
                    if m.len() != sp.cells {
                        return Err(Error::InvalidConfig(format!(
                            "modulation has {} entries for {} cells",
                            m.len(),
                            sp.cells
                        )));
                    }
                    kernel = kernel.with_modulation(m.clone())?;
                }
                sp.cells
            }
            None => 1,
        };
        let transport = match &mc.spatial {
            Some(sp) if sp.speed != 0.0 || sp.cells >= 2 => {
                Some(TransportSpec::new(sp.cells, sp.speed)?)
            }
            _ => None,
        };
        let (a_env, rho_env, l1) = match &mc.envelopes {
            Some(e) => (e.a, e.rho, e.lambda1),
            None => {
                let d = default_envelopes(&kernel, mc.lambda0)?;
                (d.a_env, d.rho_env, d.lambda1)
            }
        };
        // re-validate user-supplied envelope coefficients
        let a_env = Envelope::new(a_env.intercept, a_env.slope)?;
        let rho_env = Envelope::new(rho_env.intercept, rho_env.slope)?;
        let lambda = DiagonalOperator::affine(mc.lambda0, mc.sizes)?;
        let lambda1 = match l1 {
            Lambda1Choice::Lambda => lambda.clone(),
            Lambda1Choice::LambdaSquared => lambda.squared()?,
        };
        let model = ModelSpec::new(kernel, lambda, lambda1, a_env, rho_env)?;

        let f0 = match &self.initial {
            InitialConfig::Monodisperse { n0, profile } => {
                let weights = match profile {
                    Some(p) if p.len() != cells => {
                        return Err(Error::InvalidConfig(format!(
                            "profile has {} entries for {cells} cells",
                            p.len()
                        )))
                    }
                    Some(p) => p.clone(),
                    None => vec![1.0; cells],
                };
                let mut data = vec![0.0; mc.sizes * cells];
                for (x, w) in weights.iter().enumerate() {
                    data[x * mc.sizes] = n0 * w;
                }
                StateVec::new(mc.sizes, cells, data)?
            }
            InitialConfig::Vector(v) => StateVec::new(mc.sizes, cells, v.clone())?,
            InitialConfig::File(p) => {
                let p = base.join(p);
                let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                let v: Vec<f64> = serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?;
                StateVec::new(mc.sizes, cells, v)?
            }
        };
        let grid = TimeGrid::new(self.grid.horizon, self.grid.steps)?;
        self.solver.validate()?;
        if self.audit.samples == 0 {
            return Err(Error::InvalidConfig("audit.samples must be >= 1".into()));
        }
        if self.oracle.refine == 0 {
            return Err(Error::InvalidConfig("oracle.refine must be >= 1".into()));
        }
        Ok(Run {
            model,
            transport,
            f0,
            grid,
            solver: self.solver,
            audit: self.audit,
            oracle: self.oracle,
            outputs: self.outputs.clone(),
        })
    }
}
