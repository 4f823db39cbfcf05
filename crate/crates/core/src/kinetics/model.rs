use serde::{Deserialize, Serialize};

use super::kernel::{KernelFamily, KernelSpec};
use crate::error::{Error, Result};
use crate::space::{DiagonalOperator, StateVec};

/// Relative slack below zero tolerated in Δ before the model is rejected.
pub const DELTA_SLACK: f64 = 1e-12;

/// Linear envelope `x -> intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub intercept: f64,
    pub slope: f64,
}

impl Envelope {
    pub fn new(intercept: f64, slope: f64) -> Result<Self> {
        if !(intercept.is_finite() && slope.is_finite() && intercept >= 0.0 && slope >= 0.0) {
            return Err(Error::Domain(format!(
                "envelope coefficients must be finite and >= 0, got ({intercept}, {slope})"
            )));
        }
        Ok(Self { intercept, slope })
    }

    pub fn linear(slope: f64) -> Result<Self> {
        Self::new(0.0, slope)
    }

    pub fn zero() -> Self {
        Self {
            intercept: 0.0,
            slope: 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Which Λ₁ a default envelope set pairs with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda1Choice {
    Lambda,
    LambdaSquared,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefaultEnvelopes {
    pub a_env: Envelope,
    pub rho_env: Envelope,
    pub lambda1: Lambda1Choice,
}

/// Envelopes that bound the bundled kernels under `λ_k = λ₀ + k`, scaled by
/// the largest cell modulation.
pub fn default_envelopes(kernel: &KernelSpec, lambda0: f64) -> Result<DefaultEnvelopes> {
    if !(lambda0.is_finite() && lambda0 > 0.0) {
        return Err(Error::Domain(format!("lambda0 must be > 0, got {lambda0}")));
    }
    let m = kernel.max_modulation();
    let (a, rho, lambda1) = match kernel.family() {
        KernelFamily::Constant { kappa } => (
            kappa * m / (lambda0 * lambda0),
            kappa * m / lambda0,
            Lambda1Choice::Lambda,
        ),
        KernelFamily::Additive => (m / lambda0, 2.0 * m, Lambda1Choice::Lambda),
        KernelFamily::Multiplicative => (m, m, Lambda1Choice::LambdaSquared),
        KernelFamily::Tabulated(_) => return Err(Error::NoDefault("tabulated")),
    };
    Ok(DefaultEnvelopes {
        a_env: Envelope::linear(a)?,
        rho_env: Envelope::linear(rho)?,
        lambda1,
    })
}

/// Gain/loss pair evaluated at a time node. Homogeneous models ignore the node.
pub trait CollisionModel: Sync {
    fn lambda(&self) -> &DiagonalOperator;
    fn lambda1(&self) -> &DiagonalOperator;
    fn a_env(&self) -> Envelope;
    fn rho_env(&self) -> Envelope;

    fn gain_loss_at(&self, node: usize, g: &StateVec) -> Result<(StateVec, StateVec)>;

    fn gain_at(&self, node: usize, g: &StateVec) -> Result<StateVec> {
        Ok(self.gain_loss_at(node, g)?.0)
    }

    fn loss_at(&self, node: usize, g: &StateVec) -> Result<StateVec> {
        Ok(self.gain_loss_at(node, g)?.1)
    }

    fn delta_at(&self, node: usize, g: &StateVec) -> Result<f64> {
        let (gain, loss) = self.gain_loss_at(node, g)?;
        delta_from_parts(self.lambda(), &gain, &loss)
    }
}

/// `‖ΛQ⁻‖ − ‖ΛQ⁺‖`, raw (may be negative for models violating A2).
pub fn raw_delta(lambda: &DiagonalOperator, gain: &StateVec, loss: &StateVec) -> (f64, f64) {
    let w = lambda.weights();
    let k = w.len();
    let mut lq_minus = 0.0;
    let mut diff = 0.0;
    for (gc, lc) in gain.as_slice().chunks(k).zip(loss.as_slice().chunks(k)) {
        for i in 0..k {
            lq_minus += w[i] * lc[i];
            diff += w[i] * (lc[i] - gc[i]);
        }
    }
    (diff, lq_minus)
}

pub(crate) fn delta_from_parts(
    lambda: &DiagonalOperator,
    gain: &StateVec,
    loss: &StateVec,
) -> Result<f64> {
    let (d, scale) = raw_delta(lambda, gain, loss);
    if d >= 0.0 {
        Ok(d)
    } else if d >= -DELTA_SLACK * scale {
        Ok(0.0)
    } else {
        Err(Error::AssumptionViolation(format!(
            "dissipation is negative ({d:e}) against a loss moment of {scale:e}"
        )))
    }
}

/// A truncated coagulation model with its moment operators and envelopes.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    kernel: KernelSpec,
    lambda: DiagonalOperator,
    lambda1: DiagonalOperator,
    a_env: Envelope,
    rho_env: Envelope,
    rates: Vec<f64>,
}

impl ModelSpec {
    pub fn new(
        kernel: KernelSpec,
        lambda: DiagonalOperator,
        lambda1: DiagonalOperator,
        a_env: Envelope,
        rho_env: Envelope,
    ) -> Result<Self> {
        let sizes = lambda.len();
        if lambda1.len() != sizes {
            return Err(Error::Domain(format!(
                "lambda1 has {} weights, lambda has {sizes}",
                lambda1.len()
            )));
        }
        let rates = kernel.truncated_rates(sizes)?;
        Ok(Self {
            kernel,
            lambda,
            lambda1,
            a_env,
            rho_env,
            rates,
        })
    }

    /// `λ_k = λ₀ + k` with the default envelopes for the kernel family.
    pub fn with_defaults(kernel: KernelSpec, sizes: usize, lambda0: f64) -> Result<Self> {
        let d = default_envelopes(&kernel, lambda0)?;
        let lambda = DiagonalOperator::affine(lambda0, sizes)?;
        let lambda1 = match d.lambda1 {
            Lambda1Choice::Lambda => lambda.clone(),
            Lambda1Choice::LambdaSquared => lambda.squared()?,
        };
        Self::new(kernel, lambda, lambda1, d.a_env, d.rho_env)
    }

    pub fn with_envelopes(mut self, a_env: Envelope, rho_env: Envelope) -> Self {
        self.a_env = a_env;
        self.rho_env = rho_env;
        self
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn sizes(&self) -> usize {
        self.lambda.len()
    }

    /// Truncated rate between 0-based size indices.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rates[i * self.sizes() + j]
    }

    fn modulation_for(&self, g: &StateVec) -> Result<Option<&[f64]>> {
        if g.sizes() != self.sizes() {
            return Err(Error::ShapeMismatch {
                left: (self.sizes(), g.cells()),
                right: g.shape(),
            });
        }
        match self.kernel.modulation() {
            Some(m) if m.len() != g.cells() => Err(Error::ShapeMismatch {
                left: (self.sizes(), m.len()),
                right: g.shape(),
            }),
            m => Ok(m),
        }
    }

    /// Gain and loss with the cell modulation read from `modulation[(x + offset) % L]`.
    pub(crate) fn gain_loss_offset(
        &self,
        g: &StateVec,
        offset: usize,
    ) -> Result<(StateVec, StateVec)> {
        self.modulation_for(g)?;
        let (gain, loss) = self.gain_loss_raw(g.as_slice(), g.cells(), offset);
        let k = self.sizes();
        Ok((
            StateVec::from_cone_parts(k, g.cells(), gain),
            StateVec::from_cone_parts(k, g.cells(), loss),
        ))
    }

    /// Same sums on an arbitrary real vector, for integrators whose stage
    /// values may leave the cone. Shapes are the caller's responsibility.
    pub(crate) fn gain_loss_raw(
        &self,
        g: &[f64],
        cells: usize,
        offset: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let k = self.sizes();
        let modulation = self.kernel.modulation();
        let mut gain = vec![0.0; k * cells];
        let mut loss = vec![0.0; k * cells];
        for x in 0..cells {
            let m = modulation.map_or(1.0, |m| m[(x + offset) % cells]);
            let gx = &g[x * k..(x + 1) * k];
            let (gout, lout) = (&mut gain[x * k..(x + 1) * k], &mut loss[x * k..(x + 1) * k]);
            for s in 0..k {
                let row = &self.rates[s * k..(s + 1) * k];
                let mut acc = 0.0;
                for j in 0..k - s - 1 {
                    acc += row[j] * gx[j];
                }
                lout[s] = m * gx[s] * acc;
                // products of sizes i+1 and j+1 land on index i+j+1
                let mut acc = 0.0;
                for i in 0..s {
                    acc += self.rates[i * k + (s - 1 - i)] * gx[i] * gx[s - 1 - i];
                }
                gout[s] = 0.5 * m * acc;
            }
        }
        (gain, loss)
    }

    /// `Q⁺ − Q⁻` on a real vector of shape `sizes x cells`.
    pub fn net_rate(&self, g: &[f64], cells: usize) -> Result<Vec<f64>> {
        if g.len() != self.sizes() * cells
            || self.kernel.modulation().is_some_and(|m| m.len() != cells)
        {
            return Err(Error::ShapeMismatch {
                left: (self.sizes(), cells),
                right: (g.len() / cells.max(1), cells),
            });
        }
        let (gain, loss) = self.gain_loss_raw(g, cells, 0);
        Ok(gain.iter().zip(&loss).map(|(p, q)| p - q).collect())
    }

    pub fn gain(&self, g: &StateVec) -> Result<StateVec> {
        Ok(self.gain_loss_offset(g, 0)?.0)
    }

    pub fn loss(&self, g: &StateVec) -> Result<StateVec> {
        Ok(self.gain_loss_offset(g, 0)?.1)
    }

    pub fn delta(&self, g: &StateVec) -> Result<f64> {
        let (gain, loss) = self.gain_loss_offset(g, 0)?;
        delta_from_parts(&self.lambda, &gain, &loss)
    }
}

impl CollisionModel for ModelSpec {
    fn lambda(&self) -> &DiagonalOperator {
        &self.lambda
    }

    fn lambda1(&self) -> &DiagonalOperator {
        &self.lambda1
    }

    fn a_env(&self) -> Envelope {
        self.a_env
    }

    fn rho_env(&self) -> Envelope {
        self.rho_env
    }

    fn gain_loss_at(&self, _node: usize, g: &StateVec) -> Result<(StateVec, StateVec)> {
        self.gain_loss_offset(g, 0)
    }
}
