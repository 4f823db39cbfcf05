//! Finite ordered space: the nonnegative orthant of ℓ¹ over (size, cell)
//! indices, diagonal moment operators, and the contraction semigroup they
//! generate.
//!
//! Size index `i` (0-based) holds clusters of size `i + 1`. A state with
//! `cells > 1` stores one block of `sizes` entries per spatial cell, and every
//! diagonal operator acts on the size index only, identically in each cell.

use crate::error::{Error, Result};

/// Element of the positive cone.
///
/// Construction rejects negative or non-finite entries, so every `StateVec`
/// in circulation is a cone member.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVec {
    sizes: usize,
    cells: usize,
    data: Vec<f64>,
}

impl StateVec {
    pub fn new(sizes: usize, cells: usize, data: Vec<f64>) -> Result<Self> {
        if sizes == 0 || cells == 0 {
            return Err(Error::Domain(format!(
                "state needs at least one size and one cell, got {sizes}x{cells}"
            )));
        }
        if data.len() != sizes * cells {
            return Err(Error::Domain(format!(
                "state of shape {sizes}x{cells} needs {} entries, got {}",
                sizes * cells,
                data.len()
            )));
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::ConeViolation { index, value });
        }
        Ok(Self { sizes, cells, data })
    }

    /// Homogeneous state (one cell).
    pub fn from_sizes(data: Vec<f64>) -> Result<Self> {
        let sizes = data.len();
        Self::new(sizes, 1, data)
    }

    pub fn zeros(sizes: usize, cells: usize) -> Self {
        assert!(sizes > 0 && cells > 0, "empty state shape");
        Self {
            sizes,
            cells,
            data: vec![0.0; sizes * cells],
        }
    }

    /// `n0` monomers in every cell.
    pub fn monodisperse(sizes: usize, cells: usize, n0: f64) -> Result<Self> {
        let mut data = vec![0.0; sizes * cells];
        for x in 0..cells {
            data[x * sizes] = n0;
        }
        Self::new(sizes, cells, data)
    }

    /// Caller guarantees every entry is finite and nonnegative.
    pub(crate) fn from_cone_parts(sizes: usize, cells: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), sizes * cells);
        debug_assert!(
            data.iter().all(|v| v.is_finite() && *v >= 0.0),
            "cone invariant broken internally"
        );
        Self { sizes, cells, data }
    }

    pub fn sizes(&self) -> usize {
        self.sizes
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.sizes, self.cells)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, size_index: usize, cell: usize) -> f64 {
        self.data[cell * self.sizes + size_index]
    }

    pub fn cell(&self, cell: usize) -> &[f64] {
        &self.data[cell * self.sizes..(cell + 1) * self.sizes]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn same_shape(&self, other: &StateVec) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                left: self.shape(),
                right: other.shape(),
            })
        }
    }

    /// `c * self` for a nonnegative scalar.
    pub fn scale(&self, c: f64) -> Result<StateVec> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::Domain(format!("cone scaling needs c >= 0, got {c}")));
        }
        let data = self.data.iter().map(|v| c * v).collect();
        StateVec::new(self.sizes, self.cells, data)
    }

    pub fn add(&self, other: &StateVec) -> Result<StateVec> {
        self.same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        StateVec::new(self.sizes, self.cells, data)
    }

    /// ℓ¹ distance; differences leave the cone, so this is not `cone_norm`.
    pub fn l1_distance(&self, other: &StateVec) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }
}

/// The operator Λ in diagonal form: one positive weight per size index.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOperator {
    lambda0: f64,
    weights: Vec<f64>,
}

impl DiagonalOperator {
    /// Validated constructor: `lambda0 > 0` and every weight `>= lambda0`.
    pub fn new(lambda0: f64, weights: Vec<f64>) -> Result<Self> {
        if !(lambda0.is_finite() && lambda0 > 0.0) {
            return Err(Error::Domain(format!("lambda0 must be > 0, got {lambda0}")));
        }
        if weights.is_empty() {
            return Err(Error::Domain("operator needs at least one weight".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= lambda0))
        {
            return Err(Error::Domain(format!(
                "weight {i} = {w} is below lambda0 = {lambda0}"
            )));
        }
        Ok(Self { lambda0, weights })
    }

    /// Candidate operator that may violate the lower bound. Only the
    /// assumption auditor should see one of these; it reports the violation.
    pub fn unchecked(lambda0: f64, weights: Vec<f64>) -> Self {
        Self { lambda0, weights }
    }

    /// `λ_k = λ₀ + k` for sizes `k = 1..=sizes`.
    pub fn affine(lambda0: f64, sizes: usize) -> Result<Self> {
        let weights = (1..=sizes).map(|k| lambda0 + k as f64).collect();
        Self::new(lambda0, weights)
    }

    /// Componentwise square, with lower bound `λ₀²`.
    pub fn squared(&self) -> Result<Self> {
        Self::new(
            self.lambda0 * self.lambda0,
            self.weights.iter().map(|w| w * w).collect(),
        )
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    fn check_fits(&self, g: &StateVec) -> Result<()> {
        if self.weights.len() != g.sizes() {
            return Err(Error::ShapeMismatch {
                left: (self.weights.len(), g.cells()),
                right: g.shape(),
            });
        }
        Ok(())
    }
}

/// Compensated sum over the terms in sorted order, so permuting the entries
/// (moving cells around) cannot change the result.
fn stable_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut terms: Vec<f64> = values.collect();
    terms.sort_unstable_by(f64::total_cmp);
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for x in terms {
        let t = sum + x;
        carry += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + carry
}

/// Additive norm on the cone: the sum of entries.
pub fn cone_norm(g: &StateVec) -> f64 {
    stable_sum(g.as_slice().iter().copied())
}

/// Componentwise order `g <= h`.
pub fn leq(g: &StateVec, h: &StateVec) -> Result<bool> {
    g.same_shape(h)?;
    Ok(g.as_slice().iter().zip(h.as_slice()).all(|(a, b)| a <= b))
}

/// `‖Λ^p g‖ = Σ λ_k^p g_k` over all cells, for `p` in `0..=3`.
pub fn moment(op: &DiagonalOperator, p: u32, g: &StateVec) -> Result<f64> {
    if p > 3 {
        return Err(Error::Domain(format!("moment order {p} outside 0..=3")));
    }
    op.check_fits(g)?;
    let k = g.sizes();
    Ok(stable_sum(
        g.as_slice()
            .iter()
            .enumerate()
            .map(|(idx, v)| op.weights[idx % k].powi(p as i32) * v),
    ))
}

/// `Λ^p g`, componentwise.
pub fn apply_diag(op: &DiagonalOperator, p: i32, g: &StateVec) -> Result<StateVec> {
    op.check_fits(g)?;
    let k = g.sizes();
    let data = g
        .as_slice()
        .iter()
        .enumerate()
        .map(|(idx, v)| op.weights[idx % k].powi(p) * v)
        .collect();
    StateVec::new(k, g.cells(), data)
}

/// Exact evaluation of the semigroup generated by `-cΛ`: `e^{-c λ_k t} g_k`.
pub fn semigroup_apply(c: f64, op: &DiagonalOperator, t: f64, g: &StateVec) -> Result<StateVec> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!(
            "semigroup time must be >= 0, got {t}"
        )));
    }
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::Domain(format!(
            "semigroup rate must be >= 0, got {c}"
        )));
    }
    op.check_fits(g)?;
    let k = g.sizes();
    let data = g
        .as_slice()
        .iter()
        .enumerate()
        .map(|(idx, v)| (-c * op.weights[idx % k] * t).exp() * v)
        .collect();
    Ok(StateVec::from_cone_parts(k, g.cells(), data))
}
