//! Finite differences on `[0, 1]` and a monotone time stepper.
//!
//! The Laplacian uses the three-point stencil with ghost-point boundary rows.
//! One time step is a spectrally shifted backward Euler solve for diffusion
//! followed by exact pointwise flows of the reaction terms, so every step is
//! order preserving, odd, and keeps zero fixed for any `dt`.

mod operator;
mod stepping;

pub use operator::{build_operator, first_eigenpair, Discretization, Eigenpair, Tridiagonal};
pub use stepping::{dt_max, evolve, evolve_linear, step_count, Stepper};

use serde::{Deserialize, Serialize};

use crate::coefficients::{LinearCoefficientSpec, NonlinearitySpec};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub n_cells: usize,
}

impl Grid {
    pub const MIN_CELLS: usize = 8;

    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < Self::MIN_CELLS {
            return Err(Error::Config(format!("grid.n_cells must be at least {}, got {n_cells}", Self::MIN_CELLS)));
        }
        Ok(Self { n_cells })
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n_cells as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.node(i)).collect()
    }
}

/// Values on the grid nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self { values: vec![c; grid.n_nodes()] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        Self { values: grid.nodes().into_iter().map(f).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| s * v).collect() }
    }

    /// Sup-norm of the difference.
    pub fn distance(&self, other: &GridField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Copy with sup-norm one. Returns `None` for the zero field.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.sup_norm();
        (n > 0.0 && n.is_finite()).then(|| self.scaled(1.0 / n))
    }
}

#[inline]
pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Neumann,
    Robin,
}

/// `alpha y + dy/dn = 0` at each endpoint, outward normal. Neumann is
/// `alpha = 0` on both sides.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub alpha_left: f64,
    pub alpha_right: f64,
}

impl BoundaryCondition {
    pub fn neumann() -> Self {
        Self { alpha_left: 0.0, alpha_right: 0.0 }
    }

    pub fn robin(alpha: f64) -> Self {
        Self { alpha_left: alpha, alpha_right: alpha }
    }

    pub fn robin_lr(alpha_left: f64, alpha_right: f64) -> Self {
        Self { alpha_left, alpha_right }
    }

    pub fn kind(&self) -> BoundaryKind {
        if self.alpha_left == 0.0 && self.alpha_right == 0.0 {
            BoundaryKind::Neumann
        } else {
            BoundaryKind::Robin
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (side, a) in [("left", self.alpha_left), ("right", self.alpha_right)] {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("bc.alpha ({side}) must be finite and nonnegative, got {a}")));
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind() {
            BoundaryKind::Neumann => write!(f, "neumann"),
            BoundaryKind::Robin if self.alpha_left == self.alpha_right => write!(f, "robin(alpha={})", self.alpha_left),
            BoundaryKind::Robin => write!(f, "robin(alpha_left={},alpha_right={})", self.alpha_left, self.alpha_right),
        }
    }
}

/// One member of the family `y_t = y_xx + (gamma + h) y + g(y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub h: LinearCoefficientSpec,
    pub g: Option<NonlinearitySpec>,
    pub gamma: f64,
    pub bc: BoundaryCondition,
}

impl ProblemSpec {
    pub fn linear(h: LinearCoefficientSpec, bc: BoundaryCondition) -> Self {
        Self { h, g: None, gamma: 0.0, bc }
    }

    pub fn nonlinear(h: LinearCoefficientSpec, g: NonlinearitySpec, gamma: f64, bc: BoundaryCondition) -> Self {
        Self { h, g: Some(g), gamma, bc }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }

    /// Linear part only.
    pub fn linearized(&self) -> Self {
        Self { g: None, ..self.clone() }
    }

    /// Upper bound of the linear rate `gamma + h`.
    pub fn growth_bound(&self) -> f64 {
        self.gamma + self.h.sup_bound()
    }

    /// Homogeneous dissipativity radius: largest `y` at which the linear
    /// growth is balanced by the weakest cubic. `None` for linear problems.
    pub fn absorbing_radius(&self) -> Option<f64> {
        self.g.as_ref().map(|g| g.absorbing_radius(self.growth_bound()))
    }

    /// Twice the dissipativity radius.
    pub fn invariant_box(&self) -> Option<f64> {
        self.absorbing_radius().map(|y| 2.0 * y)
    }

    /// Default initial level of a pullback: four times the invariant box.
    pub fn default_r_start(&self) -> Option<f64> {
        self.invariant_box().map(|y| 4.0 * y)
    }

    pub fn validate(&self) -> Result<()> {
        self.bc.validate()?;
        if !self.gamma.is_finite() {
            return Err(Error::Config("problem.gamma must be finite".into()));
        }
        if let Some(g) = &self.g {
            g.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
