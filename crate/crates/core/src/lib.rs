//! Numerical laboratory for scalar reaction-diffusion equations
//!
//! ```text
//!     y_t = y_xx + (gamma + h(p.t, x)) y + g(p.t, x, y),   x in (0, 1)
//!     alpha y + dy/dn = 0                                 on the boundary
//! ```
//!
//! driven by a quasi-periodic rotation `p.t` of the 2-torus. The crate covers
//! the linear cocycle along the principal direction (upper Lyapunov exponent,
//! bounded vs. unbounded logarithm), the pullback attractor boundary `b(p)`
//! and its pinched structure, Li-Yorke pair diagnostics on attractor fibers and
//! the pitchfork diagram in the parameter `gamma`.
//!
//! Modules follow the data flow: [`base_flow`] drives [`coefficients`], which
//! together with [`solver`] define the semiflow; [`cocycle`], [`attractor`],
//! [`chaos`] and [`bifurcation`] are analyses built on top of it, and [`cli`]
//! wires experiments to config files and CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attractor;
pub mod base_flow;
pub mod bifurcation;
pub mod chaos;
pub mod cli;
pub mod cocycle;
pub mod coefficients;
pub mod config;
pub mod error;
pub mod output;
pub mod solver;

pub use base_flow::{BasePoint, FrequencyPreset};
pub use error::{Error, Result};
pub use solver::{BoundaryCondition, Discretization, Grid, GridField, ProblemSpec, Stepper};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
