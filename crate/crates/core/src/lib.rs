//! A laboratory for gradient flows of non-convex energies.
//!
//! States evolve by minimizing movements: every step solves the proximal
//! problem `argmin_v phi(v) + |v - u|^2 / (2 tau)` in the ambient Hilbert
//! space of the energy. On top of the integrator sit semiflow diagnostics
//! (omega-limits, rest points, Hausdorff excess, attractor clouds) and a
//! quasi-stationary phase field model whose energy is itself an inner
//! minimization.
//!
//! Module map:
//! - [`space`]: grids, grid functions, elliptic operators, inner products.
//! - [`functional`]: the catalogue of energies with proximal maps.
//! - [`flow`]: the minimizing-movement integrator and energy ledger.
//! - [`semiflow`]: ensembles, phase distance, excess, attractors.
//! - [`quasistationary`]: the phase field model and the lambda study.

pub mod error;
pub mod flow;
pub mod functional;
pub(crate) mod linalg;
pub mod quasistationary;
pub mod semiflow;
pub mod space;

pub use error::{Error, Result};
pub use flow::{evolve, Trajectory};
pub use functional::{Ambient, FunctionalSpec};
pub use space::{BoundaryCondition, Coefficient, EllipticOperator, Grid, GridKind, ScalarField};
