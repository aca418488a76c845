//! Bifurcation of `T`-periodic solutions from `k`-parameter families of periodic orbits
//! in periodically perturbed semilinear systems `ẋ = Ax + f(t,x) + εg(t,x,ε)`.
//!
//! The crate evaluates the Lyapunov–Schmidt bifurcation function `M(h)` of a family
//! chart `S(h)`, locates its isolated zeros, computes their topological indices and
//! checks each existence verdict by Newton continuation of the full Poincaré map.
//!
//! Layers, bottom up:
//! - [`model`]: problem definitions, family charts and the built-in registry;
//! - [`flow`]: Poincaré maps, monodromy matrices and first-order responses;
//! - [`reduction`]: projectors, the complement fixed point `β(h, ε)` and `M`, `M_ε`;
//! - [`degree`]: Brouwer degree and indices of zeros;
//! - [`detect`]: zero search, verdicts, continuation and necessity checks;
//! - [`cli`]: JSON configuration, batch commands and the invariant suite.

pub mod cli;
pub mod degree;
pub mod detect;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod model;
pub mod reduction;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
