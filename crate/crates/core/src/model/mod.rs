//! Problem class: truncated evolution equations, periodic-orbit families and the
//! built-in model registry.

mod chart;
mod problem;
pub mod registry;
mod validate;

pub use chart::{ChartDerivative, ChartMap, FamilyChart};
pub use problem::{
    EvolutionProblem, JacobianField, LinearPart, Perturbation, ProblemBuilder, SemigroupClass, SpectralBlock,
    SpectralForm, VectorField,
};
pub use validate::{ball_samples, latin_hypercube, validate_problem, Check, ValidationSettings, ValidationSummary};
