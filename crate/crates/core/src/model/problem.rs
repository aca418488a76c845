use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{central_jacobian, fd_step, Matrix, Vector};

pub type VectorField = Arc<dyn Fn(f64, &Vector) -> Vector + Send + Sync>;
pub type JacobianField = Arc<dyn Fn(f64, &Vector) -> Matrix + Send + Sync>;
pub type Perturbation = Arc<dyn Fn(f64, &Vector, f64) -> Vector + Send + Sync>;

/// One block of a spectrally represented linear part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpectralBlock {
    /// A single real eigenvalue acting on one coordinate.
    Real(f64),
    /// A complex pair `re ± i·im` acting on two consecutive coordinates through
    /// the real block `[[re, −im], [im, re]]`.
    Complex { re: f64, im: f64 },
}

impl SpectralBlock {
    pub fn size(&self) -> usize {
        match self {
            SpectralBlock::Real(_) => 1,
            SpectralBlock::Complex { .. } => 2,
        }
    }
}

/// Block-diagonal linear part whose exponential is available in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralForm {
    pub blocks: Vec<SpectralBlock>,
}

impl SpectralForm {
    pub fn new(blocks: Vec<SpectralBlock>) -> Self {
        Self { blocks }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(SpectralBlock::size).sum()
    }

    pub fn to_matrix(&self) -> Matrix {
        let n = self.dim();
        let mut a = Matrix::zeros(n, n);
        let mut i = 0;
        for block in &self.blocks {
            match *block {
                SpectralBlock::Real(l) => a[(i, i)] = l,
                SpectralBlock::Complex { re, im } => {
                    a[(i, i)] = re;
                    a[(i, i + 1)] = -im;
                    a[(i + 1, i)] = im;
                    a[(i + 1, i + 1)] = re;
                }
            }
            i += block.size();
        }
        a
    }

    /// Applies `e^{A·tau}` in place to a vector of length `dim()`.
    pub fn apply_exp(&self, tau: f64, v: &mut [f64]) {
        let mut i = 0;
        for block in &self.blocks {
            match *block {
                SpectralBlock::Real(l) => v[i] *= (l * tau).exp(),
                SpectralBlock::Complex { re, im } => {
                    let scale = (re * tau).exp();
                    let (s, c) = (im * tau).sin_cos();
                    let (a, b) = (v[i], v[i + 1]);
                    v[i] = scale * (c * a - s * b);
                    v[i + 1] = scale * (s * a + c * b);
                }
            }
            i += block.size();
        }
    }

    /// Eigenvalues as `(re, im)` pairs, one entry per real eigenvalue or conjugate pair.
    pub fn spectrum(&self) -> Vec<(f64, f64)> {
        self.blocks
            .iter()
            .map(|b| match *b {
                SpectralBlock::Real(l) => (l, 0.0),
                SpectralBlock::Complex { re, im } => (re, im.abs()),
            })
            .collect()
    }
}

/// The linear operator `A` of the truncation.
#[derive(Debug, Clone)]
pub struct LinearPart {
    matrix: Matrix,
    spectral: Option<SpectralForm>,
}

impl LinearPart {
    pub fn dense(matrix: Matrix) -> Self {
        Self { matrix, spectral: None }
    }

    /// A spectrally flagged linear part; enables the exponential integrator.
    pub fn spectral(form: SpectralForm) -> Self {
        Self {
            matrix: form.to_matrix(),
            spectral: Some(form),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn spectral_form(&self) -> Option<&SpectralForm> {
        self.spectral.as_ref()
    }

    pub fn is_spectral(&self) -> bool {
        self.spectral.is_some()
    }

    /// Matrix measure `μ₂(A)`: the largest eigenvalue of the symmetric part.
    pub fn matrix_measure(&self) -> f64 {
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        sym.symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Which semigroup hypothesis the modelled (untruncated) equation satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SemigroupClass {
    AnalyticCompact,
    ContractiveC0 { decay: f64 },
}

/// A Galerkin-truncated semilinear system `ẋ = Ax + f(t,x) + ε g(t,x,ε)` with period `T`.
#[derive(Clone)]
pub struct EvolutionProblem {
    name: String,
    period: f64,
    linear: LinearPart,
    f: Option<VectorField>,
    f_x: Option<JacobianField>,
    g: Option<Perturbation>,
    semigroup: SemigroupClass,
}

impl fmt::Debug for EvolutionProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvolutionProblem")
            .field("name", &self.name)
            .field("n", &self.dim())
            .field("period", &self.period)
            .field("spectral", &self.linear.is_spectral())
            .field("semigroup", &self.semigroup)
            .finish_non_exhaustive()
    }
}

impl EvolutionProblem {
    pub fn builder(name: impl Into<String>, linear: LinearPart, period: f64) -> ProblemBuilder {
        ProblemBuilder {
            problem: EvolutionProblem {
                name: name.into(),
                period,
                linear,
                f: None,
                f_x: None,
                g: None,
                semigroup: SemigroupClass::AnalyticCompact,
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.linear.matrix.nrows()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn linear(&self) -> &LinearPart {
        &self.linear
    }

    pub fn semigroup(&self) -> SemigroupClass {
        self.semigroup
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.f.is_none() || self.f_x.is_some()
    }

    pub fn has_perturbation(&self) -> bool {
        self.g.is_some()
    }

    pub fn f(&self, t: f64, x: &Vector) -> Vector {
        match &self.f {
            Some(f) => f(t, x),
            None => Vector::zeros(x.len()),
        }
    }

    /// State Jacobian of `f`; synthesized by central differences when not supplied.
    pub fn f_x(&self, t: f64, x: &Vector) -> Matrix {
        match (&self.f_x, &self.f) {
            (Some(j), _) => j(t, x),
            (None, None) => Matrix::zeros(x.len(), x.len()),
            (None, Some(f)) => central_jacobian(|y| f(t, y), x, fd_step(x)),
        }
    }

    pub fn g(&self, t: f64, x: &Vector, eps: f64) -> Vector {
        match &self.g {
            Some(g) => g(t, x, eps),
            None => Vector::zeros(x.len()),
        }
    }

    /// Central-difference state Jacobian of `g`; `g` need only be Lipschitz, so this is
    /// used solely to build Newton matrices.
    pub fn g_x(&self, t: f64, x: &Vector, eps: f64) -> Matrix {
        match &self.g {
            Some(g) => central_jacobian(|y| g(t, y, eps), x, f64::EPSILON.cbrt() * x.norm().max(1.0)),
            None => Matrix::zeros(x.len(), x.len()),
        }
    }

    /// Nonlinear part `f(t,x) + ε g(t,x,ε)`.
    pub fn nonlinear(&self, t: f64, x: &Vector, eps: f64) -> Vector {
        let mut out = self.f(t, x);
        if eps != 0.0 {
            if let Some(g) = &self.g {
                out += g(t, x, eps) * eps;
            }
        }
        out
    }

    /// Full vector field `Ax + f(t,x) + ε g(t,x,ε)`.
    pub fn vector_field(&self, t: f64, x: &Vector, eps: f64) -> Vector {
        &self.linear.matrix * x + self.nonlinear(t, x, eps)
    }

    /// Returns a copy with a different period (used to probe broken configurations).
    pub fn with_period(&self, period: f64) -> Self {
        let mut p = self.clone();
        p.period = period;
        p
    }
}

pub struct ProblemBuilder {
    problem: EvolutionProblem,
}

impl ProblemBuilder {
    pub fn nonlinearity(mut self, f: impl Fn(f64, &Vector) -> Vector + Send + Sync + 'static) -> Self {
        self.problem.f = Some(Arc::new(f));
        self
    }

    pub fn jacobian(mut self, f_x: impl Fn(f64, &Vector) -> Matrix + Send + Sync + 'static) -> Self {
        self.problem.f_x = Some(Arc::new(f_x));
        self
    }

    pub fn perturbation(mut self, g: impl Fn(f64, &Vector, f64) -> Vector + Send + Sync + 'static) -> Self {
        self.problem.g = Some(Arc::new(g));
        self
    }

    pub fn semigroup(mut self, class: SemigroupClass) -> Self {
        self.problem.semigroup = class;
        self
    }

    pub fn build(self) -> Result<EvolutionProblem> {
        let p = self.problem;
        let a = p.linear.matrix();
        if a.nrows() == 0 || a.nrows() != a.ncols() {
            return Err(Error::Invalid(format!(
                "linear part must be a non-empty square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if !(p.period.is_finite() && p.period > 0.0) {
            return Err(Error::Invalid(format!("period must be positive, got {}", p.period)));
        }
        if let SemigroupClass::ContractiveC0 { decay } = p.semigroup {
            if !(decay > 0.0) {
                return Err(Error::Invalid(format!("contractive decay rate must be positive, got {decay}")));
            }
        }
        Ok(p)
    }
}
