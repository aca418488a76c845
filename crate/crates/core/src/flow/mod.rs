//! Time-`T` maps of the truncated system and their linearizations.
//!
//! Everything here is a stateless function of an [`EvolutionProblem`] and an
//! [`IntegratorSettings`]; the Poincaré map `P_ε(ξ) = x(T, ξ, ε)`, its derivative at
//! `ε = 0` and the first-order response `Q(ξ, 0)` are all computed from the same
//! adaptive scheme.

mod integrator;
mod trajectory;

pub use integrator::{IntegratorSettings, IntegratorStats};
pub use trajectory::Trajectory;

use integrator::{Augmentation, Stepper};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::model::EvolutionProblem;

/// `P'₀(ξ)`, `Q(ξ, 0)` and the unperturbed orbit they were computed along.
#[derive(Debug, Clone)]
pub struct MonodromyData {
    pub base_point: Vector,
    pub monodromy: Matrix,
    pub response: Vector,
    pub unperturbed: Trajectory,
}

#[derive(Debug, Clone, Copy)]
pub struct Flow<'a> {
    problem: &'a EvolutionProblem,
    settings: IntegratorSettings,
}

impl<'a> Flow<'a> {
    pub fn new(problem: &'a EvolutionProblem, settings: IntegratorSettings) -> Self {
        Self { problem, settings }
    }

    pub fn problem(&self) -> &'a EvolutionProblem {
        self.problem
    }

    pub fn settings(&self) -> IntegratorSettings {
        self.settings
    }

    fn check_inputs(&self, xi: &Vector, eps: f64, t_end: f64) -> Result<()> {
        let n = self.problem.dim();
        if xi.len() != n {
            return Err(Error::Invalid(format!("initial state has {} components, expected {n}", xi.len())));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Invalid(format!("eps must lie in [0, 1], got {eps}")));
        }
        let horizon = self.problem.period() * self.settings.max_periods;
        if !(t_end > 0.0 && t_end <= horizon * (1.0 + 1e-12)) {
            return Err(Error::Invalid(format!("t_end = {t_end} must lie in (0, {horizon}]")));
        }
        Ok(())
    }

    /// Solution of `ẋ = Ax + f(t,x) + εg(t,x,ε)`, `x(0) = ξ`, on `[0, t_end]`.
    pub fn integrate(&self, xi: &Vector, eps: f64, t_end: f64) -> Result<Trajectory> {
        self.check_inputs(xi, eps, t_end)?;
        let stepper = Stepper::new(self.problem, Augmentation::None { eps }, self.settings);
        let raw = stepper.run(0.0, xi.as_slice().to_vec(), t_end, &[], true)?;
        let mut states: Vec<Vector> = raw.states.into_iter().map(Vector::from_vec).collect();
        states[0] = xi.clone();
        Ok(Trajectory {
            times: raw.times,
            states,
            xi: xi.clone(),
            eps,
            stats: raw.stats,
        })
    }

    /// States at the given increasing times in `[0, max]`; the integrator lands on each exactly.
    pub fn states_on_grid(&self, xi: &Vector, eps: f64, grid: &[f64]) -> Result<Vec<Vector>> {
        if grid.windows(2).any(|w| w[1] < w[0]) || grid.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::Invalid("time grid must be non-negative and increasing".into()));
        }
        let Some(&t_end) = grid.last() else {
            return Ok(Vec::new());
        };
        if t_end == 0.0 {
            return Ok(vec![xi.clone(); grid.len()]);
        }
        self.check_inputs(xi, eps, t_end)?;
        let stepper = Stepper::new(self.problem, Augmentation::None { eps }, self.settings);
        let raw = stepper.run(0.0, xi.as_slice().to_vec(), t_end, grid, false)?;
        let mut out = Vec::with_capacity(grid.len());
        for &t in grid {
            if t == 0.0 {
                out.push(xi.clone());
                continue;
            }
            let idx = raw
                .times
                .iter()
                .position(|&s| s == t)
                .expect("every grid time is a stop of the integration");
            out.push(Vector::from_column_slice(&raw.states[idx]));
        }
        Ok(out)
    }

    /// `P_ε(ξ) = x(T, ξ, ε)`.
    pub fn poincare(&self, xi: &Vector, eps: f64) -> Result<Vector> {
        let t_end = self.problem.period();
        self.check_inputs(xi, eps, t_end)?;
        let stepper = Stepper::new(self.problem, Augmentation::None { eps }, self.settings);
        let raw = stepper.run(0.0, xi.as_slice().to_vec(), t_end, &[], false)?;
        Ok(Vector::from_vec(raw.states.into_iter().last().expect("final node")))
    }

    /// `P_ε(ξ) − ξ`; zero exactly at initial conditions of `T`-periodic solutions.
    pub fn displacement(&self, xi: &Vector, eps: f64) -> Result<Vector> {
        Ok(self.poincare(xi, eps)? - xi)
    }

    /// Operational `Q(ξ, ε) = (P_ε(ξ) − P₀(ξ))/ε` for `ε > 0`.
    pub fn response_at(&self, xi: &Vector, eps: f64) -> Result<Vector> {
        if eps <= 0.0 {
            return Err(Error::Invalid("the difference quotient needs eps > 0; use monodromy_and_response".into()));
        }
        Ok((self.poincare(xi, eps)? - self.poincare(xi, 0.0)?) / eps)
    }

    /// Integrates the orbit through `ξ` at `ε = 0` together with the matrix variational
    /// equation `Ẏ = (A + f_x)Y, Y(0) = I` and the inhomogeneous problem
    /// `ẏ = Ay + f_x y + g(t, x, 0), y(0) = 0`, returning `Y(T)` and `y(T)`.
    pub fn monodromy_and_response(&self, xi: &Vector) -> Result<MonodromyData> {
        let n = self.problem.dim();
        let t_end = self.problem.period();
        self.check_inputs(xi, 0.0, t_end)?;
        let mut y0 = vec![0.0; n * (n + 2)];
        y0[..n].copy_from_slice(xi.as_slice());
        for i in 0..n {
            y0[n + i * n + i] = 1.0;
        }
        let stepper = Stepper::new(self.problem, Augmentation::Response, self.settings);
        debug_assert_eq!(stepper.dim(), y0.len());
        let raw = stepper.run(0.0, y0, t_end, &[], true)?;
        let last = raw.states.last().expect("final node");
        let monodromy = Matrix::from_column_slice(n, n, &last[n..n + n * n]);
        let response = Vector::from_column_slice(&last[n + n * n..]);
        let mut states: Vec<Vector> = raw.states.iter().map(|s| Vector::from_column_slice(&s[..n])).collect();
        states[0] = xi.clone();
        Ok(MonodromyData {
            base_point: xi.clone(),
            monodromy,
            response,
            unperturbed: Trajectory {
                times: raw.times,
                states,
                xi: xi.clone(),
                eps: 0.0,
                stats: raw.stats,
            },
        })
    }

    /// `P_ε(ξ)` together with the derivative of `P_ε` at `ξ`, from the variational
    /// equation of the perturbed system (the `g` Jacobian is a central difference).
    pub fn perturbed_monodromy(&self, xi: &Vector, eps: f64) -> Result<(Vector, Matrix)> {
        let n = self.problem.dim();
        let t_end = self.problem.period();
        self.check_inputs(xi, eps, t_end)?;
        let mut y0 = vec![0.0; n * (n + 1)];
        y0[..n].copy_from_slice(xi.as_slice());
        for i in 0..n {
            y0[n + i * n + i] = 1.0;
        }
        let stepper = Stepper::new(self.problem, Augmentation::PerturbedMonodromy { eps }, self.settings);
        let raw = stepper.run(0.0, y0, t_end, &[], false)?;
        let last = raw.states.last().expect("final node");
        Ok((
            Vector::from_column_slice(&last[..n]),
            Matrix::from_column_slice(n, n, &last[n..]),
        ))
    }

    /// `u(t, ξ, ε) = (x(t, ξ, ε) − x(t, ξ, 0))/ε` on a shared time grid.
    pub fn scaled_difference(&self, xi: &Vector, eps: f64, grid: &[f64]) -> Result<Vec<Vector>> {
        if eps <= 0.0 {
            return Err(Error::Invalid(format!("scaled difference needs eps > 0, got {eps}")));
        }
        let perturbed = self.states_on_grid(xi, eps, grid)?;
        let unperturbed = self.states_on_grid(xi, 0.0, grid)?;
        Ok(perturbed
            .iter()
            .zip(&unperturbed)
            .map(|(a, b)| (a - b) / eps)
            .collect())
    }
}
