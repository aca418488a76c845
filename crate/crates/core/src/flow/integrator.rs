//! Adaptive Dormand–Prince 5(4) integration of semilinear systems.
//!
//! When the linear part is spectrally flagged the scheme is applied in Lawson form:
//! every stage is written in the frame of `e^{At}`, so the linear part is propagated
//! exactly and only the nonlinear remainder is sampled. With a dense linear part the
//! same tableau integrates the full vector field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::model::{EvolutionProblem, SpectralForm};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// the fifth-order weights coincide with the last row of A (FSAL)
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Error-control and safety settings for every trajectory computation.
///
/// The default tolerances keep the global error over one period near `1e-12`, so
/// quantities divided by `ε` stay accurate down to `ε = 1e-4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
    /// Divergence is declared once `‖x‖ > blowup_factor·(1 + ‖ξ‖)`.
    pub blowup_factor: f64,
    /// Longest admissible horizon, in periods.
    pub max_periods: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_steps: 500_000,
            blowup_factor: 1e6,
            max_periods: 10.0,
        }
    }
}

impl IntegratorSettings {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        for (name, v) in [
            ("abs_tol", self.abs_tol),
            ("rel_tol", self.rel_tol),
            ("blowup_factor", self.blowup_factor),
            ("max_periods", self.max_periods),
        ] {
            if !positive(v) {
                return Err(Error::Invalid(format!("{name} must be positive, found {v:e}")));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::Invalid("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

/// What is being carried alongside the base state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Augmentation {
    /// Base state only, at the given ε.
    None { eps: f64 },
    /// `[x, Y, y]` for `Ẏ = (A + f_x)Y` and `ẏ = Ay + f_x y + g(t,x,0)` along the ε = 0 orbit.
    Response,
    /// `[x, Y]` for `Ẏ = (A + f_x + ε g_x)Y` along the perturbed orbit.
    PerturbedMonodromy { eps: f64 },
}

impl Augmentation {
    fn eps(&self) -> f64 {
        match *self {
            Augmentation::None { eps } | Augmentation::PerturbedMonodromy { eps } => eps,
            Augmentation::Response => 0.0,
        }
    }

    fn chunks(&self, n: usize) -> usize {
        match self {
            Augmentation::None { .. } => 1,
            Augmentation::Response => n + 2,
            Augmentation::PerturbedMonodromy { .. } => n + 1,
        }
    }
}

/// Result of a raw integration: recorded nodes of the full (augmented) state.
pub(crate) struct RawSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: IntegratorStats,
}

pub(crate) struct Stepper<'a> {
    problem: &'a EvolutionProblem,
    aug: Augmentation,
    settings: IntegratorSettings,
    spectral: Option<&'a SpectralForm>,
    n: usize,
    dim: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a EvolutionProblem, aug: Augmentation, settings: IntegratorSettings) -> Self {
        let n = problem.dim();
        Self {
            problem,
            aug,
            settings,
            spectral: problem.linear().spectral_form(),
            n,
            dim: n * aug.chunks(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn apply_exp(&self, tau: f64, v: &mut [f64]) {
        if let Some(form) = self.spectral {
            if tau != 0.0 {
                for chunk in v.chunks_mut(self.n) {
                    form.apply_exp(tau, chunk);
                }
            }
        }
    }

    /// Right-hand side in the integrator's frame: the nonlinear remainder on the
    /// exponential path, the full field otherwise.
    fn rhs(&self, t: f64, y: &[f64], out: &mut [f64]) {
        let n = self.n;
        let p = self.problem;
        let x = Vector::from_column_slice(&y[..n]);
        let eps = self.aug.eps();
        let base = p.nonlinear(t, &x, eps);
        out[..n].copy_from_slice(base.as_slice());
        match self.aug {
            Augmentation::None { .. } => {}
            Augmentation::Response => {
                let jac = p.f_x(t, &x);
                let ymat = Matrix::from_column_slice(n, n, &y[n..n + n * n]);
                let dy = &jac * ymat;
                out[n..n + n * n].copy_from_slice(dy.as_slice());
                let resp = Vector::from_column_slice(&y[n + n * n..]);
                let dr = &jac * resp + p.g(t, &x, 0.0);
                out[n + n * n..].copy_from_slice(dr.as_slice());
            }
            Augmentation::PerturbedMonodromy { eps } => {
                let mut jac = p.f_x(t, &x);
                if eps != 0.0 && p.has_perturbation() {
                    jac += p.g_x(t, &x, eps) * eps;
                }
                let ymat = Matrix::from_column_slice(n, n, &y[n..]);
                let dy = &jac * ymat;
                out[n..].copy_from_slice(dy.as_slice());
            }
        }
        if self.spectral.is_none() {
            let a = p.linear().matrix();
            for (chunk_in, chunk_out) in y.chunks(n).zip(out.chunks_mut(n)) {
                let v = Vector::from_column_slice(chunk_in);
                let av = a * v;
                for (o, a) in chunk_out.iter_mut().zip(av.iter()) {
                    *o += a;
                }
            }
        }
    }

    /// One Dormand–Prince step of size `h` from `(t, y)`; `k1` is the right-hand side at
    /// `(t, y)`. Returns the new state, the raw error vector and the derivative at the end.
    fn step(&self, t: f64, y: &[f64], k1: &[f64], h: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let dim = self.dim;
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        k.push(k1.to_vec());
        let mut scratch = vec![0.0; dim];
        for i in 1..7 {
            let mut stage = y.to_vec();
            self.apply_exp(C[i] * h, &mut stage);
            for (j, kj) in k.iter().enumerate() {
                let a = A[i][j];
                if a == 0.0 {
                    continue;
                }
                scratch.copy_from_slice(kj);
                self.apply_exp((C[i] - C[j]) * h, &mut scratch);
                for (s, v) in stage.iter_mut().zip(scratch.iter()) {
                    *s += h * a * v;
                }
            }
            let mut ki = vec![0.0; dim];
            self.rhs(t + C[i] * h, &stage, &mut ki);
            if i == 6 {
                // FSAL: the last stage point is the new state
                let mut err = vec![0.0; dim];
                for (j, kj) in k.iter().chain(std::iter::once(&ki)).enumerate() {
                    if E[j] == 0.0 {
                        continue;
                    }
                    scratch.copy_from_slice(kj);
                    self.apply_exp((1.0 - C[j]) * h, &mut scratch);
                    for (e, v) in err.iter_mut().zip(scratch.iter()) {
                        *e += h * E[j] * v;
                    }
                }
                return (stage, err, ki);
            }
            k.push(ki);
        }
        unreachable!("the tableau has seven stages")
    }

    fn error_norm(&self, y: &[f64], y_new: &[f64], err: &[f64]) -> f64 {
        let s = &self.settings;
        let sum: f64 = y
            .iter()
            .zip(y_new)
            .zip(err)
            .map(|((a, b), e)| {
                let sc = s.abs_tol + s.rel_tol * a.abs().max(b.abs());
                (e / sc).powi(2)
            })
            .sum();
        (sum / y.len() as f64).sqrt()
    }

    fn initial_step(&self, t0: f64, y0: &[f64], f0: &[f64], span: f64) -> f64 {
        let s = &self.settings;
        let scale: Vec<f64> = y0.iter().map(|v| s.abs_tol + s.rel_tol * v.abs()).collect();
        let rms = |v: &[f64]| -> f64 {
            (v.iter().zip(&scale).map(|(a, sc)| (a / sc).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
        };
        let d0 = rms(y0);
        let d1 = rms(f0);
        let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h = h.min(span);
        // one explicit Euler probe for the second derivative
        let y1: Vec<f64> = y0.iter().zip(f0).map(|(a, b)| a + h * b).collect();
        let mut f1 = vec![0.0; y0.len()];
        self.rhs(t0 + h, &y1, &mut f1);
        let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
        let d2 = rms(&diff) / h;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h).min(h1).min(span).max(1e-12 * span)
    }

    /// Integrates from `(t0, y0)` to `t_end`, hitting every time in `stops` exactly.
    /// Stop times and the final time are always recorded; intermediate nodes only when
    /// `record` is set.
    pub fn run(&self, t0: f64, y0: Vec<f64>, t_end: f64, stops: &[f64], record: bool) -> Result<RawSolution> {
        let s = self.settings;
        let span = t_end - t0;
        let mut stats = IntegratorStats {
            abs_tol: s.abs_tol,
            rel_tol: s.rel_tol,
            ..Default::default()
        };
        let mut times = vec![t0];
        let mut states = vec![y0.clone()];
        if span <= 0.0 {
            return Ok(RawSolution { times, states, stats });
        }
        let n = self.n;
        let xi_norm = y0[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        let bound = s.blowup_factor * (1.0 + xi_norm);

        let mut targets: Vec<f64> = stops.iter().copied().filter(|&v| v > t0 && v < t_end).collect();
        targets.push(t_end);
        let mut target_idx = 0;

        let mut t = t0;
        let mut y = y0;
        let mut f = vec![0.0; self.dim];
        self.rhs(t, &y, &mut f);
        stats.rhs_evaluations += 1;
        let mut h = self.initial_step(t, &y, &f, span);
        stats.rhs_evaluations += 1;
        let mut last_rejected = false;

        while target_idx < targets.len() {
            let target = targets[target_idx];
            if stats.steps + stats.rejected >= s.max_steps {
                return Err(Error::TooManySteps { t, max_steps: s.max_steps });
            }
            let remaining = target - t;
            let hits_target = h >= remaining * (1.0 - 1e-12);
            let h_try = if hits_target { remaining } else { h };
            if h_try < 1e-14 * t.abs().max(1.0) && !hits_target {
                return Err(Error::StepUnderflow { t, step: h_try });
            }
            let (y_new, err, f_new) = self.step(t, &y, &f, h_try);
            stats.rhs_evaluations += 6;
            let err_norm = self.error_norm(&y, &y_new, &err);
            if !err_norm.is_finite() {
                h = h_try * 0.2;
                stats.rejected += 1;
                last_rejected = true;
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::Divergence { t, norm: f64::INFINITY });
                }
                continue;
            }
            if err_norm <= 1.0 {
                t = if hits_target { target } else { t + h_try };
                y = y_new;
                f = f_new;
                stats.steps += 1;
                let norm = y[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
                if !norm.is_finite() || norm > bound {
                    return Err(Error::Divergence { t, norm });
                }
                if hits_target {
                    target_idx += 1;
                }
                if record || hits_target {
                    times.push(t);
                    states.push(y.clone());
                }
                let mut factor = if err_norm == 0.0 { 5.0 } else { 0.9 * err_norm.powf(-0.2) };
                factor = factor.clamp(0.2, 5.0);
                if last_rejected {
                    factor = factor.min(1.0);
                }
                // a step clipped by a stop keeps the previously proposed size
                let clipped = hits_target && h_try < h;
                if !clipped {
                    h = h_try * factor;
                }
                last_rejected = false;
            } else {
                stats.rejected += 1;
                h = h_try * (0.9 * err_norm.powf(-0.2)).clamp(0.2, 1.0);
                last_rejected = true;
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepUnderflow { t, step: h });
                }
            }
        }
        Ok(RawSolution { times, states, stats })
    }

    /// A single unadapted step, used for dense output between recorded nodes.
    pub fn single_step(&self, t: f64, y: &[f64], h: f64) -> Vec<f64> {
        if h == 0.0 {
            return y.to_vec();
        }
        let mut f = vec![0.0; self.dim];
        self.rhs(t, y, &mut f);
        self.step(t, y, &f, h).0
    }
}
