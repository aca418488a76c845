use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{Flow, IntegratorSettings};
use crate::linalg::{solve_or_pinv, Matrix, Vector};
use crate::reduction::Reduction;

/// `count` geometrically spaced values from `start` down to `end`.
pub fn geometric_ladder(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let ratio = (end / start).powf(1.0 / (count - 1) as f64);
            // repeated products rather than powi, whose rounding varies with inlining
            let mut out: Vec<f64> = std::iter::successors(Some(start), |x| Some(x * ratio)).take(count).collect();
            out[count - 1] = end;
            out
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationSettings {
    /// Decreasing `ε` values.
    pub ladder: Vec<f64>,
    /// Newton stops once `‖P_ε(ξ) − ξ‖ ≤ newton_tol_factor · (1 + ‖ξ‖)`.
    pub newton_tol_factor: f64,
    pub max_newton: usize,
    /// Also run Newton from `S(h*)` to compare iteration counts.
    pub compare_naive_seed: bool,
    /// Largest `ε` used when fitting the convergence slope.
    pub fit_max_eps: f64,
    /// Distances below `exact_floor · (1 + ‖S(h*)‖)` count as exact and are left out of
    /// the slope fit.
    pub exact_floor: f64,
    /// Newton corrections scale like integrator error divided by `ε`, so the full-system
    /// solves run tighter than the rest of the analysis.
    pub integrator: IntegratorSettings,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            ladder: geometric_ladder(1e-1, 1e-4, 8),
            newton_tol_factor: 1e-10,
            max_newton: 30,
            compare_naive_seed: true,
            fit_max_eps: 1e-2,
            exact_floor: 1e-8,
            integrator: IntegratorSettings::with_tolerances(1e-14, 1e-13),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonOutcome {
    pub xi: Vec<f64>,
    pub converged: bool,
    /// Newton updates taken before the residual met the tolerance.
    pub iterations: usize,
    pub residual: f64,
    pub note: Option<String>,
}

/// Newton on `ξ ↦ P_ε(ξ) − ξ` with the Jacobian `P'_ε(ξ) − I` from the perturbed
/// variational equation.
///
/// When the residual meets the tolerance without being far below it, one more update is
/// tried and kept only if it halves the residual; it is not counted as an iteration.
pub fn newton_periodic(flow: &Flow<'_>, seed: &Vector, eps: f64, tol_factor: f64, max_iter: usize) -> NewtonOutcome {
    let n = seed.len();
    let mut xi = seed.clone();
    let fail = |xi: &Vector, iterations, residual, note: String| NewtonOutcome {
        xi: xi.as_slice().to_vec(),
        converged: false,
        iterations,
        // keeps reports free of non-finite numbers
        residual: f64::min(residual, f64::MAX),
        note: Some(note),
    };
    let mut residual = f64::INFINITY;
    for it in 0..=max_iter {
        let (p, dp) = match flow.perturbed_monodromy(&xi, eps) {
            Ok(v) => v,
            Err(e) => return fail(&xi, it, residual, e.to_string()),
        };
        let r = p - &xi;
        residual = r.norm();
        let jac = dp - Matrix::identity(n, n);
        let tol = tol_factor * (1.0 + xi.norm());
        if residual <= tol {
            if eps > 0.0 && residual > 1e-2 * tol {
                let cand = &xi - solve_or_pinv(&jac, &r);
                if let Ok(res) = flow.displacement(&cand, eps).map(|d| d.norm()) {
                    if res < 0.5 * residual {
                        xi = cand;
                        residual = res;
                    }
                }
            }
            return NewtonOutcome {
                xi: xi.as_slice().to_vec(),
                converged: true,
                iterations: it,
                residual,
                note: None,
            };
        }
        if it == max_iter {
            break;
        }
        let step = solve_or_pinv(&jac, &r);
        if !step.iter().all(|v| v.is_finite()) {
            return fail(&xi, it, residual, "singular Newton matrix".into());
        }
        xi -= step;
    }
    fail(&xi, max_iter, residual, format!("no convergence in {max_iter} Newton iterations"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationStep {
    pub eps: f64,
    /// `β(h*, ε) + S(h*)`.
    pub seed: Vec<f64>,
    pub xi: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Iterations from the naive seed `S(h*)`, when compared.
    pub naive_iterations: Option<usize>,
    pub naive_converged: Option<bool>,
    /// `‖P_ε(ξ_ε) − ξ_ε‖`.
    pub residual: f64,
    /// `‖ξ_ε − S(h*)‖`.
    pub distance: f64,
    pub newton_tol: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationRecord {
    pub h_star: Vec<f64>,
    pub base_point: Vec<f64>,
    pub steps: Vec<ContinuationStep>,
    /// Least-squares slope of `log ‖ξ_ε − S(h*)‖` against `log ε`; `None` when the
    /// distances sit at the noise floor (the orbit does not move with `ε`).
    pub slope: Option<f64>,
}

impl ContinuationRecord {
    /// True when every step with `ε ≤ eps_max` converged.
    pub fn converged_up_to(&self, eps_max: f64) -> bool {
        self.steps.iter().filter(|s| s.eps <= eps_max).all(|s| s.converged)
    }

    pub fn converged_steps(&self) -> impl Iterator<Item = &ContinuationStep> {
        self.steps.iter().filter(|s| s.converged)
    }

    /// `(ε, ξ_ε)` pairs of the converged steps with `ε ≤ eps_max`, decreasing in `ε`.
    pub fn observations(&self, eps_max: f64) -> Vec<(f64, Vector)> {
        self.converged_steps()
            .filter(|s| s.eps <= eps_max && s.eps > 0.0)
            .map(|s| (s.eps, Vector::from_column_slice(&s.xi)))
            .collect()
    }
}

/// Least-squares slope of `log y` against `log x`; needs two distinct abscissae.
pub fn fitted_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Follows the periodic orbit bifurcating from `S(h*)` down the `ε` ladder.
///
/// Each ladder entry is independent: Newton is seeded at `β(h*, ε) + S(h*)`, and a
/// failure at some `ε` is recorded in that step rather than aborting the run.
pub fn continue_periodic(reduction: &Reduction<'_>, h_star: &Vector, settings: &ContinuationSettings) -> Result<ContinuationRecord> {
    if settings.ladder.windows(2).any(|w| !(w[1] < w[0])) || settings.ladder.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(Error::Invalid("continuation ladder must be strictly decreasing in [0, 1]".into()));
    }
    settings.integrator.validate()?;
    let flow = Flow::new(reduction.flow().problem(), settings.integrator);
    let base = reduction.chart().point(h_star);
    let floor = settings.exact_floor * (1.0 + base.norm());

    let steps: Vec<ContinuationStep> = settings
        .ladder
        .par_iter()
        .map(|&eps| {
            let newton_tol = settings.newton_tol_factor * (1.0 + base.norm());
            if eps == 0.0 {
                let residual = flow.displacement(&base, 0.0).map(|d| d.norm()).unwrap_or(f64::MAX);
                return ContinuationStep {
                    eps,
                    seed: base.as_slice().to_vec(),
                    xi: base.as_slice().to_vec(),
                    converged: residual <= newton_tol,
                    iterations: 0,
                    naive_iterations: Some(0),
                    naive_converged: Some(residual <= newton_tol),
                    residual,
                    distance: 0.0,
                    newton_tol,
                    note: None,
                };
            }
            let (seed, beta_note, beta_zero) = match reduction.solve_beta(h_star, eps) {
                Ok(b) => (&base + &b.beta, None, b.beta.norm() == 0.0),
                Err(e) => (base.clone(), Some(format!("beta solver failed, seeding at S(h*): {e}")), true),
            };
            let out = newton_periodic(&flow, &seed, eps, settings.newton_tol_factor, settings.max_newton);
            let (naive_iterations, naive_converged) = if !settings.compare_naive_seed {
                (None, None)
            } else if beta_zero {
                (Some(out.iterations), Some(out.converged))
            } else {
                let naive = newton_periodic(&flow, &base, eps, settings.newton_tol_factor, settings.max_newton);
                (Some(naive.iterations), Some(naive.converged))
            };
            let xi = Vector::from_column_slice(&out.xi);
            let note = match (beta_note, out.note) {
                (Some(a), Some(b)) => Some(format!("{a}; {b}")),
                (a, b) => a.or(b),
            };
            ContinuationStep {
                eps,
                seed: seed.as_slice().to_vec(),
                distance: (&xi - &base).norm(),
                xi: out.xi,
                converged: out.converged,
                iterations: out.iterations,
                naive_iterations,
                naive_converged,
                residual: out.residual,
                newton_tol: settings.newton_tol_factor * (1.0 + xi.norm()),
                note,
            }
        })
        .collect();

    let fit: Vec<(f64, f64)> = steps
        .iter()
        .filter(|s| s.converged && s.eps > 0.0 && s.eps <= settings.fit_max_eps && s.distance > floor)
        .map(|s| (s.eps, s.distance))
        .collect();
    Ok(ContinuationRecord {
        h_star: h_star.as_slice().to_vec(),
        base_point: base.as_slice().to_vec(),
        steps,
        slope: fitted_slope(&fit),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::registry;
    use crate::reduction::ReductionSettings;

    #[test]
    fn ladder_and_slope_helpers() {
        let l = geometric_ladder(1e-1, 1e-4, 8);
        assert_eq!(l.len(), 8);
        assert_eq!((l[0], l[7]), (1e-1, 1e-4));
        assert!(l.windows(2).all(|w| (w[1] / w[0] - 10f64.powf(-3.0 / 7.0)).abs() < 1e-12));
        assert!(geometric_ladder(1.0, 0.1, 0).is_empty());
        let pts: Vec<(f64, f64)> = l.iter().map(|&e| (e, 5.0 * e * e)).collect();
        assert!((fitted_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(fitted_slope(&[(1e-2, 1.0)]), None);
    }

    #[test]
    fn harmonic_orbit_does_not_move() {
        let (p, chart) = registry::get("harmonic_forced").unwrap();
        let r = Reduction::new(Flow::new(&p, IntegratorSettings::default()), &chart, ReductionSettings::default());
        let mut settings = ContinuationSettings::default();
        settings.ladder.push(0.0);
        let rec = continue_periodic(&r, &Vector::from_vec(vec![0.0, 1.0]), &settings).unwrap();
        assert_eq!(rec.steps.len(), 9);
        for s in &rec.steps {
            assert!(s.converged && s.residual <= s.newton_tol);
            assert!((Vector::from_column_slice(&s.xi) - Vector::from_vec(vec![0.0, 1.0])).norm() < 1e-8);
        }
        let last = rec.steps.last().unwrap();
        assert_eq!((last.eps, last.iterations, last.distance), (0.0, 0, 0.0));
        assert_eq!(rec.slope, None);
    }

    #[test]
    fn van_der_pol_orbit_moves_at_first_order() {
        let (p, chart) = registry::get("forced_vdp").unwrap();
        let r = Reduction::new(Flow::new(&p, IntegratorSettings::default()), &chart, ReductionSettings::default());
        // the isolated zero on the positive h2 axis
        let m = |h: &Vector| r.bifurcation_function(h);
        let (h, _) = crate::detect::zeros::polish(&m, &Vector::from_vec(vec![0.0, 2.2]), 50).unwrap();
        let rec = continue_periodic(&r, &h, &ContinuationSettings::default()).unwrap();
        assert!(rec.converged_up_to(1e-2));
        let slope = rec.slope.unwrap();
        assert!((slope - 1.0).abs() < 0.1, "{slope}");
        for s in rec.converged_steps() {
            assert!(s.residual <= s.newton_tol);
            assert!(s.iterations <= s.naive_iterations.unwrap());
        }
        assert_eq!(rec.observations(1e-2).len(), rec.steps.iter().filter(|s| s.eps <= 1e-2).count());
    }

    #[test]
    fn bad_ladders_are_rejected() {
        let (p, chart) = registry::get("harmonic_forced").unwrap();
        let r = Reduction::new(Flow::new(&p, IntegratorSettings::default()), &chart, ReductionSettings::default());
        let settings = ContinuationSettings {
            ladder: vec![1e-3, 1e-2],
            ..Default::default()
        };
        assert!(continue_periodic(&r, chart.h0(), &settings).is_err());
    }
}
