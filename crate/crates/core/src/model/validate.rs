use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{Flow, IntegratorSettings};
use crate::linalg::{central_jacobian, range_basis, Vector};
use crate::model::{EvolutionProblem, FamilyChart, SemigroupClass};

/// One named hypothesis check: a residual compared against its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    /// Passes when `residual ≤ threshold`.
    pub fn at_most(name: &str, residual: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            residual: f64::min(residual, f64::MAX),
            threshold,
            passed: residual.is_finite() && residual <= threshold,
            detail: detail.into(),
        }
    }

    /// Passes when `residual > threshold`.
    pub fn above(name: &str, residual: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            residual: f64::min(residual, f64::MAX),
            threshold,
            passed: residual.is_finite() && residual > threshold,
            detail: detail.into(),
        }
    }

    pub fn failed(name: &str, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            residual: 0.0,
            threshold: 0.0,
            passed: false,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl ValidationSummary {
    pub fn new(checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self { checks, passed }
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationSettings {
    pub seed: u64,
    /// Relative error allowed between analytic and finite-difference derivatives.
    pub derivative_rel_tol: f64,
    /// Fixed-point residuals (relative to `1 + ‖S(h)‖`) may reach this multiple of
    /// `abs_tol + rel_tol`.
    pub fixed_point_factor: f64,
    /// `σ_min(S'(h0)) > rank_threshold · σ_max`.
    pub rank_threshold: f64,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            derivative_rel_tol: 1e-5,
            fixed_point_factor: 1e3,
            rank_threshold: 1e-8,
        }
    }
}

/// Latin-hypercube sample of `count` points in the cube `center ± half_width`.
pub fn latin_hypercube(rng: &mut impl Rng, center: &Vector, half_width: f64, count: usize) -> Vec<Vector> {
    let k = center.len();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut strata: Vec<usize> = (0..count).collect();
        strata.shuffle(rng);
        columns.push(
            strata
                .into_iter()
                .map(|s| (s as f64 + rng.random::<f64>()) / count as f64)
                .collect(),
        );
    }
    (0..count)
        .map(|i| Vector::from_iterator(k, (0..k).map(|d| center[d] + half_width * (2.0 * columns[d][i] - 1.0))))
        .collect()
}

/// Sample points inside the chart ball; the cube is inscribed so every point lies in it.
pub fn ball_samples(chart: &FamilyChart, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = chart.r0() / (chart.k() as f64).sqrt();
    latin_hypercube(&mut rng, chart.h0(), half, count)
}

/// Checks the structural hypotheses of a problem/chart pair: periodicity of `f` and `g`,
/// Jacobian consistency, the fixed-point identity `P₀(S(h)) = S(h)` on the ball, and the
/// rank of `S'(h0)`.
pub fn validate_problem(
    problem: &EvolutionProblem,
    chart: &FamilyChart,
    samples: usize,
    settings: &ValidationSettings,
    integrator: IntegratorSettings,
) -> Result<ValidationSummary> {
    if samples == 0 {
        return Err(Error::Invalid("validation needs at least one sample".into()));
    }
    if chart.n() != problem.dim() {
        return Err(Error::Invalid(format!(
            "chart maps into R^{} but the problem has dimension {}",
            chart.n(),
            problem.dim()
        )));
    }
    let n = problem.dim();
    let period = problem.period();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let hs = ball_samples(chart, samples, settings.seed ^ 0xa5a5);

    // sampled states around the family
    let states: Vec<(f64, Vector, f64)> = hs
        .iter()
        .map(|h| {
            let base = chart.point(h);
            let jitter = Vector::from_iterator(n, (0..n).map(|_| rng.random_range(-0.5..0.5)));
            (rng.random_range(0.0..period), base + jitter, rng.random_range(0.0..1.0))
        })
        .collect();

    let mut checks = Vec::new();

    let mut f_per: f64 = 0.0;
    let mut g_per: f64 = 0.0;
    for (t, x, eps) in &states {
        let scale_f = 1.0 + problem.f(*t, x).norm();
        let scale_g = 1.0 + problem.g(*t, x, *eps).norm();
        f_per = f_per.max((problem.f(t + period, x) - problem.f(*t, x)).norm() / scale_f);
        g_per = g_per.max((problem.g(t + period, x, *eps) - problem.g(*t, x, *eps)).norm() / scale_g);
    }
    checks.push(Check::at_most("periodicity_f", f_per, 1e-12, "max |f(t+T,x) - f(t,x)| / (1 + |f|)"));
    checks.push(Check::at_most("periodicity_g", g_per, 1e-12, "max |g(t+T,x,eps) - g(t,x,eps)| / (1 + |g|)"));

    let mut jac_err: f64 = 0.0;
    for (t, x, _) in &states {
        let analytic = problem.f_x(*t, x);
        let step = 1e-6 * x.norm().max(1.0);
        let fd = central_jacobian(|y| problem.f(*t, y), x, step);
        jac_err = jac_err.max((&analytic - &fd).norm() / analytic.norm().max(1.0));
    }
    checks.push(Check::at_most(
        "jacobian_consistency",
        jac_err,
        settings.derivative_rel_tol,
        if problem.has_analytic_jacobian() { "analytic f_x vs central differences" } else { "f_x synthesized by central differences" },
    ));

    let mut chart_err: f64 = 0.0;
    for h in &hs {
        let d = chart.derivative(h);
        let fd = central_jacobian(|y| chart.point(y), h, 1e-6 * h.norm().max(1.0));
        chart_err = chart_err.max((&d - &fd).norm() / d.norm().max(1.0));
    }
    checks.push(Check::at_most("chart_derivative", chart_err, settings.derivative_rel_tol, "S'(h) vs central differences"));

    let flow = Flow::new(problem, integrator);
    let mut fp_res: f64 = 0.0;
    let mut worst_h = chart.h0().clone();
    let mut blowup: Option<(Vector, String)> = None;
    let mut probe: Vec<Vector> = vec![chart.h0().clone()];
    probe.extend(hs.iter().cloned());
    for h in &probe {
        let s = chart.point(h);
        match flow.displacement(&s, 0.0) {
            Ok(d) => {
                let r = d.norm() / (1.0 + s.norm());
                if r > fp_res {
                    fp_res = r;
                    worst_h = h.clone();
                }
            }
            Err(e) => {
                blowup = Some((h.clone(), e.to_string()));
                break;
            }
        }
    }
    match &blowup {
        Some((h, msg)) => {
            checks.push(Check::failed("A0_poincare_defined", format!("unperturbed solution from S(h), h = {:?}, fails on [0, T]: {msg}", h.as_slice())));
            checks.push(Check::failed("A1_fixed_point", "not evaluated: Poincare map undefined"));
        }
        None => {
            checks.push(Check::at_most("A0_poincare_defined", 0.0, 0.0, "unperturbed solutions exist on [0, T] at all sampled h"));
            checks.push(Check::at_most(
                "A1_fixed_point",
                fp_res,
                settings.fixed_point_factor * (integrator.abs_tol + integrator.rel_tol),
                format!("max |P0(S(h)) - S(h)| / (1 + |S(h)|), worst at h = {:?}", worst_h.as_slice()),
            ));
        }
    }

    let (_, sv) = range_basis(&chart.derivative(chart.h0()));
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    checks.push(Check::above(
        "A2_rank",
        if smax > 0.0 { smin / smax } else { 0.0 },
        settings.rank_threshold,
        format!("singular values of S'(h0): {sv:?}"),
    ));

    if let SemigroupClass::ContractiveC0 { decay } = problem.semigroup() {
        let mu = problem.linear().matrix_measure();
        checks.push(Check::at_most("semigroup_contractive", mu + decay, 1e-12, format!("mu(A) = {mu} must not exceed -gamma = {}", -decay)));
    }

    Ok(ValidationSummary::new(checks))
}
