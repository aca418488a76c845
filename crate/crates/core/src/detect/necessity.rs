use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::continuation::newton_periodic;
use crate::error::{Error, Result};
use crate::flow::Flow;
use crate::linalg::{Matrix, Vector};
use crate::model::{ball_samples, FamilyChart};
use crate::reduction::BifurcationEvaluator;

/// Chart coordinates of a sequence of periodic initial conditions and their `ε → 0` limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartLimit {
    /// Extrapolated `lim H(ξ_ε)`.
    pub h_limit: Vec<f64>,
    /// `H(ξ_n)` for each observation, in decreasing `ε`.
    pub coordinates: Vec<Vec<f64>>,
    /// `‖ξ_n − S(H(ξ_n))‖`, the distance of each observation to the family.
    pub family_distances: Vec<f64>,
    /// `‖ξ_n − S(h_limit)‖`.
    pub limit_distances: Vec<f64>,
}

/// `H(ξ_n)` for observations `(ε_n, ξ_n)` and a polynomial extrapolation to `ε = 0`
/// (degree up to 2, fitted to the four smallest `ε`).
///
/// Fails unless the orbits approach the family: the distances `‖ξ_n − S(h_limit)‖`
/// must not increase as `ε` decreases.
pub fn chart_limit(chart: &FamilyChart, observed: &[(f64, Vector)]) -> Result<ChartLimit> {
    if observed.is_empty() {
        return Err(Error::Invalid("necessity check needs at least one observed solution".into()));
    }
    if observed.iter().any(|(e, x)| !(*e > 0.0) || x.len() != chart.n()) {
        return Err(Error::Invalid("observations need eps > 0 and states of the chart dimension".into()));
    }
    let mut obs: Vec<(f64, Vector)> = observed.to_vec();
    obs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut guess = chart.h0().clone();
    let mut coords = Vec::with_capacity(obs.len());
    let mut family_distances = Vec::with_capacity(obs.len());
    for (_, xi) in &obs {
        let h = chart.coordinates(xi, &guess);
        family_distances.push((xi - chart.point(&h)).norm());
        guess = h.clone();
        coords.push(h);
    }

    let k = chart.k();
    let m = obs.len().min(4);
    let tail = obs.len() - m;
    let degree = (m - 1).min(2);
    let eps_scale = obs[tail].0;
    let vander = Matrix::from_fn(m, degree + 1, |i, j| (obs[tail + i].0 / eps_scale).powi(j as i32));
    let svd = vander.svd(true, true);
    let mut h_limit = Vector::zeros(k);
    for d in 0..k {
        let rhs = Vector::from_iterator(m, (0..m).map(|i| coords[tail + i][d]));
        let c = svd
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::Invalid(format!("extrapolation failed: {e}")))?;
        h_limit[d] = c[0];
    }

    let s_lim = chart.point(&h_limit);
    let limit_distances: Vec<f64> = obs.iter().map(|(_, xi)| (xi - &s_lim).norm()).collect();
    let slack = 1e-9 * (1.0 + s_lim.norm());
    if limit_distances.windows(2).any(|w| w[1] > w[0] + slack) {
        return Err(Error::Invalid(format!(
            "observed solutions do not converge to the family (distances {limit_distances:?})"
        )));
    }
    Ok(ChartLimit {
        h_limit: h_limit.as_slice().to_vec(),
        coordinates: coords.iter().map(|h| h.as_slice().to_vec()).collect(),
        family_distances,
        limit_distances,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessityResult {
    pub limit: ChartLimit,
    /// `‖M(h_limit)‖`.
    pub m_norm: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Checks that the chart limit of a converging family of periodic solutions is a zero of
/// `M`; passes iff `‖M(h_limit)‖ ≤ tol`.
pub fn necessity_check(evaluator: &BifurcationEvaluator<'_>, observed: &[(f64, Vector)], tol: f64) -> Result<NecessityResult> {
    let chart = evaluator.reduction().chart();
    let limit = chart_limit(chart, observed)?;
    let m = evaluator.eval(&Vector::from_column_slice(&limit.h_limit))?;
    let m_norm = m.norm();
    Ok(NecessityResult {
        limit,
        m_norm,
        tol,
        passed: m_norm <= tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub eps: f64,
    pub radius: f64,
    pub seeds: usize,
    /// Newton runs that converged to some periodic initial condition.
    pub converged: usize,
    /// Converged initial conditions within `radius` of the family over the chart ball.
    pub found: Vec<Vec<f64>>,
}

/// Newton on the displacement map from a seeded cloud of initial conditions within
/// `radius` of the family, looking for periodic orbits near it.
///
/// Seeds are `S(h) + ρ·u` with `h` Latin-hypercube samples in the chart ball, `u` a random
/// unit vector and `ρ` uniform in `[0, radius]`.
pub fn seeded_newton_sweep(flow: &Flow<'_>, chart: &FamilyChart, eps: f64, radius: f64, seeds: usize, seed: u64) -> Result<SweepResult> {
    if !(eps > 0.0) || !(radius > 0.0) || seeds == 0 {
        return Err(Error::Invalid("sweep needs eps > 0, radius > 0 and at least one seed".into()));
    }
    let n = chart.n();
    let hs = ball_samples(chart, seeds, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let starts: Vec<Vector> = hs
        .iter()
        .map(|h| {
            let u = loop {
                let u = Vector::from_iterator(n, (0..n).map(|_| rng.random_range(-1.0..1.0)));
                let norm = u.norm();
                if norm > 1e-3 && norm <= 1.0 {
                    break u / norm;
                }
            };
            chart.point(h) + u * (radius * rng.random::<f64>())
        })
        .collect();
    let outcomes: Vec<_> = starts
        .par_iter()
        .map(|s| newton_periodic(flow, s, eps, 1e-10, 20))
        .collect();
    let mut converged = 0;
    let mut found = Vec::new();
    for out in outcomes.into_iter().filter(|o| o.converged) {
        converged += 1;
        let xi = Vector::from_column_slice(&out.xi);
        let h = chart.coordinates(&xi, chart.h0());
        if chart.contains(&h) && (&xi - chart.point(&h)).norm() <= radius {
            found.push(out.xi);
        }
    }
    Ok(SweepResult {
        eps,
        radius,
        seeds,
        converged,
        found,
    })
}
