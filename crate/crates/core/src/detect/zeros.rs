use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degree::{isolation_test, IsolationTest};
use crate::error::Result;
use crate::linalg::{solve_or_pinv, try_central_jacobian, Vector};
use crate::model::FamilyChart;
use crate::reduction::MGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZeroSearchSettings {
    /// Grid nodes per axis over `h₀ ± r₀`.
    pub grid_resolution: usize,
    /// Polished zeros closer than this (relative to `1 + ‖h‖`) are merged.
    pub dedup_tol: f64,
    pub max_newton: usize,
    /// Isolation sphere radius in grid cells.
    pub isolation_cells: f64,
}

impl Default for ZeroSearchSettings {
    fn default() -> Self {
        Self {
            grid_resolution: 21,
            dedup_tol: 1e-6,
            max_newton: 50,
            isolation_cells: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroCandidate {
    pub h_star: Vec<f64>,
    /// `‖M(h_star)‖` after polishing.
    pub residual: f64,
    pub isolation: Option<IsolationTest>,
    pub isolated: bool,
    pub note: Option<String>,
}

impl ZeroCandidate {
    pub fn h(&self) -> Vector {
        Vector::from_column_slice(&self.h_star)
    }
}

#[derive(Debug, Clone)]
pub struct ZeroSearch {
    pub grid: MGrid,
    /// Zeros that passed the isolation test, in grid order.
    pub zeros: Vec<ZeroCandidate>,
    /// Zeros that failed it (members of a continuum or otherwise not isolated).
    pub non_isolated: Vec<ZeroCandidate>,
    pub isolation_radius: f64,
    pub notes: Vec<String>,
}

/// Damped Newton with a central-difference Jacobian (pseudo-inverse when singular),
/// iterated down to the noise floor of `f`.
pub(crate) fn polish<F>(f: &F, start: &Vector, max_iter: usize) -> Result<(Vector, f64)>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let mut h = start.clone();
    let mut fh = f(&h)?;
    let mut res = fh.norm();
    for _ in 0..max_iter {
        if res == 0.0 {
            break;
        }
        let step = 6e-6 * h.norm().max(1.0);
        let j = try_central_jacobian(f, &h, step)?;
        let dx = solve_or_pinv(&j, &fh);
        if !dx.iter().all(|v| v.is_finite()) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &h - &dx * t;
            let fc = f(&cand)?;
            if fc.norm() < res {
                h = cand;
                fh = fc;
                res = fh.norm();
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted || dx.norm() * t <= 1e-14 * (1.0 + h.norm()) {
            break;
        }
    }
    Ok((h, res))
}

/// Zeros of `f` in the chart ball: grid evaluation, Newton polishing of every local
/// minimum of `‖f‖`, de-duplication and the isolation test.
///
/// Zeros closer to each other than the isolation radius are members of a continuum and
/// are reported as non-isolated without running the sphere test.
pub fn find_zeros<F>(f: F, chart: &FamilyChart, settings: &ZeroSearchSettings) -> Result<ZeroSearch>
where
    F: Fn(&Vector) -> Result<Vector> + Sync,
{
    let grid = MGrid::evaluate(chart, settings.grid_resolution, &f)?;
    let k = grid.k;
    let norms: Vec<f64> = grid.values.iter().map(|v| v.norm()).collect();
    let scale = norms.iter().copied().fold(0.0, f64::max);
    let zero_tol = 1e-9 * scale;
    let radius = settings.isolation_cells * grid.cell;

    let position: HashMap<&[usize], usize> = grid.indices.iter().enumerate().map(|(i, idx)| (idx.as_slice(), i)).collect();
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(k as u32))
        .map(|mut c| {
            (0..k)
                .map(|_| {
                    let d = (c % 3) as i64 - 1;
                    c /= 3;
                    d
                })
                .collect()
        })
        .filter(|o: &Vec<i64>| o.iter().any(|&d| d != 0))
        .collect();
    let minima: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            offsets.iter().all(|o| {
                let nb: Option<Vec<usize>> = grid.indices[i]
                    .iter()
                    .zip(o)
                    .map(|(&a, &d)| usize::try_from(a as i64 + d).ok())
                    .collect();
                match nb.as_ref().and_then(|nb| position.get(nb.as_slice())) {
                    Some(&j) => norms[i] <= norms[j],
                    None => true,
                }
            })
        })
        .collect();

    let polished: Vec<(Vector, f64)> = minima
        .par_iter()
        .map(|&i| {
            if norms[i] == 0.0 {
                Ok((grid.points[i].clone(), norms[i]))
            } else {
                polish(&f, &grid.points[i], settings.max_newton)
            }
        })
        .collect::<Result<_>>()?;

    let mut candidates: Vec<(Vector, f64)> = Vec::new();
    for (h, res) in polished {
        if res > zero_tol {
            continue;
        }
        if (&h - chart.h0()).norm() > chart.r0() * (1.0 + 1e-9) {
            continue;
        }
        match candidates
            .iter_mut()
            .find(|(c, _)| (&*c - &h).norm() <= settings.dedup_tol * (1.0 + h.norm()))
        {
            Some(existing) => {
                if res < existing.1 {
                    *existing = (h, res);
                }
            }
            None => candidates.push((h, res)),
        }
    }

    let crowded: Vec<bool> = candidates
        .iter()
        .enumerate()
        .map(|(i, (h, _))| candidates.iter().enumerate().any(|(j, (o, _))| j != i && (o - h).norm() < radius))
        .collect();

    let tested: Vec<ZeroCandidate> = candidates
        .par_iter()
        .zip(crowded.par_iter())
        .map(|((h, res), &crowded)| {
            let h_star = h.as_slice().to_vec();
            if crowded {
                return Ok(ZeroCandidate {
                    h_star,
                    residual: *res,
                    isolation: None,
                    isolated: false,
                    note: Some(format!("other zeros within {radius:.3e}: part of a continuum of zeros")),
                });
            }
            let iso = isolation_test(&f, h, radius, *res)?;
            let note = match (&iso.nearby_zero, iso.passed) {
                (_, true) => None,
                (Some(z), false) => Some(format!("continuum of zeros: another zero at {z:?}")),
                (None, false) => Some(format!(
                    "sphere minimum {:.3e} does not exceed {:.3e}",
                    iso.sphere_min, iso.threshold
                )),
            };
            Ok(ZeroCandidate {
                h_star,
                residual: *res,
                isolated: iso.passed,
                isolation: Some(iso),
                note,
            })
        })
        .collect::<Result<_>>()?;

    let (zeros, non_isolated): (Vec<_>, Vec<_>) = tested.into_iter().partition(|z| z.isolated);
    let mut notes = Vec::new();
    if !non_isolated.is_empty() {
        notes.push(format!(
            "continuum of zeros: {} zero(s) of M are not isolated and carry no index",
            non_isolated.len()
        ));
    }
    if zeros.is_empty() && non_isolated.is_empty() {
        notes.push("M has no zeros in the ball".into());
    }
    Ok(ZeroSearch {
        grid,
        zeros,
        non_isolated,
        isolation_radius: radius,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{Flow, IntegratorSettings};
    use crate::linalg::Matrix;
    use crate::model::registry::{self, ModelParams};
    use crate::reduction::{BifurcationEvaluator, BifurcationMode, Reduction, ReductionSettings};

    fn plane(r0: f64) -> FamilyChart {
        FamilyChart::affine(Vector::zeros(2), Matrix::identity(2, 2), Vector::zeros(2), r0).unwrap()
    }

    #[test]
    fn two_simple_zeros() {
        let f = |h: &Vector| Ok(Vector::from_vec(vec![h[0] * h[0] - 1.0, h[1] + 0.1 * h[0]]));
        let s = find_zeros(f, &plane(2.0), &ZeroSearchSettings::default()).unwrap();
        assert_eq!(s.zeros.len(), 2);
        let mut xs: Vec<f64> = s.zeros.iter().map(|z| z.h_star[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 1.0).abs() < 1e-12 && (xs[1] - 1.0).abs() < 1e-12);
        assert!(s.non_isolated.is_empty() && s.notes.is_empty());
    }

    #[test]
    fn identically_zero_map_is_a_continuum() {
        let f = |h: &Vector| Ok(Vector::zeros(h.len()));
        let s = find_zeros(f, &plane(1.0), &ZeroSearchSettings { grid_resolution: 7, ..Default::default() }).unwrap();
        assert!(s.zeros.is_empty() && !s.non_isolated.is_empty());
        assert!(s.notes.iter().any(|n| n.contains("continuum of zeros")));
    }

    #[test]
    fn no_zeros_is_a_valid_outcome() {
        let f = |h: &Vector| Ok(Vector::from_vec(vec![1.0 + h[0] * h[0], h[1]]));
        let s = find_zeros(f, &plane(1.0), &ZeroSearchSettings::default()).unwrap();
        assert!(s.zeros.is_empty() && s.non_isolated.is_empty());
        assert_eq!(s.notes, vec!["M has no zeros in the ball".to_string()]);
    }

    #[test]
    fn harmonic_forced_has_one_zero() {
        let (p, chart) = registry::get("harmonic_forced").unwrap();
        let chart = chart.with_ball(Vector::zeros(2), 2.0).unwrap();
        let r = Reduction::new(Flow::new(&p, IntegratorSettings::default()), &chart, ReductionSettings::default());
        let s = find_zeros(|h: &Vector| r.bifurcation_function(h), &chart, &ZeroSearchSettings::default()).unwrap();
        assert_eq!(s.zeros.len(), 1);
        assert!((s.zeros[0].h() - Vector::from_vec(vec![0.0, 1.0])).norm() < 1e-8);
    }

    #[test]
    fn autonomous_van_der_pol_circle_and_origin() {
        let mut params = ModelParams::new();
        params.insert("lambda".into(), 0.0);
        let (p, chart) = registry::build("forced_vdp", &params).unwrap();
        let r = Reduction::new(Flow::new(&p, IntegratorSettings::default()), &chart, ReductionSettings::default());
        let m = BifurcationEvaluator::new(r, BifurcationMode::Consistent).unwrap();
        let settings = ZeroSearchSettings {
            grid_resolution: 15,
            ..Default::default()
        };
        let s = find_zeros(|h: &Vector| m.eval(h), &chart, &settings).unwrap();
        assert_eq!(s.zeros.len(), 1, "{:?}", s.zeros);
        assert!(s.zeros[0].h().norm() < 1e-8);
        assert!(!s.non_isolated.is_empty());
        for z in &s.non_isolated {
            assert!((z.h().norm() - 2.0).abs() < 1e-6, "{:?}", z.h_star);
        }
    }
}
