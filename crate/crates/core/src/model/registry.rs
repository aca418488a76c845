//! Built-in models with closed-form ground truth.
//!
//! All planar oscillators use the state `(x, ẋ)`, so the linear part is
//! `[[0, 1], [−1, 0]]` and its flow is `e^{At} = [[cos t, sin t], [−sin t, cos t]]`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::model::{EvolutionProblem, FamilyChart, LinearPart, SpectralBlock, SpectralForm};

/// Numeric model parameters by name.
pub type ModelParams = BTreeMap<String, f64>;

#[derive(Debug, Clone, Serialize)]
pub struct ModelInfo {
    pub name: &'static str,
    pub n: usize,
    pub k: usize,
    pub period: f64,
    pub params: Vec<(&'static str, f64)>,
    pub notes: &'static str,
}

pub const MODEL_NAMES: [&str; 4] = ["harmonic_forced", "center_contraction", "forced_vdp", "galerkin_heat_osc"];

fn defaults(name: &str) -> Option<Vec<(&'static str, f64)>> {
    let d = match name {
        "harmonic_forced" => vec![("lambda", 1.0), ("k", 2.0), ("period", 2.0 * PI)],
        "center_contraction" => vec![
            ("gamma", 1.0),
            ("c1", 0.0),
            ("c2", 0.0),
            ("c3", 1.0),
            ("a1", 0.0),
            ("a2", 0.0),
            ("a3", 0.0),
            ("b1", 0.0),
            ("b2", 0.0),
            ("b3", 0.0),
            ("kappa", 0.0),
            ("period", 2.0 * PI),
        ],
        "forced_vdp" => vec![("lambda", 0.5), ("mu", 1.0), ("period", 2.0 * PI)],
        "galerkin_heat_osc" => vec![("modes", 8.0), ("lambda", 0.5), ("coupling", 0.5), ("period", 2.0 * PI)],
        _ => return None,
    };
    Some(d)
}

fn notes(name: &str) -> &'static str {
    match name {
        "harmonic_forced" => "x'' + x = eps(-x' + lambda cos t); x = lambda sin t is periodic for every eps; M(h) = pi(-h1, lambda - h2), zero (0, lambda), index +1",
        "center_contraction" => "planar center (+) z' = -gamma z, S(h) = (h1, h2, 0); g = c + a cos t + b sin t + (0, 0, kappa x1 z); P0 = diag(I, e^{-2 pi gamma})",
        "forced_vdp" => "x'' + x = eps(mu(1 - x^2)x' + lambda cos t); M(h) = pi(h1(1 - |h|^2/4), h2(1 - |h|^2/4) + lambda) for mu = 1",
        "galerkin_heat_osc" => "forced van der Pol oscillator coupled to heat modes z_j' = -j^2 z_j (spectral, stiff); oscillator driven by coupling * sum z_j / j, modes forced by eps coupling x1^2 / j^2",
        _ => "",
    }
}

pub fn available() -> Vec<String> {
    MODEL_NAMES.iter().map(|s| s.to_string()).collect()
}

fn unknown(name: &str) -> Error {
    Error::UnknownModel {
        name: name.to_string(),
        available: available(),
    }
}

/// Default parameters of a model.
pub fn default_params(name: &str) -> Result<ModelParams> {
    let d = defaults(name).ok_or_else(|| unknown(name))?;
    Ok(d.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

pub fn info(name: &str) -> Result<ModelInfo> {
    let params = defaults(name).ok_or_else(|| unknown(name))?;
    let (problem, chart) = get(name)?;
    let name = MODEL_NAMES.iter().find(|m| **m == name).copied().expect("known name");
    Ok(ModelInfo {
        name,
        n: problem.dim(),
        k: chart.k(),
        period: problem.period(),
        params,
        notes: notes(name),
    })
}

/// The named model with default parameters.
pub fn get(name: &str) -> Result<(EvolutionProblem, FamilyChart)> {
    build(name, &ModelParams::new())
}

/// The named model with `overrides` applied on top of the defaults; unknown parameter
/// names are rejected.
pub fn build(name: &str, overrides: &ModelParams) -> Result<(EvolutionProblem, FamilyChart)> {
    let mut params = default_params(name)?;
    for (key, value) in overrides {
        if !params.contains_key(key) {
            let known: Vec<&str> = params.keys().map(String::as_str).collect();
            return Err(Error::Invalid(format!(
                "model '{name}' has no parameter '{key}' (parameters: {})",
                known.join(", ")
            )));
        }
        if !value.is_finite() {
            return Err(Error::Invalid(format!("parameter '{key}' must be finite")));
        }
        params.insert(key.clone(), *value);
    }
    let p = |k: &str| params[k];
    let period = p("period");
    match name {
        "harmonic_forced" => harmonic_forced(p("lambda"), p("k"), period),
        "center_contraction" => center_contraction(&params, period),
        "forced_vdp" => forced_vdp(p("lambda"), p("mu"), period),
        "galerkin_heat_osc" => galerkin_heat_osc(p("modes"), p("lambda"), p("coupling"), period),
        _ => Err(unknown(name)),
    }
}

fn rotation() -> Matrix {
    Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

fn coordinate_chart(n: usize, k: usize, h0: Vector, r0: f64) -> Result<FamilyChart> {
    let basis = Matrix::from_fn(n, k, |i, j| if i == j { 1.0 } else { 0.0 });
    FamilyChart::affine(Vector::zeros(n), basis, h0, r0)
}

fn harmonic_forced(lambda: f64, k: f64, period: f64) -> Result<(EvolutionProblem, FamilyChart)> {
    let problem = EvolutionProblem::builder("harmonic_forced", LinearPart::dense(rotation()), period)
        .perturbation(move |t, x, _eps| Vector::from_vec(vec![0.0, -x[1] + lambda * t.cos()]))
        .build()?;
    let chart = match k {
        k if k == 2.0 => coordinate_chart(2, 2, Vector::zeros(2), 2.5)?,
        // one-parameter sub-family along the position axis: the velocity direction is a
        // neutral center direction, so the complement operator is singular
        k if k == 1.0 => coordinate_chart(2, 1, Vector::from_element(1, 1.0), 0.5)?,
        _ => return Err(Error::Invalid(format!("harmonic_forced supports k = 1 or 2, got {k}"))),
    };
    Ok((problem, chart))
}

fn center_contraction(params: &ModelParams, period: f64) -> Result<(EvolutionProblem, FamilyChart)> {
    let gamma = params["gamma"];
    let get3 = |prefix: &str| Vector::from_iterator(3, (1..=3).map(|i| params[&format!("{prefix}{i}")]));
    let (c, a, b) = (get3("c"), get3("a"), get3("b"));
    let kappa = params["kappa"];
    let mut m = Matrix::zeros(3, 3);
    m.view_mut((0, 0), (2, 2)).copy_from(&rotation());
    m[(2, 2)] = -gamma;
    let problem = EvolutionProblem::builder("center_contraction", LinearPart::dense(m), period)
        .perturbation(move |t, x, _eps| {
            let mut out = &c + &a * t.cos() + &b * t.sin();
            out[2] += kappa * x[0] * x[2];
            out
        })
        .build()?;
    let basis = Matrix::from_fn(3, 2, |i, j| if i == j { 1.0 } else { 0.0 });
    let chart = FamilyChart::affine(Vector::zeros(3), basis, Vector::zeros(2), 1.0)?;
    Ok((problem, chart))
}

fn forced_vdp(lambda: f64, mu: f64, period: f64) -> Result<(EvolutionProblem, FamilyChart)> {
    let problem = EvolutionProblem::builder("forced_vdp", LinearPart::dense(rotation()), period)
        .perturbation(move |t, x, _eps| {
            Vector::from_vec(vec![0.0, mu * (1.0 - x[0] * x[0]) * x[1] + lambda * t.cos()])
        })
        .build()?;
    let chart = coordinate_chart(2, 2, Vector::zeros(2), 2.5)?;
    Ok((problem, chart))
}

fn galerkin_heat_osc(modes: f64, lambda: f64, coupling: f64, period: f64) -> Result<(EvolutionProblem, FamilyChart)> {
    if !(modes >= 1.0 && modes.fract() == 0.0 && modes <= 64.0) {
        return Err(Error::Invalid(format!("modes must be an integer in [1, 64], got {modes}")));
    }
    let modes = modes as usize;
    let n = modes + 2;
    let mut blocks = vec![SpectralBlock::Complex { re: 0.0, im: -1.0 }];
    blocks.extend((1..=modes).map(|j| SpectralBlock::Real(-((j * j) as f64))));
    // oscillator velocity driven by the heat modes; vanishes on the family z = 0
    let mut fx = Matrix::zeros(n, n);
    for j in 1..=modes {
        fx[(1, j + 1)] = coupling / j as f64;
    }
    let fx_f = fx.clone();
    let problem = EvolutionProblem::builder("galerkin_heat_osc", LinearPart::spectral(SpectralForm::new(blocks)), period)
        .nonlinearity(move |_t, x| &fx_f * x)
        .jacobian(move |_t, _x| fx.clone())
        .perturbation(move |t, x, _eps| {
            let mut out = Vector::zeros(n);
            out[1] = (1.0 - x[0] * x[0]) * x[1] + lambda * t.cos();
            for j in 1..=modes {
                out[j + 1] = coupling * x[0] * x[0] / (j * j) as f64;
            }
            out
        })
        .build()?;
    let chart = coordinate_chart(n, 2, Vector::zeros(2), 2.5)?;
    Ok((problem, chart))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::IntegratorSettings;
    use crate::model::{validate_problem, ValidationSettings};

    #[test]
    fn registry_contract() {
        let (p, c) = get("harmonic_forced").unwrap();
        assert_eq!((p.dim(), c.k(), p.period()), (2, 2, 2.0 * PI));

        let (p, c) = get("center_contraction").unwrap();
        assert_eq!((p.dim(), c.k()), (3, 2));
        let want = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        for h in [[0.0, 0.0], [1.0, -0.5]] {
            assert_eq!(c.derivative(&Vector::from_column_slice(&h)), want);
        }

        let (p, c) = get("galerkin_heat_osc").unwrap();
        assert_eq!((p.dim(), c.k()), (10, 2));
        let form = p.linear().spectral_form().expect("spectral linear part");
        let mut spectrum = form.spectrum();
        assert_eq!(spectrum.remove(0), (0.0, 1.0));
        let decay: Vec<f64> = spectrum.iter().map(|s| s.0).collect();
        assert_eq!(decay, (1..=8).map(|j| -((j * j) as f64)).collect::<Vec<_>>());

        let (p, _) = get("forced_vdp").unwrap();
        assert_eq!(p.dim(), 2);
    }

    #[test]
    fn unknown_names_and_parameters_are_reported() {
        let msg = get("lorenz").unwrap_err().to_string();
        for name in MODEL_NAMES {
            assert!(msg.contains(name), "{msg}");
        }
        let mut bad = ModelParams::new();
        bad.insert("omega".into(), 2.0);
        assert!(build("harmonic_forced", &bad).unwrap_err().to_string().contains("lambda"));
        let mut modes = ModelParams::new();
        modes.insert("modes".into(), 3.0);
        assert_eq!(build("galerkin_heat_osc", &modes).unwrap().0.dim(), 5);
    }

    #[test]
    fn every_model_validates_at_default_tolerances() {
        for name in MODEL_NAMES {
            let (p, c) = get(name).unwrap();
            let s = validate_problem(&p, &c, 8, &ValidationSettings::default(), IntegratorSettings::default()).unwrap();
            assert!(s.passed, "{name}: {:?}", s.failures().collect::<Vec<_>>());
            assert_eq!(info(name).unwrap().n, p.dim());
        }
    }
}
