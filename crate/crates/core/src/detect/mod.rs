//! Zeros of the bifurcation function, their indices, existence and necessity verdicts,
//! and the continuation runs that check each verdict against the full system.

mod continuation;
mod necessity;
mod zeros;

pub use continuation::{
    continue_periodic, fitted_slope, geometric_ladder, newton_periodic, ContinuationRecord, ContinuationSettings,
    ContinuationStep, NewtonOutcome,
};
pub use necessity::{chart_limit, necessity_check, seeded_newton_sweep, ChartLimit, NecessityResult, SweepResult};
pub use zeros::{find_zeros, ZeroCandidate, ZeroSearch, ZeroSearchSettings};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::degree::{index_of_isolated_zero, DegreeResult, IsolationTest};
use crate::error::{Error, Result};
use crate::flow::{Flow, IntegratorSettings};
use crate::linalg::Vector;
use crate::model::{ball_samples, validate_problem, Check, EvolutionProblem, FamilyChart, ValidationSettings};
use crate::reduction::{BifurcationEvaluator, BifurcationMode, MGrid, Reduction, ReductionSettings};

pub const REPORT_SCHEMA: &str = "bifurcate-kit/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// Isolated zero with nonzero index and all hypotheses checked.
    ExistencePredicted,
    /// No isolated zero with nonzero index; the index gives no existence information.
    NoObstruction,
    AssumptionFailure,
}

/// Everything [`analyze`] needs besides the problem and chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub mode: BifurcationMode,
    pub integrator: IntegratorSettings,
    pub reduction: ReductionSettings,
    pub zeros: ZeroSearchSettings,
    pub continuation: ContinuationSettings,
    /// Run continuation for every zero with an existence verdict.
    pub run_continuation: bool,
    pub validation_samples: usize,
    pub seed: u64,
    /// Largest admissible `‖M‖` at the chart limit of a continued family.
    pub necessity_tol: f64,
    /// Largest admissible empirical Lipschitz constant of `h ↦ π₁,h`.
    pub projector_lipschitz_bound: f64,
    /// Model parameters, recorded in the report and the config hash.
    pub model_params: BTreeMap<String, f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            mode: BifurcationMode::Consistent,
            integrator: IntegratorSettings::default(),
            reduction: ReductionSettings::default(),
            zeros: ZeroSearchSettings::default(),
            continuation: ContinuationSettings::default(),
            run_continuation: true,
            validation_samples: 16,
            seed: 0x5eed,
            necessity_tol: 1e-6,
            projector_lipschitz_bound: 1e4,
            model_params: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub period: f64,
    pub spectral_linear_part: bool,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSummary {
    pub h0: Vec<f64>,
    pub r0: f64,
    pub grid_resolution: usize,
    pub isolation_radius: f64,
    pub analytic_derivative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroReport {
    pub h_star: Vec<f64>,
    pub m_norm: f64,
    pub index: Option<DegreeResult>,
    pub verdict: Verdict,
    pub isolation: Option<IsolationTest>,
    /// Condition estimate of the complement operator at `h_star`.
    pub complement_condition: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationReport {
    pub schema: String,
    pub tool_version: String,
    pub model: ModelSummary,
    pub chart: ChartSummary,
    pub config_hash: String,
    pub mode: BifurcationMode,
    pub verdict: Verdict,
    pub assumption_checks: Vec<Check>,
    pub zeros: Vec<ZeroReport>,
    pub non_isolated_zeros: Vec<ZeroReport>,
    pub continuations: Vec<ContinuationRecord>,
    pub necessity: Vec<NecessityResult>,
    pub notes: Vec<String>,
    /// Seconds since the Unix epoch; the only field that varies between identical runs.
    pub timestamp: u64,
}

impl BifurcationReport {
    pub fn predicted(&self) -> impl Iterator<Item = &ZeroReport> {
        self.zeros.iter().filter(|z| z.verdict == Verdict::ExistencePredicted)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.assumption_checks.iter().filter(|c| !c.passed)
    }
}

/// A finished analysis: the report plus the `M` grid it was computed from.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: BifurcationReport,
    pub grid: Option<MGrid>,
}

/// SHA-256 over the canonical JSON of the problem identity, chart and configuration.
pub fn config_hash(problem: &EvolutionProblem, chart: &FamilyChart, config: &AnalysisConfig) -> Result<String> {
    #[derive(Serialize)]
    struct Identity<'a> {
        schema: &'a str,
        model: &'a str,
        n: usize,
        period: f64,
        h0: &'a [f64],
        r0: f64,
        config: &'a AnalysisConfig,
    }
    let bytes = serde_json::to_vec(&Identity {
        schema: REPORT_SCHEMA,
        model: problem.name(),
        n: problem.dim(),
        period: problem.period(),
        h0: chart.h0().as_slice(),
        r0: chart.r0(),
        config,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Hypothesis checks that do not need the zero search: validation of the problem, the
/// continuity of the projectors and invertibility of the complement operator at `h₀`.
pub fn assumption_checks(problem: &EvolutionProblem, chart: &FamilyChart, config: &AnalysisConfig) -> Result<Vec<Check>> {
    let settings = ValidationSettings {
        seed: config.seed,
        rank_threshold: config.reduction.rank_threshold,
        ..ValidationSettings::default()
    };
    let mut checks = validate_problem(problem, chart, config.validation_samples.max(1), &settings, config.integrator)?.checks;
    let flow = Flow::new(problem, config.integrator);
    let reduction = Reduction::new(flow, chart, config.reduction);

    let rank_ok = checks.iter().find(|c| c.name == "A2_rank").is_some_and(|c| c.passed);
    let flow_ok = checks.iter().find(|c| c.name == "A0_poincare_defined").is_some_and(|c| c.passed);
    if rank_ok {
        let hs = ball_samples(chart, 8, config.seed ^ 0x3a3a);
        let delta = 1e-3 * chart.r0();
        let pairs: Vec<(Vector, Vector)> = hs
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let mut other = h.clone();
                other[i % chart.k()] += delta;
                (h.clone(), other)
            })
            .collect();
        match reduction.projector_lipschitz(&pairs) {
            Ok(l) => checks.push(Check::at_most(
                "A3_projector_continuity",
                l,
                config.projector_lipschitz_bound,
                "max |pi1(h) - pi1(h')| / |h - h'| over sampled pairs",
            )),
            Err(e) => checks.push(Check::failed("A3_projector_continuity", e.to_string())),
        }
    } else {
        checks.push(Check::failed("A3_projector_continuity", "not evaluated: S'(h) is rank deficient"));
    }

    if rank_ok && flow_ok {
        match reduction.complement_operator(chart.h0()) {
            Ok(d) => {
                let smin = d.singular_values.last().copied();
                let detail = match (smin, d.condition_estimate) {
                    (None, _) => "empty complement (k = n): trivially invertible".to_string(),
                    (Some(_), Some(c)) => format!("singular values of D at h0: {:?}, condition {c:.3e}", d.singular_values),
                    (Some(_), None) => format!("D is singular at h0: singular values {:?}", d.singular_values),
                };
                checks.push(Check::above(
                    "A4_complement_invertible",
                    smin.unwrap_or(f64::MAX),
                    config.reduction.complement_threshold,
                    detail,
                ));
            }
            Err(e) => checks.push(Check::failed("A4_complement_invertible", e.to_string())),
        }
    } else {
        checks.push(Check::failed("A4_complement_invertible", "not evaluated: earlier hypotheses failed"));
    }
    Ok(checks)
}

/// Runs validation, the zero search, indices, verdicts and (optionally) continuation and
/// necessity checks. Assumption failures yield a report, not an error; errors are
/// reserved for malformed inputs.
pub fn analyze(problem: &EvolutionProblem, chart: &FamilyChart, config: &AnalysisConfig) -> Result<Analysis> {
    config.integrator.validate()?;
    if chart.n() != problem.dim() {
        return Err(Error::Invalid(format!(
            "chart maps into R^{} but the problem has dimension {}",
            chart.n(),
            problem.dim()
        )));
    }
    let mut checks = assumption_checks(problem, chart, config)?;
    let radius = config.zeros.isolation_cells * 2.0 * chart.r0() / (config.zeros.grid_resolution.max(2) - 1) as f64;
    let mut report = BifurcationReport {
        schema: REPORT_SCHEMA.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        model: ModelSummary {
            name: problem.name().to_string(),
            n: problem.dim(),
            k: chart.k(),
            period: problem.period(),
            spectral_linear_part: problem.linear().is_spectral(),
            params: config.model_params.clone(),
        },
        chart: ChartSummary {
            h0: chart.h0().as_slice().to_vec(),
            r0: chart.r0(),
            grid_resolution: config.zeros.grid_resolution,
            isolation_radius: radius,
            analytic_derivative: chart.has_analytic_derivative(),
        },
        config_hash: config_hash(problem, chart, config)?,
        mode: config.mode,
        verdict: Verdict::NoObstruction,
        assumption_checks: Vec::new(),
        zeros: Vec::new(),
        non_isolated_zeros: Vec::new(),
        continuations: Vec::new(),
        necessity: Vec::new(),
        notes: Vec::new(),
        timestamp: timestamp(),
    };

    if checks.iter().any(|c| !c.passed) {
        report.notes.extend(checks.iter().filter(|c| !c.passed).map(|c| format!("{} failed: {}", c.name, c.detail)));
        report.verdict = Verdict::AssumptionFailure;
        report.assumption_checks = checks;
        return Ok(Analysis { report, grid: None });
    }

    let flow = Flow::new(problem, config.integrator);
    let reduction = Reduction::new(flow, chart, config.reduction);
    let evaluator = BifurcationEvaluator::new(reduction, config.mode)?;
    let m = |h: &Vector| evaluator.eval(h);

    let search = match find_zeros(m, chart, &config.zeros) {
        Ok(s) => s,
        Err(e) => {
            let name = match e {
                Error::ComplementSingular { .. } => "A4_complement_on_grid",
                Error::RankDeficient { .. } => "A2_rank_on_grid",
                _ => "A0_poincare_on_grid",
            };
            checks.push(Check::failed(name, format!("bifurcation function undefined on the grid: {e}")));
            report.notes.push(format!("{name} failed: {e}"));
            report.verdict = Verdict::AssumptionFailure;
            report.assumption_checks = checks;
            return Ok(Analysis { report, grid: None });
        }
    };
    checks.push(Check::at_most(
        "A4_complement_on_grid",
        0.0,
        0.0,
        format!("bifurcation function defined at all {} grid nodes", search.grid.len()),
    ));
    report.notes.extend(search.notes.iter().cloned());

    for z in &search.zeros {
        let h = z.h();
        let mut zr = ZeroReport {
            h_star: z.h_star.clone(),
            m_norm: z.residual,
            index: None,
            verdict: Verdict::NoObstruction,
            isolation: z.isolation.clone(),
            complement_condition: None,
            note: None,
        };
        match reduction.complement_operator(&h) {
            Ok(d) if d.invertible => zr.complement_condition = d.condition_estimate,
            Ok(d) => {
                zr.verdict = Verdict::AssumptionFailure;
                zr.note = Some(format!("complement operator singular at h*: {:?}", d.singular_values));
                report.zeros.push(zr);
                continue;
            }
            Err(e) => {
                zr.verdict = Verdict::AssumptionFailure;
                zr.note = Some(e.to_string());
                report.zeros.push(zr);
                continue;
            }
        }
        match index_of_isolated_zero(m, &h, search.isolation_radius, None) {
            Ok(idx) => {
                zr.verdict = if idx.value != 0 && idx.certified {
                    Verdict::ExistencePredicted
                } else {
                    Verdict::NoObstruction
                };
                if !idx.certified {
                    zr.note = Some("boundary degree not certified (refinement cap reached)".into());
                }
                zr.index = Some(idx);
            }
            Err(e) => zr.note = Some(format!("index unavailable: {e}")),
        }
        report.zeros.push(zr);
    }
    report.non_isolated_zeros = search
        .non_isolated
        .iter()
        .map(|z| ZeroReport {
            h_star: z.h_star.clone(),
            m_norm: z.residual,
            index: None,
            verdict: Verdict::NoObstruction,
            isolation: z.isolation.clone(),
            complement_condition: None,
            note: z.note.clone(),
        })
        .collect();

    if config.run_continuation {
        for z in report.zeros.iter().filter(|z| z.verdict == Verdict::ExistencePredicted) {
            let h = Vector::from_column_slice(&z.h_star);
            let record = continue_periodic(&reduction, &h, &config.continuation)?;
            let obs = record.observations(config.continuation.fit_max_eps);
            if obs.len() >= 2 {
                match necessity_check(&evaluator, &obs, config.necessity_tol) {
                    Ok(n) => report.necessity.push(n),
                    Err(e) => report.notes.push(format!("necessity check at {:?} skipped: {e}", z.h_star)),
                }
            }
            report.continuations.push(record);
        }
    }

    report.verdict = if report.predicted().next().is_some() {
        Verdict::ExistencePredicted
    } else {
        Verdict::NoObstruction
    };
    report.assumption_checks = checks;
    Ok(Analysis {
        report,
        grid: Some(search.grid),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::registry::{self, ModelParams};

    fn quick() -> AnalysisConfig {
        AnalysisConfig {
            zeros: ZeroSearchSettings {
                grid_resolution: 11,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn harmonic_forced_analysis() {
        let (p, chart) = registry::get("harmonic_forced").unwrap();
        let a = analyze(&p, &chart, &quick()).unwrap();
        let r = &a.report;
        assert_eq!(r.verdict, Verdict::ExistencePredicted);
        assert_eq!(r.zeros.len(), 1);
        let z = &r.zeros[0];
        assert!((Vector::from_column_slice(&z.h_star) - Vector::from_vec(vec![0.0, 1.0])).norm() < 1e-8);
        // M = π(−h₁, 1 − h₂) has Jacobian −π·I
        assert_eq!(z.index.unwrap().value, 1);
        assert!(r.continuations[0].steps.iter().all(|s| s.converged && s.distance < 1e-8));
        assert!(r.necessity[0].passed);
        assert!(a.grid.is_some());
        assert_eq!(r.schema, REPORT_SCHEMA);
    }

    #[test]
    fn one_parameter_subchart_violates_complement_invertibility() {
        let mut params = ModelParams::new();
        params.insert("k".into(), 1.0);
        let (p, chart) = registry::build("harmonic_forced", &params).unwrap();
        let r = analyze(&p, &chart, &quick()).unwrap().report;
        assert_eq!(r.verdict, Verdict::AssumptionFailure);
        let a4 = r.assumption_checks.iter().find(|c| c.name == "A4_complement_invertible").unwrap();
        assert!(!a4.passed && a4.detail.contains("singular"), "{}", a4.detail);
    }

    #[test]
    fn unforced_model_has_no_obstruction() {
        let mut params = ModelParams::new();
        params.insert("c3".into(), 0.0);
        let (p, chart) = registry::build("center_contraction", &params).unwrap();
        let r = analyze(&p, &chart, &quick()).unwrap().report;
        assert_eq!(r.verdict, Verdict::NoObstruction);
        assert!(r.zeros.is_empty());
    }

    #[test]
    fn config_hash_tracks_the_configuration() {
        let (p, chart) = registry::get("forced_vdp").unwrap();
        let a = config_hash(&p, &chart, &AnalysisConfig::default()).unwrap();
        assert_eq!(a, config_hash(&p, &chart, &AnalysisConfig::default()).unwrap());
        assert_eq!(a.len(), 64);
        let other = AnalysisConfig {
            seed: 1,
            ..Default::default()
        };
        assert_ne!(a, config_hash(&p, &chart, &other).unwrap());
    }

    #[test]
    fn wrong_chart_dimension_is_an_error() {
        let (p, _) = registry::get("forced_vdp").unwrap();
        let (_, chart) = registry::get("center_contraction").unwrap();
        assert!(analyze(&p, &chart, &quick()).is_err());
    }
}
