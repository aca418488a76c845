use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detect::{AnalysisConfig, ContinuationSettings, ZeroSearchSettings, REPORT_SCHEMA};
use crate::error::{Error, Result};
use crate::flow::IntegratorSettings;
use crate::linalg::Vector;
use crate::model::{registry, EvolutionProblem, FamilyChart};
use crate::reduction::{BifurcationMode, ReductionSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChartOverrides {
    pub h0: Option<Vec<f64>>,
    pub r0: Option<f64>,
    pub grid_resolution: Option<usize>,
}

/// A batch run: the JSON document read by every subcommand.
///
/// Only `schema` and `model` are required; unknown fields are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub model: ModelSpec,
    #[serde(default)]
    pub chart: ChartOverrides,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    /// Continuation ladder; replaces `continuation.ladder` when given.
    #[serde(default)]
    pub eps_ladder: Option<Vec<f64>>,
    #[serde(default)]
    pub mode: BifurcationMode,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub run_continuation: bool,
    #[serde(default)]
    pub reduction: ReductionSettings,
    #[serde(default)]
    pub zeros: ZeroSearchSettings,
    #[serde(default)]
    pub continuation: ContinuationSettings,
    #[serde(default = "default_necessity_tol")]
    pub necessity_tol: f64,
}

fn default_seed() -> u64 {
    AnalysisConfig::default().seed
}

fn default_true() -> bool {
    true
}

fn default_necessity_tol() -> f64 {
    AnalysisConfig::default().necessity_tol
}

impl RunConfig {
    /// Defaults for the named model.
    pub fn for_model(name: &str) -> Self {
        let d = AnalysisConfig::default();
        Self {
            schema: REPORT_SCHEMA.to_string(),
            model: ModelSpec {
                name: name.to_string(),
                params: BTreeMap::new(),
            },
            chart: ChartOverrides::default(),
            integrator: d.integrator,
            eps_ladder: None,
            mode: d.mode,
            output_dir: None,
            seed: d.seed,
            run_continuation: d.run_continuation,
            reduction: d.reduction,
            zeros: d.zeros,
            continuation: d.continuation,
            necessity_tol: d.necessity_tol,
        }
    }

    /// Parses and validates; parse errors carry the line and column of the offending token.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.schema != REPORT_SCHEMA {
            return bad(format!("field `schema`: expected \"{REPORT_SCHEMA}\", found \"{}\"", self.schema));
        }
        registry::default_params(&self.model.name).map_err(|e| Error::Config(format!("field `model.name`: {e}")))?;
        self.integrator
            .validate()
            .map_err(|e| Error::Config(format!("field `integrator`: {e}")))?;
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let tolerances = [
            ("reduction.rank_threshold", self.reduction.rank_threshold),
            ("reduction.complement_threshold", self.reduction.complement_threshold),
            ("reduction.beta_tol", self.reduction.beta_tol),
            ("zeros.dedup_tol", self.zeros.dedup_tol),
            ("zeros.isolation_cells", self.zeros.isolation_cells),
            ("continuation.newton_tol_factor", self.continuation.newton_tol_factor),
            ("continuation.fit_max_eps", self.continuation.fit_max_eps),
            ("continuation.exact_floor", self.continuation.exact_floor),
            ("necessity_tol", self.necessity_tol),
        ];
        if let Some((name, v)) = tolerances.iter().find(|(_, v)| !positive(*v)) {
            return bad(format!("field `{name}`: must be positive, found {v}"));
        }
        self.continuation
            .integrator
            .validate()
            .map_err(|e| Error::Config(format!("field `continuation.integrator`: {e}")))?;
        let res = self.chart.grid_resolution.unwrap_or(self.zeros.grid_resolution);
        if res < 3 {
            return bad(format!("field `chart.grid_resolution`: must be at least 3, found {res}"));
        }
        if let Some(r0) = self.chart.r0 {
            if !positive(r0) {
                return bad(format!("field `chart.r0`: must be positive, found {r0}"));
            }
        }
        let ladder = self.ladder();
        if ladder.is_empty() {
            return bad("field `eps_ladder`: must not be empty".into());
        }
        if ladder.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) || ladder.windows(2).any(|w| !(w[1] < w[0])) {
            return bad(format!("field `eps_ladder`: must be strictly decreasing in (0, 1], found {ladder:?}"));
        }
        Ok(())
    }

    pub fn ladder(&self) -> &[f64] {
        self.eps_ladder.as_deref().unwrap_or(&self.continuation.ladder)
    }

    /// The problem and chart, with parameter and ball overrides applied.
    pub fn build_model(&self) -> Result<(EvolutionProblem, FamilyChart)> {
        let (problem, chart) = registry::build(&self.model.name, &self.model.params)
            .map_err(|e| Error::Config(format!("field `model.params`: {e}")))?;
        if self.chart.h0.is_none() && self.chart.r0.is_none() {
            return Ok((problem, chart));
        }
        let h0 = match &self.chart.h0 {
            Some(h) if h.len() != chart.k() => {
                return Err(Error::Config(format!(
                    "field `chart.h0`: model '{}' has k = {}, found {} coordinates",
                    self.model.name,
                    chart.k(),
                    h.len()
                )))
            }
            Some(h) => Vector::from_column_slice(h),
            None => chart.h0().clone(),
        };
        let chart = chart.with_ball(h0, self.chart.r0.unwrap_or(chart.r0()))?;
        Ok((problem, chart))
    }

    pub fn analysis_config(&self) -> AnalysisConfig {
        let mut zeros = self.zeros;
        if let Some(r) = self.chart.grid_resolution {
            zeros.grid_resolution = r;
        }
        let mut continuation = self.continuation.clone();
        continuation.ladder = self.ladder().to_vec();
        let mut model_params = registry::default_params(&self.model.name).unwrap_or_default();
        model_params.extend(self.model.params.iter().map(|(k, v)| (k.clone(), *v)));
        AnalysisConfig {
            mode: self.mode,
            integrator: self.integrator,
            reduction: self.reduction,
            zeros,
            continuation,
            run_continuation: self.run_continuation,
            seed: self.seed,
            necessity_tol: self.necessity_tol,
            model_params,
            ..AnalysisConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::from_json(r#"{"schema": "bifurcate-kit/1", "model": {"name": "harmonic_forced"}}"#).unwrap();
        assert_eq!(cfg, RunConfig::for_model("harmonic_forced"));
        assert_eq!(cfg.analysis_config().model_params["lambda"], 1.0);
    }

    #[test]
    fn unknown_field_is_reported_with_its_name_and_line() {
        let text = "{\n  \"schema\": \"bifurcate-kit/1\",\n  \"model\": {\"name\": \"forced_vdp\"},\n  \"integrator\": {\"abs_tol\": 1e-10, \"rel_tolerance\": 1e-8}\n}";
        let msg = RunConfig::from_json(text).unwrap_err().to_string();
        assert!(msg.contains("rel_tolerance") && msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn invariant_violations_are_rejected() {
        let base = r#"{"schema": "bifurcate-kit/1", "model": {"name": "harmonic_forced"}"#;
        for extra in [
            r#", "integrator": {"abs_tol": -1e-10}"#,
            r#", "chart": {"grid_resolution": 2}"#,
            r#", "eps_ladder": [1e-2, 1e-2]"#,
            r#", "eps_ladder": [2.0, 1e-2]"#,
            r#", "eps_ladder": []"#,
        ] {
            let err = RunConfig::from_json(&format!("{base}{extra}}}")).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{extra}: {err}");
        }
        let wrong_schema = r#"{"schema": "bifurcate-kit/0", "model": {"name": "harmonic_forced"}}"#;
        assert!(RunConfig::from_json(wrong_schema).is_err());
        let unknown_model = r#"{"schema": "bifurcate-kit/1", "model": {"name": "duffing"}}"#;
        assert!(RunConfig::from_json(unknown_model).unwrap_err().to_string().contains("forced_vdp"));
    }

    #[test]
    fn overrides_reach_model_and_chart() {
        let mut cfg = RunConfig::for_model("harmonic_forced");
        cfg.model.params.insert("lambda".into(), 0.5);
        cfg.chart.h0 = Some(vec![0.0, 0.5]);
        cfg.chart.r0 = Some(1.0);
        cfg.chart.grid_resolution = Some(9);
        cfg.eps_ladder = Some(vec![1e-2, 1e-3]);
        let (_, chart) = cfg.build_model().unwrap();
        assert_eq!(chart.r0(), 1.0);
        assert_eq!(chart.h0()[1], 0.5);
        let a = cfg.analysis_config();
        assert_eq!(a.zeros.grid_resolution, 9);
        assert_eq!(a.continuation.ladder, vec![1e-2, 1e-3]);
        assert_eq!(a.model_params["lambda"], 0.5);

        cfg.chart.h0 = Some(vec![0.0]);
        assert!(cfg.build_model().is_err());
        cfg.chart.h0 = None;
        cfg.model.params.insert("omega".into(), 1.0);
        assert!(cfg.build_model().is_err());
    }
}
