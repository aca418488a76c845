//! Lyapunov–Schmidt reduction of the fixed-point problem `P_ε(ξ) = ξ` along a family
//! chart `S(h)`.
//!
//! The state space splits as `E₁,h ⊕ E₂,h` with `E₁,h = range S'(h)` and `E₂,h` its
//! Euclidean-orthogonal complement. On `E₂,h` the displacement is solved for the
//! correction `β(h, ε)` by a chord iteration; what remains is a `k`-dimensional map whose
//! `ε → 0` limit is the bifurcation function `M(h)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{Flow, MonodromyData};
use crate::linalg::{orthogonal_complement, range_basis, singular_values, Matrix, Vector};
use crate::model::FamilyChart;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReductionSettings {
    /// `S'(h)` has full rank when `σ_min > rank_threshold · σ_max`.
    pub rank_threshold: f64,
    /// The complement operator is invertible when its smallest singular value exceeds this.
    pub complement_threshold: f64,
    /// Chord iteration stops once the step is below `beta_tol · (1 + ‖S(h)‖)`.
    pub beta_tol: f64,
    pub beta_max_iter: usize,
}

impl Default for ReductionSettings {
    fn default() -> Self {
        Self {
            rank_threshold: 1e-8,
            complement_threshold: 1e-8,
            beta_tol: 1e-11,
            beta_max_iter: 50,
        }
    }
}

/// Which first term the bifurcation function uses.
///
/// `Consistent` evaluates `Q(S(h), 0)`, the pointwise limit of `M_ε(h)`; `Literal`
/// evaluates `Q(S(h₀), 0)` at the chart centre for every `h`. The two agree at `h₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BifurcationMode {
    #[default]
    Consistent,
    Literal,
}

impl std::str::FromStr for BifurcationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consistent" => Ok(Self::Consistent),
            "literal" => Ok(Self::Literal),
            other => Err(Error::Invalid(format!("mode must be 'consistent' or 'literal', got '{other}'"))),
        }
    }
}

impl std::fmt::Display for BifurcationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Consistent => "consistent",
            Self::Literal => "literal",
        })
    }
}

/// Complementary projectors `π₁,h` onto `range S'(h)` and `π₂,h = I − π₁,h`.
#[derive(Debug, Clone)]
pub struct ProjectorPair {
    pub h: Vector,
    /// Orthonormal columns spanning `E₁,h`.
    pub basis_e1: Matrix,
    /// Orthonormal columns spanning `E₂,h`.
    pub basis_e2: Matrix,
    pub pi1: Matrix,
    pub pi2: Matrix,
    /// Singular values of `S'(h)`, decreasing.
    pub singular_values: Vec<f64>,
    /// `S'(h)⁺`, the inverse of `S'(h)` on `E₁,h` extended by zero on `E₂,h`.
    pub chart_inverse: Matrix,
}

impl ProjectorPair {
    /// `(S'(h))⁻¹ π₁,h v`.
    pub fn chart_coordinates(&self, v: &Vector) -> Vector {
        &self.chart_inverse * v
    }
}

/// `D = Bᵀ(P'₀(S(h)) − I)B` for an orthonormal basis `B` of `E₂,h`.
#[derive(Debug, Clone)]
pub struct ComplementOperator {
    pub h: Vector,
    pub matrix: Matrix,
    pub singular_values: Vec<f64>,
    /// `σ_max/σ_min`; `None` when `D` is singular. An empty `D` has condition 1.
    pub condition_estimate: Option<f64>,
    pub invertible: bool,
}

/// The complement correction `β(h, ε) ∈ E₂,h`.
#[derive(Debug, Clone)]
pub struct BetaSolution {
    pub h: Vector,
    pub eps: f64,
    pub beta: Vector,
    /// `β` in the `basis_e2` frame.
    pub coordinates: Vector,
    pub iterations: usize,
    /// `‖Φ_{h,ε}‖` at the last evaluated iterate.
    pub residual: f64,
    /// `−B D⁻¹ Bᵀ Q(S(h), 0)`, the limit of `β/ε` as `ε → 0`.
    pub limit_check: Vector,
}

/// Everything the reduction needs at one chart point.
struct Linearization {
    point: Vector,
    projectors: ProjectorPair,
    monodromy: MonodromyData,
    complement: ComplementOperator,
}

#[derive(Debug, Clone, Copy)]
pub struct Reduction<'a> {
    flow: Flow<'a>,
    chart: &'a FamilyChart,
    settings: ReductionSettings,
}

impl<'a> Reduction<'a> {
    pub fn new(flow: Flow<'a>, chart: &'a FamilyChart, settings: ReductionSettings) -> Self {
        Self { flow, chart, settings }
    }

    pub fn flow(&self) -> Flow<'a> {
        self.flow
    }

    pub fn chart(&self) -> &'a FamilyChart {
        self.chart
    }

    pub fn settings(&self) -> ReductionSettings {
        self.settings
    }

    pub fn projectors(&self, h: &Vector) -> Result<ProjectorPair> {
        projectors_from_derivative(h, &self.chart.derivative(h), self.settings.rank_threshold)
    }

    fn complement_from(&self, h: &Vector, projectors: &ProjectorPair, monodromy: &Matrix) -> ComplementOperator {
        let b = &projectors.basis_e2;
        let n = monodromy.nrows();
        let d = b.transpose() * (monodromy - Matrix::identity(n, n)) * b;
        let sv = singular_values(&d);
        let threshold = self.settings.complement_threshold;
        let (invertible, condition) = match (sv.first(), sv.last()) {
            (None, _) | (_, None) => (true, Some(1.0)),
            (Some(&smax), Some(&smin)) => {
                if smin > threshold {
                    (true, Some(smax / smin))
                } else {
                    (false, None)
                }
            }
        };
        ComplementOperator {
            h: h.clone(),
            matrix: d,
            singular_values: sv,
            condition_estimate: condition,
            invertible,
        }
    }

    fn linearize(&self, h: &Vector) -> Result<Linearization> {
        let projectors = self.projectors(h)?;
        let point = self.chart.point(h);
        let monodromy = self.flow.monodromy_and_response(&point)?;
        let complement = self.complement_from(h, &projectors, &monodromy.monodromy);
        Ok(Linearization {
            point,
            projectors,
            monodromy,
            complement,
        })
    }

    fn require_invertible(c: &ComplementOperator) -> Result<()> {
        if c.invertible {
            Ok(())
        } else {
            Err(Error::ComplementSingular {
                h: c.h.as_slice().to_vec(),
                singular_values: c.singular_values.clone(),
            })
        }
    }

    /// The complement operator at `h` and its conditioning; a singular operator is
    /// reported with `invertible = false` rather than as an error.
    pub fn complement_operator(&self, h: &Vector) -> Result<ComplementOperator> {
        Ok(self.linearize(h)?.complement)
    }

    /// Like [`Self::complement_operator`] but fails when the operator is singular.
    pub fn invertible_complement(&self, h: &Vector) -> Result<ComplementOperator> {
        let c = self.complement_operator(h)?;
        Self::require_invertible(&c)?;
        Ok(c)
    }

    /// Solves `Bᵀ[P_ε(S(h) + Bc) − (S(h) + Bc)] = 0` for the complement coordinates `c`
    /// by the chord iteration `c ← c − D⁻¹ Φ(c)` from `c = 0`.
    pub fn solve_beta(&self, h: &Vector, eps: f64) -> Result<BetaSolution> {
        let lin = self.linearize(h)?;
        self.solve_beta_with(h, eps, &lin)
    }

    fn solve_beta_with(&self, h: &Vector, eps: f64, lin: &Linearization) -> Result<BetaSolution> {
        let n = lin.point.len();
        let b = &lin.projectors.basis_e2;
        let m = b.ncols();
        if m == 0 {
            return Ok(BetaSolution {
                h: h.clone(),
                eps,
                beta: Vector::zeros(n),
                coordinates: Vector::zeros(0),
                iterations: 0,
                residual: 0.0,
                limit_check: Vector::zeros(n),
            });
        }
        Self::require_invertible(&lin.complement)?;
        let lu = lin.complement.matrix.clone().lu();
        let solve = |v: &Vector| -> Vector { lu.solve(v).expect("complement operator checked invertible") };
        let limit_check = -(b * solve(&(b.transpose() * &lin.monodromy.response)));

        if eps == 0.0 {
            return Ok(BetaSolution {
                h: h.clone(),
                eps,
                beta: Vector::zeros(n),
                coordinates: Vector::zeros(m),
                iterations: 0,
                residual: 0.0,
                limit_check,
            });
        }

        let tol = self.settings.beta_tol * (1.0 + lin.point.norm());
        let mut c = Vector::zeros(m);
        let mut last_step = f64::INFINITY;
        for iteration in 1..=self.settings.beta_max_iter {
            let xi = &lin.point + b * &c;
            let phi = b.transpose() * self.flow.displacement(&xi, eps)?;
            let step = solve(&phi);
            c -= &step;
            last_step = step.norm();
            if !last_step.is_finite() {
                break;
            }
            if last_step < tol {
                return Ok(BetaSolution {
                    h: h.clone(),
                    eps,
                    beta: b * &c,
                    coordinates: c,
                    iterations: iteration,
                    residual: phi.norm(),
                    limit_check,
                });
            }
        }
        Err(Error::BetaNonConvergence {
            h: h.as_slice().to_vec(),
            eps,
            iterations: self.settings.beta_max_iter,
            last_step,
        })
    }

    /// `(S'(h))⁻¹ π₁,h [P_ε(β + S(h)) − (β + S(h))]`: its zeros at `(h, ε)` are exactly the
    /// periodic initial conditions `ξ = β(h, ε) + S(h)`.
    pub fn reduced_map(&self, h: &Vector, eps: f64) -> Result<Vector> {
        let lin = self.linearize(h)?;
        let beta = self.solve_beta_with(h, eps, &lin)?;
        let xi = &lin.point + &beta.beta;
        let d = self.flow.displacement(&xi, eps)?;
        Ok(lin.projectors.chart_coordinates(&d))
    }

    /// `M_ε(h) = reduced_map(h, ε)/ε`.
    pub fn bifurcation_function_eps(&self, h: &Vector, eps: f64) -> Result<Vector> {
        if eps <= 0.0 {
            return Err(Error::Invalid(format!(
                "M_eps needs eps > 0 (got {eps}); use the bifurcation function itself at eps = 0"
            )));
        }
        Ok(self.reduced_map(h, eps)? / eps)
    }

    fn bifurcation_with(&self, lin: &Linearization, first_term: &Vector) -> Result<Vector> {
        let b = &lin.projectors.basis_e2;
        let mut v = first_term.clone();
        if b.ncols() > 0 {
            Self::require_invertible(&lin.complement)?;
            let n = lin.point.len();
            let shifted = &lin.monodromy.monodromy - Matrix::identity(n, n);
            let inner = lin
                .complement
                .matrix
                .clone()
                .lu()
                .solve(&(b.transpose() * &lin.monodromy.response))
                .expect("complement operator checked invertible");
            v -= shifted * (b * inner);
        }
        Ok(lin.projectors.chart_coordinates(&v))
    }

    /// `M(h) = (S'(h))⁻¹π₁,h[Q₁ − (P'₀(S(h)) − I)(π₂,h(P'₀(S(h)) − I)π₂,h)⁻¹π₂,h Q(S(h), 0)]`
    /// with `Q₁ = Q(S(h), 0)` in consistent mode.
    pub fn bifurcation_function(&self, h: &Vector) -> Result<Vector> {
        let lin = self.linearize(h)?;
        let q = lin.monodromy.response.clone();
        self.bifurcation_with(&lin, &q)
    }

    /// Response `Q(S(h₀), 0)` at the chart centre.
    pub fn anchor_response(&self) -> Result<Vector> {
        Ok(self.flow.monodromy_and_response(&self.chart.point(self.chart.h0()))?.response)
    }

    /// Bifurcation function with the first term fixed to `anchor` (literal mode).
    pub fn bifurcation_function_anchored(&self, h: &Vector, anchor: &Vector) -> Result<Vector> {
        let lin = self.linearize(h)?;
        self.bifurcation_with(&lin, anchor)
    }

    /// Largest observed `‖π₁(h) − π₁(h')‖/‖h − h'‖` over the given pairs.
    pub fn projector_lipschitz(&self, pairs: &[(Vector, Vector)]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (a, b) in pairs {
            let dist = (a - b).norm();
            if dist == 0.0 {
                continue;
            }
            let pa = self.projectors(a)?;
            let pb = self.projectors(b)?;
            worst = worst.max((&pa.pi1 - &pb.pi1).norm() / dist);
        }
        Ok(worst)
    }
}

/// `M` in a fixed mode, with the literal-mode anchor `Q(S(h₀), 0)` computed once.
#[derive(Debug, Clone)]
pub struct BifurcationEvaluator<'a> {
    reduction: Reduction<'a>,
    mode: BifurcationMode,
    anchor: Option<Vector>,
}

impl<'a> BifurcationEvaluator<'a> {
    pub fn new(reduction: Reduction<'a>, mode: BifurcationMode) -> Result<Self> {
        let anchor = match mode {
            BifurcationMode::Consistent => None,
            BifurcationMode::Literal => Some(reduction.anchor_response()?),
        };
        Ok(Self { reduction, mode, anchor })
    }

    pub fn reduction(&self) -> &Reduction<'a> {
        &self.reduction
    }

    pub fn mode(&self) -> BifurcationMode {
        self.mode
    }

    pub fn eval(&self, h: &Vector) -> Result<Vector> {
        match &self.anchor {
            None => self.reduction.bifurcation_function(h),
            Some(q) => self.reduction.bifurcation_function_anchored(h, q),
        }
    }

    pub fn eval_eps(&self, h: &Vector, eps: f64) -> Result<Vector> {
        self.reduction.bifurcation_function_eps(h, eps)
    }
}

/// Samples of a `k`-vector field on a uniform grid over the chart ball.
#[derive(Debug, Clone, PartialEq)]
pub struct MGrid {
    pub k: usize,
    pub resolution: usize,
    /// Spacing of the underlying cube grid.
    pub cell: f64,
    /// Multi-indices of the retained grid nodes (those inside the ball).
    pub indices: Vec<Vec<usize>>,
    pub points: Vec<Vector>,
    pub values: Vec<Vector>,
}

impl MGrid {
    /// Evaluates `f` at every node of the `resolution^k` cube grid over `h₀ ± r₀` that lies
    /// in the closed ball, in parallel; node order is lexicographic in the multi-index.
    pub fn evaluate<F>(chart: &FamilyChart, resolution: usize, f: F) -> Result<Self>
    where
        F: Fn(&Vector) -> Result<Vector> + Sync,
    {
        use rayon::prelude::*;

        if resolution < 3 {
            return Err(Error::Invalid(format!("grid resolution must be at least 3, got {resolution}")));
        }
        let k = chart.k();
        let total = resolution.checked_pow(k as u32).filter(|&t| t <= 1 << 22).ok_or_else(|| {
            Error::Invalid(format!("grid {resolution}^{k} is too large"))
        })?;
        let r0 = chart.r0();
        let cell = 2.0 * r0 / (resolution - 1) as f64;
        let mut indices = Vec::new();
        let mut points = Vec::new();
        for flat in 0..total {
            let mut rem = flat;
            let mut idx = vec![0usize; k];
            for d in (0..k).rev() {
                idx[d] = rem % resolution;
                rem /= resolution;
            }
            let h = Vector::from_iterator(k, (0..k).map(|d| chart.h0()[d] - r0 + cell * idx[d] as f64));
            if (&h - chart.h0()).norm() <= r0 * (1.0 + 1e-12) {
                indices.push(idx);
                points.push(h);
            }
        }
        let values = points.par_iter().map(|h| f(h)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            k,
            resolution,
            cell,
            indices,
            points,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with columns `h1..hk, M1..Mk`, floats printed with 17 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.k).map(|i| format!("h{i}")).collect();
        header.extend((1..=self.k).map(|i| format!("M{i}")));
        w.write_record(&header)?;
        for (h, m) in self.points.iter().zip(&self.values) {
            let row: Vec<String> = h.iter().chain(m.iter()).map(|v| format_float(*v)).collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses a grid written by [`Self::write_csv`]; only points and values are restored.
    pub fn read_csv_values<R: std::io::Read>(reader: R) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        let mut r = csv::Reader::from_reader(reader);
        let k = r.headers()?.len() / 2;
        let mut out = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let nums: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Invalid(format!("bad number '{s}': {e}"))))
                .collect::<Result<_>>()?;
            out.push((nums[..k].to_vec(), nums[k..].to_vec()));
        }
        Ok(out)
    }
}

/// Scientific notation with 17 significant digits, which round-trips every `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Orthogonal projectors for the column span of `derivative` (an `S'(h)`).
pub fn projectors_from_derivative(h: &Vector, derivative: &Matrix, rank_threshold: f64) -> Result<ProjectorPair> {
    let (n, k) = derivative.shape();
    if k == 0 || k > n {
        return Err(Error::Invalid(format!("chart derivative must be n x k with 1 <= k <= n, got {n}x{k}")));
    }
    let (basis_e1, sv) = range_basis(derivative);
    let smax = sv[0];
    let smin = sv[k - 1];
    if !(smax > 0.0) || smin <= rank_threshold * smax {
        return Err(Error::RankDeficient {
            h: h.as_slice().to_vec(),
            singular_values: sv,
        });
    }
    let basis_e2 = orthogonal_complement(&basis_e1);
    let pi1 = &basis_e1 * basis_e1.transpose();
    let pi2 = Matrix::identity(n, n) - &pi1;
    // S'⁺ = (S'ᵀS')⁻¹S'ᵀ, computed through the orthonormal factor: S' = U·R with R = Uᵀ S'
    let r = basis_e1.transpose() * derivative;
    let r_inv = r.try_inverse().ok_or_else(|| Error::RankDeficient {
        h: h.as_slice().to_vec(),
        singular_values: sv.clone(),
    })?;
    let chart_inverse = r_inv * basis_e1.transpose();
    Ok(ProjectorPair {
        h: h.clone(),
        basis_e1,
        basis_e2,
        pi1,
        pi2,
        singular_values: sv,
        chart_inverse,
    })
}
