//! A user-defined model: the weakly damped, forced Duffing oscillator
//! `x'' + x = ε(−δx' − x³ + λ cos t)` on the family of all harmonic orbits.
//!
//!     cargo run --release --example custom_model

use bifurcate_kit::detect::{analyze, AnalysisConfig, Verdict};
use bifurcate_kit::model::{EvolutionProblem, FamilyChart, LinearPart};
use bifurcate_kit::{Matrix, Result, Vector};

fn main() -> Result<()> {
    let (delta, lambda) = (0.2, 0.3);
    let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let problem = EvolutionProblem::builder("duffing", LinearPart::dense(a), 2.0 * std::f64::consts::PI)
        .perturbation(move |t, x, _eps| Vector::from_vec(vec![0.0, -delta * x[1] - x[0].powi(3) + lambda * t.cos()]))
        .build()?;
    let chart = FamilyChart::affine(Vector::zeros(2), Matrix::identity(2, 2), Vector::zeros(2), 1.5)?;

    let report = analyze(&problem, &chart, &AnalysisConfig::default())?.report;
    println!("verdict: {:?}", report.verdict);
    for (z, rec) in report.predicted().zip(&report.continuations) {
        let amplitude = z.h_star[0].hypot(z.h_star[1]);
        println!(
            "orbit with amplitude {amplitude:.6}, index {}, slope {:.3}",
            z.index.map_or(0, |d| d.value),
            rec.slope.unwrap_or(f64::NAN)
        );
    }
    if report.verdict == Verdict::AssumptionFailure {
        for c in report.failed_checks() {
            println!("failed: {} ({})", c.name, c.detail);
        }
    }
    Ok(())
}
