//! Stiff Galerkin truncation: a van der Pol oscillator coupled to eight heat modes. Shows
//! the exponential integrator's step counts and the zeros of `M` on the oscillator plane.
//!
//!     cargo run --release --example galerkin_heat

use bifurcate_kit::detect::{analyze, AnalysisConfig};
use bifurcate_kit::flow::{Flow, IntegratorSettings};
use bifurcate_kit::model::registry;
use bifurcate_kit::{Result, Vector};

fn main() -> Result<()> {
    let (problem, chart) = registry::get("galerkin_heat_osc")?;
    println!("n = {}, spectrum of A: {:?}", problem.dim(), problem.linear().spectral_form().map(|s| s.spectrum()));

    let flow = Flow::new(&problem, IntegratorSettings::default());
    let traj = flow.integrate(&chart.point(&Vector::from_vec(vec![1.0, 0.5])), 0.05, problem.period())?;
    println!("one period at eps = 0.05: {} steps, {} rejected", traj.stats.steps, traj.stats.rejected);

    let mut config = AnalysisConfig {
        model_params: registry::default_params("galerkin_heat_osc")?,
        ..AnalysisConfig::default()
    };
    config.zeros.grid_resolution = 15;
    config.continuation.ladder = vec![1e-2, 3e-3, 1e-3, 3e-4];
    let report = analyze(&problem, &chart, &config)?.report;
    println!("verdict: {:?}", report.verdict);
    for z in &report.zeros {
        println!(
            "zero ({:+.6}, {:+.6}) index {}  cond(D) = {:.3}",
            z.h_star[0],
            z.h_star[1],
            z.index.map_or("-".to_string(), |d| d.value.to_string()),
            z.complement_condition.unwrap_or(f64::NAN)
        );
    }
    for rec in &report.continuations {
        let last = rec.steps.last().expect("ladder is non-empty");
        println!("  continued to eps {:.0e}, slope {:.3}", last.eps, rec.slope.unwrap_or(f64::NAN));
    }
    Ok(())
}
