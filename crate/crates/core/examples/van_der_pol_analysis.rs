//! Full analysis of the forced van der Pol oscillator: hypotheses, zeros of `M`, indices,
//! continuation of each predicted orbit and the necessity check. Outputs go to the
//! directory given as the first argument (default `vdp-out`).
//!
//!     cargo run --release --example van_der_pol_analysis -- /tmp/vdp

use std::path::PathBuf;

use bifurcate_kit::cli::write_analysis;
use bifurcate_kit::detect::{analyze, AnalysisConfig};
use bifurcate_kit::model::registry;
use bifurcate_kit::Result;

fn main() -> Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "vdp-out".into()));
    let (problem, chart) = registry::get("forced_vdp")?;
    let config = AnalysisConfig {
        model_params: registry::default_params("forced_vdp")?,
        ..AnalysisConfig::default()
    };
    let analysis = analyze(&problem, &chart, &config)?;
    let report = &analysis.report;

    for c in &report.assumption_checks {
        println!("{:<28} {}  {}", c.name, if c.passed { "ok" } else { "FAILED" }, c.detail);
    }
    println!("verdict: {:?}", report.verdict);
    for z in &report.zeros {
        println!(
            "zero ({:+.8}, {:+.8})  |M| = {:.1e}  index {}",
            z.h_star[0],
            z.h_star[1],
            z.m_norm,
            z.index.map_or("-".to_string(), |d| d.value.to_string())
        );
        let Some(rec) = report.continuations.iter().find(|c| c.h_star == z.h_star) else {
            continue;
        };
        for s in &rec.steps {
            println!(
                "    eps {:.2e}: |xi - S(h*)| = {:.3e}, Newton {} (naive seed {})",
                s.eps,
                s.distance,
                s.iterations,
                s.naive_iterations.map_or("-".into(), |n| n.to_string())
            );
        }
        println!("    slope {:.3}", rec.slope.unwrap_or(f64::NAN));
    }
    for n in &report.necessity {
        println!("necessity: |M(h_limit)| = {:.2e} ({})", n.m_norm, if n.passed { "ok" } else { "FAILED" });
    }
    write_analysis(&out, report, analysis.grid.as_ref())?;
    println!("wrote {}", out.display());
    Ok(())
}
