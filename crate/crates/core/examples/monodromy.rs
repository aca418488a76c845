//! Floquet multipliers of the Galerkin heat/oscillator model and a finite-difference check
//! of one monodromy column.
//!
//!     cargo run --release --example monodromy

use bifurcate_kit::flow::{Flow, IntegratorSettings};
use bifurcate_kit::model::registry;
use bifurcate_kit::{Result, Vector};

fn main() -> Result<()> {
    let (problem, chart) = registry::get("galerkin_heat_osc")?;
    let flow = Flow::new(&problem, IntegratorSettings::default());
    let h = Vector::from_vec(vec![1.2, -0.4]);
    let xi = chart.point(&h);
    let data = flow.monodromy_and_response(&xi)?;

    println!("Floquet multipliers at S({:.2}, {:.2}):", h[0], h[1]);
    let mut multipliers: Vec<(f64, f64)> = data
        .monodromy
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect();
    multipliers.sort_by(|a, b| b.0.hypot(b.1).total_cmp(&a.0.hypot(a.1)));
    for (re, im) in multipliers {
        println!("  {re:>12.6e} {im:+.3e}i   |mu| = {:.6e}", re.hypot(im));
    }

    // column 3 (first heat mode) by central differences
    let tight = Flow::new(&problem, IntegratorSettings::with_tolerances(1e-14, 1e-13));
    let step = 1e-5;
    let mut e = Vector::zeros(xi.len());
    e[2] = step;
    let fd = (tight.poincare(&(&xi + &e), 0.0)? - tight.poincare(&(&xi - &e), 0.0)?) / (2.0 * step);
    let col = data.monodromy.column(2).into_owned();
    println!("column 3 relative difference from central differences: {:.2e}", (&col - &fd).norm() / col.norm());
    println!("integrator work along the orbit: {} steps", data.unperturbed.stats.steps);
    Ok(())
}
