//! Time-T map, monodromy and first-order response of `ẋ = −x + ε` against the closed form.
//!
//!     cargo run --release --example flow_oracle

use bifurcate_kit::flow::{Flow, IntegratorSettings};
use bifurcate_kit::model::{EvolutionProblem, LinearPart};
use bifurcate_kit::{Matrix, Result, Vector};

fn main() -> Result<()> {
    let problem = EvolutionProblem::builder("scalar", LinearPart::dense(Matrix::from_element(1, 1, -1.0)), 1.0)
        .perturbation(|_t, x, _eps| Vector::from_element(x.len(), 1.0))
        .build()?;
    let flow = Flow::new(&problem, IntegratorSettings::default());
    let e = (-1.0f64).exp();

    println!("{:>6} {:>6} {:>20} {:>20} {:>10}", "xi", "eps", "x(1)", "closed form", "error");
    for xi in [2.0, 0.5] {
        for eps in [0.0, 1e-3, 0.1] {
            let x1 = flow.poincare(&Vector::from_element(1, xi), eps)?[0];
            let exact = xi * e + eps * (1.0 - e);
            println!("{xi:>6} {eps:>6} {x1:>20.15} {exact:>20.15} {:>10.1e}", (x1 - exact).abs());
        }
    }

    let data = flow.monodromy_and_response(&Vector::from_element(1, 2.0))?;
    println!("P'0 = {:.15} (e^-1 = {e:.15})", data.monodromy[(0, 0)]);
    println!("Q   = {:.15} (1 - e^-1 = {:.15})", data.response[0], 1.0 - e);

    let traj = flow.integrate(&Vector::from_element(1, 2.0), 0.1, 1.0)?;
    println!(
        "{} accepted steps, {} rejected, {} right-hand side evaluations",
        traj.stats.steps, traj.stats.rejected, traj.stats.rhs_evaluations
    );
    Ok(())
}
