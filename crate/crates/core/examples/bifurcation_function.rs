//! The bifurcation function of the forced harmonic oscillator on a grid, in both modes,
//! compared with the scaled reduced map `M_ε`.
//!
//!     cargo run --release --example bifurcation_function

use bifurcate_kit::flow::{Flow, IntegratorSettings};
use bifurcate_kit::model::registry;
use bifurcate_kit::reduction::{BifurcationEvaluator, BifurcationMode, Reduction, ReductionSettings};
use bifurcate_kit::{Result, Vector};

fn main() -> Result<()> {
    let (problem, chart) = registry::get("harmonic_forced")?;
    let reduction = Reduction::new(Flow::new(&problem, IntegratorSettings::default()), &chart, ReductionSettings::default());
    let consistent = BifurcationEvaluator::new(reduction, BifurcationMode::Consistent)?;
    let literal = BifurcationEvaluator::new(reduction, BifurcationMode::Literal)?;

    println!("{:>6} {:>6} {:>24} {:>24} {:>24}", "h1", "h2", "M (consistent)", "M (literal)", "M_eps, eps = 1e-3");
    for h1 in [-1.0, 0.0, 1.0] {
        for h2 in [0.0, 1.0, 2.0] {
            let h = Vector::from_vec(vec![h1, h2]);
            let c = consistent.eval(&h)?;
            let l = literal.eval(&h)?;
            let m = consistent.eval_eps(&h, 1e-3)?;
            println!(
                "{h1:>6} {h2:>6} {:>11.6} {:>11.6}  {:>11.6} {:>11.6}  {:>11.6} {:>11.6}",
                c[0], c[1], l[0], l[1], m[0], m[1]
            );
        }
    }
    println!("pi = {:.6}: M(h) = pi(-h1, 1 - h2), the two modes agree at h0 = (0, 0)", std::f64::consts::PI);
    Ok(())
}
