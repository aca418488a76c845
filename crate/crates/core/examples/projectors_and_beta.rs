//! Splitting along the family, the complement operator `D` and the correction `β(h, ε)`
//! on the center ⊕ contraction model with a state-dependent forcing.
//!
//!     cargo run --release --example projectors_and_beta

use bifurcate_kit::flow::{Flow, IntegratorSettings};
use bifurcate_kit::model::registry::{self, ModelParams};
use bifurcate_kit::reduction::{Reduction, ReductionSettings};
use bifurcate_kit::{Result, Vector};

fn main() -> Result<()> {
    let params: ModelParams = [("kappa".to_string(), 1.0), ("gamma".to_string(), 0.5)].into();
    let (problem, chart) = registry::build("center_contraction", &params)?;
    let reduction = Reduction::new(Flow::new(&problem, IntegratorSettings::default()), &chart, ReductionSettings::default());
    let h = Vector::from_vec(vec![0.6, 0.2]);

    let pp = reduction.projectors(&h)?;
    println!("pi1 =\n{:.6}", pp.pi1);
    println!("singular values of S'(h): {:?}", pp.singular_values);

    let d = reduction.complement_operator(&h)?;
    println!("D = {:.9}  (e^(-2 pi gamma) - 1 = {:.9})", d.matrix[(0, 0)], (-std::f64::consts::PI).exp() - 1.0);

    println!("{:>8} {:>16} {:>16} {:>12} {:>6}", "eps", "beta_3", "beta_3/eps", "|b/e - lim|", "iters");
    for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
        let sol = reduction.solve_beta(&h, eps)?;
        let gap = (&sol.beta / eps - &sol.limit_check).norm();
        println!("{eps:>8.0e} {:>16.10e} {:>16.10} {gap:>12.3e} {:>6}", sol.beta[2], sol.beta[2] / eps, sol.iterations);
    }
    println!("limit of beta/eps: {:.10?}", reduction.solve_beta(&h, 0.0)?.limit_check.as_slice());
    Ok(())
}
