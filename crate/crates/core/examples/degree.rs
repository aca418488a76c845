//! Brouwer degree by Jacobian sign, sign change and winding number, and the index of the
//! zeros of the van der Pol bifurcation function.
//!
//!     cargo run --release --example degree

use bifurcate_kit::degree::{circle, degree_1d, degree_2d, fd_jacobian, index_nondegenerate};
use bifurcate_kit::flow::{Flow, IntegratorSettings};
use bifurcate_kit::model::registry;
use bifurcate_kit::reduction::{Reduction, ReductionSettings};
use bifurcate_kit::{Matrix, Result, Vector};

fn main() -> Result<()> {
    let ring = circle([0.0, 0.0], 1.0, 32);
    println!("deg(x -> -x) on [-1, 1]       = {}", degree_1d(|x| -x, -1.0, 1.0)?.value);
    println!("deg(z -> z^2) on the unit disc = {}", degree_2d(|p| [p[0] * p[0] - p[1] * p[1], 2.0 * p[0] * p[1]], &ring)?.value);
    println!("deg(z -> conj z)               = {}", degree_2d(|p| [p[0], -p[1]], &ring)?.value);
    let j = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
    println!("sign det [[1, 2], [3, 4]]      = {}", index_nondegenerate(&j)?.value);

    let (problem, chart) = registry::get("forced_vdp")?;
    let reduction = Reduction::new(Flow::new(&problem, IntegratorSettings::default()), &chart, ReductionSettings::default());
    let m = |h: &Vector| reduction.bifurcation_function(h).expect("M");
    for guess in [-0.54, -1.68, 2.21] {
        let mut h = Vector::from_vec(vec![0.0, guess]);
        for _ in 0..6 {
            h -= fd_jacobian(m, &h).lu().solve(&m(&h)).expect("regular zero");
        }
        let jac = fd_jacobian(m, &h);
        let by_winding = degree_2d(
            |p| {
                let v = m(&Vector::from_vec(p.to_vec()));
                [v[0], v[1]]
            },
            &circle([h[0], h[1]], 0.2, 16),
        )?;
        println!(
            "zero of M at ({:+.6}, {:+.6}): sign det J = {:+}, winding = {:+} ({} samples)",
            h[0],
            h[1],
            index_nondegenerate(&jac)?.value,
            by_winding.value,
            by_winding.samples_used
        );
    }
    Ok(())
}
