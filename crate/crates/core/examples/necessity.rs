//! A forcing whose bifurcation function never vanishes: no periodic orbit stays near the
//! family, which a seeded Newton sweep confirms. Then the converse direction on the van der
//! Pol model: continued orbits accumulate at zeros of `M`.
//!
//!     cargo run --release --example necessity

use bifurcate_kit::detect::{continue_periodic, necessity_check, seeded_newton_sweep, ContinuationSettings};
use bifurcate_kit::flow::{Flow, IntegratorSettings};
use bifurcate_kit::model::registry::{self, ModelParams};
use bifurcate_kit::reduction::{BifurcationEvaluator, BifurcationMode, Reduction, ReductionSettings};
use bifurcate_kit::{Result, Vector};

fn main() -> Result<()> {
    let params: ModelParams = [("a1".to_string(), 1.0), ("a2".to_string(), 1.0), ("c3".to_string(), 0.0)].into();
    let (problem, chart) = registry::build("center_contraction", &params)?;
    let flow = Flow::new(&problem, IntegratorSettings::default());
    let reduction = Reduction::new(flow, &chart, ReductionSettings::default());
    let m = reduction.bifurcation_function(chart.h0())?;
    println!("resonant planar forcing: M = ({:.6}, {:.6}) everywhere", m[0], m[1]);
    for eps in [1e-2, 1e-3] {
        let sweep = seeded_newton_sweep(&flow, &chart, eps, 0.5, 64, 1)?;
        println!("eps {eps:.0e}: {} periodic orbits within 0.5 of the family", sweep.found.len());
    }

    let (problem, chart) = registry::get("forced_vdp")?;
    let reduction = Reduction::new(Flow::new(&problem, IntegratorSettings::default()), &chart, ReductionSettings::default());
    let evaluator = BifurcationEvaluator::new(reduction, BifurcationMode::Consistent)?;
    // a rough guess of a zero is enough for the limit to land on the exact one
    let rec = continue_periodic(&reduction, &Vector::from_vec(vec![0.0, -0.54]), &ContinuationSettings::default())?;
    let found = necessity_check(&evaluator, &rec.observations(1e-2), 1e-6)?;
    println!(
        "van der Pol: chart limit {:?}, |M(h_limit)| = {:.2e}",
        found.limit.h_limit, found.m_norm
    );
    Ok(())
}
