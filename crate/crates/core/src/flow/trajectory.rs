use std::io::Write;

use crate::error::{Error, Result};
use crate::flow::integrator::{Augmentation, IntegratorSettings, IntegratorStats, Stepper};
use crate::linalg::Vector;
use crate::model::EvolutionProblem;

/// A computed solution `x(t, ξ, ε)` on `[0, t_end]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub xi: Vector,
    pub eps: f64,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("a trajectory has at least its initial node")
    }

    pub fn final_state(&self) -> &Vector {
        self.states.last().expect("a trajectory has at least its initial node")
    }

    /// Dense output: the state at any `t` in the covered interval.
    ///
    /// Between nodes the solution is reconstructed by one step of the same scheme from the
    /// preceding node; that step is shorter than the accepted one, so its local error stays
    /// within the tolerance the node was accepted at.
    pub fn state_at(&self, problem: &EvolutionProblem, settings: IntegratorSettings, t: f64) -> Result<Vector> {
        let (t0, t1) = (self.times[0], self.final_time());
        if t < t0 || t > t1 {
            return Err(Error::Invalid(format!("t = {t} lies outside the trajectory span [{t0}, {t1}]")));
        }
        let idx = match self.times.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => return Ok(self.states[i].clone()),
            Err(i) => i - 1,
        };
        let stepper = Stepper::new(problem, Augmentation::None { eps: self.eps }, settings);
        let y = stepper.single_step(self.times[idx], self.states[idx].as_slice(), t - self.times[idx]);
        Ok(Vector::from_vec(y))
    }

    /// Writes `t, x1, …, xn` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let n = self.xi.len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for (t, x) in self.times.iter().zip(&self.states) {
            let mut row = vec![format!("{t:.16e}")];
            row.extend(x.iter().map(|v| format!("{v:.16e}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
