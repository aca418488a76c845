use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{central_jacobian, fd_step, Matrix, Vector};

pub type ChartMap = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type ChartDerivative = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;

/// A `k`-parameter family `h ↦ S(h)` of initial conditions of unperturbed `T`-periodic
/// solutions, valid on the ball `B(h0, r0)`.
#[derive(Clone)]
pub struct FamilyChart {
    h0: Vector,
    r0: f64,
    n: usize,
    s: ChartMap,
    s_prime: Option<ChartDerivative>,
}

impl fmt::Debug for FamilyChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FamilyChart")
            .field("k", &self.k())
            .field("n", &self.n)
            .field("h0", &self.h0.as_slice())
            .field("r0", &self.r0)
            .field("analytic_derivative", &self.s_prime.is_some())
            .finish()
    }
}

impl FamilyChart {
    pub fn new(
        h0: Vector,
        r0: f64,
        s: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Result<Self> {
        if h0.is_empty() {
            return Err(Error::Invalid("family dimension k must be at least 1".into()));
        }
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(Error::Invalid(format!("chart radius must be positive, got {r0}")));
        }
        let n = s(&h0).len();
        if h0.len() > n {
            return Err(Error::Invalid(format!(
                "family dimension k = {} exceeds state dimension n = {n}",
                h0.len()
            )));
        }
        Ok(Self {
            h0,
            r0,
            n,
            s: Arc::new(s),
            s_prime: None,
        })
    }

    /// Affine family `S(h) = origin + basis·h`.
    pub fn affine(origin: Vector, basis: Matrix, h0: Vector, r0: f64) -> Result<Self> {
        if basis.nrows() != origin.len() || basis.ncols() != h0.len() {
            return Err(Error::Invalid("affine chart basis has the wrong shape".into()));
        }
        let b = basis.clone();
        let chart = Self::new(h0, r0, move |h| &origin + &b * h)?;
        Ok(chart.with_derivative(move |_| basis.clone()))
    }

    pub fn with_derivative(mut self, s_prime: impl Fn(&Vector) -> Matrix + Send + Sync + 'static) -> Self {
        self.s_prime = Some(Arc::new(s_prime));
        self
    }

    pub fn with_ball(&self, h0: Vector, r0: f64) -> Result<Self> {
        if h0.len() != self.k() {
            return Err(Error::Invalid(format!("h0 must have {} components", self.k())));
        }
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(Error::Invalid(format!("chart radius must be positive, got {r0}")));
        }
        let mut c = self.clone();
        c.h0 = h0;
        c.r0 = r0;
        Ok(c)
    }

    pub fn k(&self) -> usize {
        self.h0.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h0(&self) -> &Vector {
        &self.h0
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.s_prime.is_some()
    }

    pub fn point(&self, h: &Vector) -> Vector {
        (self.s)(h)
    }

    /// `S'(h)`; synthesized by central differences when not supplied.
    pub fn derivative(&self, h: &Vector) -> Matrix {
        match &self.s_prime {
            Some(d) => d(h),
            None => self.fd_derivative(h),
        }
    }

    pub fn fd_derivative(&self, h: &Vector) -> Matrix {
        central_jacobian(|y| (self.s)(y), h, fd_step(h))
    }

    pub fn contains(&self, h: &Vector) -> bool {
        (h - &self.h0).norm() <= self.r0
    }

    /// Chart coordinates `H(ξ)`: the locally nearest chart point, found by Gauss–Newton on
    /// `‖ξ − S(h)‖²` from `guess`. Its stationarity condition is `π₁,h (ξ − S(h)) = 0`.
    pub fn coordinates(&self, xi: &Vector, guess: &Vector) -> Vector {
        let mut h = guess.clone();
        for _ in 0..50 {
            let r = xi - self.point(&h);
            let d = self.derivative(&h);
            let step = match d.clone().svd(true, true).solve(&r, 1e-14) {
                Ok(s) => s,
                Err(_) => break,
            };
            h += &step;
            if step.norm() <= 1e-15 * (1.0 + h.norm()) {
                break;
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_chart() -> FamilyChart {
        FamilyChart::new(Vector::from_element(1, 0.0), 1.0, |h| Vector::from_vec(vec![2.0 * h[0].cos(), 2.0 * h[0].sin()])).unwrap()
    }

    #[test]
    fn fd_derivative_of_a_curved_family() {
        let c = circle_chart();
        assert!(!c.has_analytic_derivative());
        let h = Vector::from_element(1, 0.3);
        let want = Matrix::from_column_slice(2, 1, &[-2.0 * 0.3f64.sin(), 2.0 * 0.3f64.cos()]);
        assert!((c.derivative(&h) - want).norm() < 1e-7);
    }

    #[test]
    fn coordinates_invert_the_chart() {
        let c = circle_chart();
        let xi = Vector::from_vec(vec![3.0 * 0.4f64.cos(), 3.0 * 0.4f64.sin()]);
        let h = c.coordinates(&xi, &Vector::from_element(1, 0.0));
        // limited by the finite-difference derivative, the residual has norm 1
        assert!((h[0] - 0.4).abs() < 1e-7);

        let basis = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let a = FamilyChart::affine(Vector::zeros(3), basis, Vector::zeros(2), 2.0).unwrap();
        let h = a.coordinates(&Vector::from_vec(vec![0.5, -1.5, 7.0]), a.h0());
        assert!((h - Vector::from_vec(vec![0.5, -1.5])).norm() < 1e-14);
        assert!(!a.contains(&Vector::from_vec(vec![2.0, 0.1])));
    }

    #[test]
    fn invalid_charts_are_rejected() {
        assert!(FamilyChart::new(Vector::zeros(0), 1.0, |_| Vector::zeros(2)).is_err());
        assert!(FamilyChart::new(Vector::zeros(1), 0.0, |_| Vector::zeros(2)).is_err());
        assert!(FamilyChart::new(Vector::zeros(3), 1.0, |_| Vector::zeros(2)).is_err());
        assert!(circle_chart().with_ball(Vector::zeros(2), 1.0).is_err());
        assert!(FamilyChart::affine(Vector::zeros(3), Matrix::zeros(2, 2), Vector::zeros(2), 1.0).is_err());
    }
}
