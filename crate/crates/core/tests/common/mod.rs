//! Independent reference computations shared by the integration tests.
//!
//! Every registry model is linear at `ε = 0` (`ẋ = Lx`), so the unperturbed flow is a
//! matrix exponential and the first-order response is a quadrature:
//! `Q(ξ) = ∫₀ᵀ e^{L(T−s)} g(s, e^{Ls}ξ) ds`. Nothing here calls the crate's integrator,
//! projectors or reduction code.

#![allow(dead_code)]

use std::f64::consts::PI;

use bifurcate_kit::{Matrix, Vector};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

pub type Forcing = Box<dyn Fn(f64, &Vector) -> Vector + Send + Sync>;

/// Reference model: `ẋ = Lx + ε g(t, x)` with period `T` and the coordinate family
/// `S(h) = (h, 0)`.
pub struct LinearOracle {
    pub l: Matrix,
    pub period: f64,
    pub k: usize,
    g: Forcing,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `e^{L s_i}` and `e^{L (T − s_i)}` at the quadrature nodes.
    forward: Vec<Matrix>,
    backward: Vec<Matrix>,
}

impl LinearOracle {
    pub fn new(l: Matrix, period: f64, k: usize, g: Forcing, panels: usize) -> Self {
        let (gx, gw) = gauss_legendre(8);
        let width = period / panels as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * width;
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(mid + 0.5 * width * x);
                weights.push(0.5 * width * w);
            }
        }
        let forward = nodes.iter().map(|s| (&l * *s).exp()).collect();
        let backward = nodes.iter().map(|s| (&l * (period - s)).exp()).collect();
        Self {
            l,
            period,
            k,
            g,
            nodes,
            weights,
            forward,
            backward,
        }
    }

    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    pub fn point(&self, h: &Vector) -> Vector {
        let mut x = Vector::zeros(self.n());
        x.rows_mut(0, self.k).copy_from(h);
        x
    }

    pub fn monodromy(&self) -> Matrix {
        (&self.l * self.period).exp()
    }

    /// First-order response `Q(ξ, 0)`.
    pub fn response(&self, xi: &Vector) -> Vector {
        let mut q = Vector::zeros(self.n());
        for i in 0..self.nodes.len() {
            let x = &self.forward[i] * xi;
            q += &self.backward[i] * (self.g)(self.nodes[i], &x) * self.weights[i];
        }
        q
    }

    /// Complement limit `lim β(h, ε)/ε = −B D⁻¹ Bᵀ Q` with `B` the trailing coordinates.
    pub fn beta_limit(&self, h: &Vector) -> Vector {
        let n = self.n();
        let m = n - self.k;
        let mut out = Vector::zeros(n);
        if m == 0 {
            return out;
        }
        let q = self.response(&self.point(h));
        let pm = self.monodromy() - Matrix::identity(n, n);
        let d = pm.view((self.k, self.k), (m, m)).into_owned();
        let c = d.lu().solve(&q.rows(self.k, m).into_owned()).expect("invertible complement");
        out.rows_mut(self.k, m).copy_from(&(-c));
        out
    }

    /// `M(h) = (first k coordinates of) Q − (P' − I) B D⁻¹ Bᵀ Q`.
    pub fn bifurcation_function(&self, h: &Vector) -> Vector {
        let n = self.n();
        let q = self.response(&self.point(h));
        let beta = self.beta_limit(h);
        let pm = self.monodromy() - Matrix::identity(n, n);
        let full = q + pm * beta;
        full.rows(0, self.k).into_owned()
    }

    pub fn jacobian(&self, h: &Vector) -> Matrix {
        let step = 1e-5;
        let mut j = Matrix::zeros(self.k, self.k);
        for c in 0..self.k {
            let mut e = Vector::zeros(self.k);
            e[c] = step;
            let col = (self.bifurcation_function(&(h + &e)) - self.bifurcation_function(&(h - &e))) / (2.0 * step);
            j.set_column(c, &col);
        }
        j
    }
}

fn rotation() -> Matrix {
    Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

pub fn harmonic_forced(lambda: f64) -> LinearOracle {
    let g: Forcing = Box::new(move |t, x| Vector::from_vec(vec![0.0, -x[1] + lambda * t.cos()]));
    LinearOracle::new(rotation(), 2.0 * PI, 2, g, 32)
}

pub fn forced_vdp(lambda: f64) -> LinearOracle {
    let g: Forcing = Box::new(move |t, x| Vector::from_vec(vec![0.0, (1.0 - x[0] * x[0]) * x[1] + lambda * t.cos()]));
    LinearOracle::new(rotation(), 2.0 * PI, 2, g, 32)
}

/// Planar center ⊕ `ż = −γz`, forcing `c + a cos t + b sin t + (0, 0, κ x₁ z)`.
pub fn center_contraction(gamma: f64, c: [f64; 3], a: [f64; 3], b: [f64; 3], kappa: f64) -> LinearOracle {
    let mut l = Matrix::zeros(3, 3);
    l.view_mut((0, 0), (2, 2)).copy_from(&rotation());
    l[(2, 2)] = -gamma;
    let g: Forcing = Box::new(move |t, x| {
        let mut v = Vector::from_fn(3, |i, _| c[i] + a[i] * t.cos() + b[i] * t.sin());
        v[2] += kappa * x[0] * x[2];
        v
    });
    LinearOracle::new(l, 2.0 * PI, 2, g, 32)
}

/// Oscillator `(x, x')` ⊕ heat modes `z_j' = −j² z_j`, `j = 1..modes`; the modes drive the
/// velocity through `coupling · z_j / j` and are forced by `coupling · x² / j²`.
pub fn galerkin_heat_osc(modes: usize, lambda: f64, coupling: f64) -> LinearOracle {
    let n = modes + 2;
    let mut l = Matrix::zeros(n, n);
    l.view_mut((0, 0), (2, 2)).copy_from(&rotation());
    for j in 1..=modes {
        l[(j + 1, j + 1)] = -((j * j) as f64);
        l[(1, j + 1)] = coupling / j as f64;
    }
    let g: Forcing = Box::new(move |t, x| {
        let mut v = Vector::zeros(x.len());
        v[1] = (1.0 - x[0] * x[0]) * x[1] + lambda * t.cos();
        for j in 1..=modes {
            v[j + 1] = coupling * x[0] * x[0] / (j * j) as f64;
        }
        v
    });
    LinearOracle::new(l, 2.0 * PI, 2, g, 256)
}

/// Uniform `m × m` grid over the square inscribed in the disc `|h − center| ≤ r`.
pub fn square_grid(center: &Vector, r: f64, m: usize) -> Vec<Vector> {
    let half = r / 2f64.sqrt();
    let mut out = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let s = |k: usize| -half + 2.0 * half * k as f64 / (m - 1) as f64;
            out.push(Vector::from_vec(vec![center[0] + s(i), center[1] + s(j)]));
        }
    }
    out
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

#[test]
fn quadrature_is_exact_for_polynomials() {
    let (x, w) = gauss_legendre(8);
    for p in 0..16 {
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
        let want = if p % 2 == 0 { 2.0 / (p + 1) as f64 } else { 0.0 };
        assert!((got - want).abs() < 1e-14, "degree {p}");
    }
}
