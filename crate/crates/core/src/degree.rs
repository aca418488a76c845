//! Brouwer degree and local indices of zeros of maps `R^k → R^k`.
//!
//! Nondegenerate zeros use `sign det J`. Degenerate zeros fall back to a boundary
//! computation: a sign change in one dimension, a winding number in two.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{central_jacobian, singular_values, solve_or_pinv, Matrix, Vector};

/// Winding computations stop refining once this many boundary samples are in use.
pub const MAX_BOUNDARY_SAMPLES: usize = 1 << 20;

/// A Jacobian is degenerate when `σ_min ≤ DEGENERACY_THRESHOLD · max(1, σ_max)`.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

const INITIAL_SEGMENTS_PER_EDGE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DegreeMethod {
    JacobianSign,
    SignChange1D,
    Winding2D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeResult {
    pub value: i32,
    pub method: DegreeMethod,
    /// False when boundary refinement hit its sample cap with unresolved segments.
    pub certified: bool,
    pub samples_used: usize,
}

fn is_degenerate(sv: &[f64]) -> bool {
    match (sv.first(), sv.last()) {
        (Some(&smax), Some(&smin)) => !(smin > DEGENERACY_THRESHOLD * smax.max(1.0)),
        _ => true,
    }
}

/// `sign det J` for a well-conditioned square Jacobian.
pub fn index_nondegenerate(j: &Matrix) -> Result<DegreeResult> {
    if j.nrows() != j.ncols() || j.nrows() == 0 {
        return Err(Error::Invalid(format!("Jacobian must be square and nonempty, got {}x{}", j.nrows(), j.ncols())));
    }
    let det = j.determinant();
    if is_degenerate(&singular_values(j)) || !det.is_finite() {
        return Err(Error::DegenerateJacobian { det: det.abs() });
    }
    Ok(DegreeResult {
        value: if det > 0.0 { 1 } else { -1 },
        method: DegreeMethod::JacobianSign,
        certified: true,
        samples_used: 0,
    })
}

/// Degree of `f` on `[a, b]`: `(sign f(b) − sign f(a))/2`.
pub fn degree_1d<F>(f: F, a: f64, b: f64) -> Result<DegreeResult>
where
    F: Fn(f64) -> f64,
{
    if !(a < b) {
        return Err(Error::Invalid(format!("interval [{a}, {b}] is empty")));
    }
    let (fa, fb) = (f(a), f(b));
    for (x, v) in [(a, fa), (b, fb)] {
        if v == 0.0 || !v.is_finite() {
            return Err(Error::BoundaryZero { norm: v.abs(), point: vec![x] });
        }
    }
    let sign = |v: f64| if v > 0.0 { 1 } else { -1 };
    Ok(DegreeResult {
        value: (sign(fb) - sign(fa)) / 2,
        method: DegreeMethod::SignChange1D,
        certified: true,
        samples_used: 2,
    })
}

/// Regular polygon with `vertices` corners approximating the circle of radius `radius`.
pub fn circle(center: [f64; 2], radius: f64, vertices: usize) -> Vec<[f64; 2]> {
    (0..vertices)
        .map(|i| {
            let th = 2.0 * PI * i as f64 / vertices as f64;
            [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
        })
        .collect()
}

fn wrap(d: f64) -> f64 {
    let mut d = d % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    } else if d <= -PI {
        d += 2.0 * PI;
    }
    d
}

/// Winding number of `f` along the closed polygon `boundary`.
pub fn degree_2d<F>(f: F, boundary: &[[f64; 2]]) -> Result<DegreeResult>
where
    F: Fn([f64; 2]) -> [f64; 2],
{
    degree_2d_capped(f, boundary, MAX_BOUNDARY_SAMPLES)
}

/// [`degree_2d`] with an explicit sample cap.
///
/// Every edge starts with a fixed number of segments; a segment is bisected while the
/// image angle changes by more than `π/2` across it. Segments are processed in boundary
/// order so the sample count and the angle sum are deterministic.
pub fn degree_2d_capped<F>(f: F, boundary: &[[f64; 2]], max_samples: usize) -> Result<DegreeResult>
where
    F: Fn([f64; 2]) -> [f64; 2],
{
    if boundary.len() < 3 {
        return Err(Error::Invalid("boundary polygon needs at least 3 vertices".into()));
    }
    let eval = |p: [f64; 2]| -> Result<f64> {
        let v = f(p);
        let norm = v[0].hypot(v[1]);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::BoundaryZero { norm, point: p.to_vec() });
        }
        Ok(v[1].atan2(v[0]))
    };
    let lerp = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];

    let mut samples = 0usize;
    let mut total = 0.0;
    let mut certified = true;
    let m = boundary.len();
    for e in 0..m {
        let (a, b) = (boundary[e], boundary[(e + 1) % m]);
        for s in 0..INITIAL_SEGMENTS_PER_EDGE {
            let s0 = s as f64 / INITIAL_SEGMENTS_PER_EDGE as f64;
            let s1 = (s + 1) as f64 / INITIAL_SEGMENTS_PER_EDGE as f64;
            let th0 = eval(lerp(a, b, s0))?;
            let th1 = eval(lerp(a, b, s1))?;
            samples += 2;
            // depth-first bisection; the stack holds (s_lo, θ_lo, s_hi, θ_hi)
            let mut stack = vec![(s0, th0, s1, th1)];
            while let Some((lo, tlo, hi, thi)) = stack.pop() {
                let d = wrap(thi - tlo);
                if d.abs() <= FRAC_PI_2 {
                    total += d;
                    continue;
                }
                if samples >= max_samples {
                    certified = false;
                    total += d;
                    continue;
                }
                let mid = 0.5 * (lo + hi);
                let tm = eval(lerp(a, b, mid))?;
                samples += 1;
                // push the upper half first so the lower half is summed first
                stack.push((mid, tm, hi, thi));
                stack.push((lo, tlo, mid, tm));
            }
        }
    }
    let turns = total / (2.0 * PI);
    let value = turns.round();
    if (turns - value).abs() >= 0.1 {
        certified = false;
    }
    Ok(DegreeResult {
        value: value as i32,
        method: DegreeMethod::Winding2D,
        certified,
        samples_used: samples,
    })
}

/// Deterministic points on the sphere of radius `radius` about `center`.
///
/// `k = 1` gives the two endpoints; `k = 2` equally spaced angles; higher `k` uses a
/// fixed low-discrepancy sequence projected onto the sphere.
pub fn sphere_points(center: &Vector, radius: f64, count: usize) -> Vec<Vector> {
    let k = center.len();
    match k {
        0 => Vec::new(),
        1 => vec![
            Vector::from_element(1, center[0] - radius),
            Vector::from_element(1, center[0] + radius),
        ],
        2 => (0..count)
            .map(|i| {
                let th = 2.0 * PI * (i as f64 + 0.5) / count as f64;
                Vector::from_vec(vec![center[0] + radius * th.cos(), center[1] + radius * th.sin()])
            })
            .collect(),
        _ => {
            // Kronecker sequence in the cube with irrational generalized-golden ratios
            let mut phi = 2.0_f64;
            for _ in 0..64 {
                phi = (1.0 + phi).powf(1.0 / (k as f64 + 1.0));
            }
            let alpha: Vec<f64> = (1..=k).map(|j| (1.0 / phi.powi(j as i32)).fract()).collect();
            let mut out = Vec::with_capacity(count);
            let mut i = 1usize;
            while out.len() < count {
                let u = Vector::from_iterator(k, alpha.iter().map(|a| 2.0 * (0.5 + a * i as f64).fract() - 1.0));
                i += 1;
                let norm = u.norm();
                if norm < 1e-3 {
                    continue;
                }
                out.push(center + u * (radius / norm));
            }
            out
        }
    }
}

/// Outcome of the isolation proxy around a candidate zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTest {
    pub radius: f64,
    pub samples: usize,
    /// Smallest `‖f‖` over the sphere samples.
    pub sphere_min: f64,
    /// The sphere minimum must exceed this.
    pub threshold: f64,
    /// A distinct zero found by Gauss–Newton started from the lowest sphere samples.
    pub nearby_zero: Option<Vec<f64>>,
    pub passed: bool,
}

/// Isolation proxy for a zero `h_star` with polished residual `residual`.
///
/// Passes when the minimum of `‖f‖` over `64·k` sphere samples of the given radius exceeds
/// `10 × residual`, and Gauss–Newton started from the lowest sphere samples does not
/// reach a different zero inside the ball (up to `1.2 × radius`, since curved continua
/// are reached slightly outside the sphere). The second part catches zero continua
/// through `h_star` whose residual is at the noise floor.
pub fn isolation_test<F>(f: F, h_star: &Vector, radius: f64, residual: f64) -> Result<IsolationTest>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let k = h_star.len();
    let points = sphere_points(h_star, radius, 64 * k);
    let mut values = Vec::with_capacity(points.len());
    for p in &points {
        values.push(f(p)?.norm());
    }
    let sphere_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let threshold = 10.0 * residual;

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let scale = values.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let zero_tol = (10.0 * residual).max(1e-9 * scale);
    let mut nearby_zero = None;
    for &i in order.iter().take(k + 1) {
        if let Some(z) = gauss_newton(&f, &points[i], 40, zero_tol)? {
            let d = (&z - h_star).norm();
            if d > 0.05 * radius && d <= 1.2 * radius {
                nearby_zero = Some(z.as_slice().to_vec());
                break;
            }
        }
    }
    let passed = sphere_min.is_finite() && sphere_min > threshold && nearby_zero.is_none();
    Ok(IsolationTest {
        radius,
        samples: points.len(),
        sphere_min,
        threshold,
        nearby_zero,
        passed,
    })
}

/// Damped Gauss–Newton on `f` from `start`; returns the point once `‖f‖ ≤ tol`.
fn gauss_newton<F>(f: &F, start: &Vector, max_iter: usize, tol: f64) -> Result<Option<Vector>>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let mut x = start.clone();
    let mut fx = f(&x)?;
    for _ in 0..max_iter {
        if fx.norm() <= tol {
            return Ok(Some(x));
        }
        let step = 6e-6 * x.norm().max(1.0);
        let j = crate::linalg::try_central_jacobian(f, &x, step)?;
        let dx = solve_or_pinv(&j, &fx);
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..20 {
            let cand = &x - &dx * t;
            let fc = f(&cand)?;
            if fc.norm() < fx.norm() {
                x = cand;
                fx = fc;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok((fx.norm() <= tol).then_some(x))
}

/// Local index of `f` at the isolated zero candidate `h_star`.
///
/// Uses `sign det J` when the supplied (or finite-difference) Jacobian is well
/// conditioned, otherwise the boundary degree on `[h − r, h + r]` or the circle of
/// radius `r`. `residual` is `‖f(h_star)‖` after polishing.
pub fn index_of_zero<F>(f: F, h_star: &Vector, radius: f64, jacobian: Option<&Matrix>, residual: f64) -> Result<DegreeResult>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let k = h_star.len();
    if k == 0 || !(radius > 0.0) {
        return Err(Error::Invalid("index needs k >= 1 and a positive radius".into()));
    }
    let iso = isolation_test(&f, h_star, radius, residual)?;
    if !iso.passed {
        let reason = match &iso.nearby_zero {
            Some(z) => format!("another zero at {z:?} within radius {radius}"),
            None => format!("min |f| on the sphere of radius {radius} is {:.3e}, not above {:.3e}", iso.sphere_min, iso.threshold),
        };
        return Err(Error::NotIsolated { h: h_star.as_slice().to_vec(), reason });
    }
    index_of_isolated_zero(f, h_star, radius, jacobian)
}

/// [`index_of_zero`] for a zero whose isolation has already been established.
pub fn index_of_isolated_zero<F>(f: F, h_star: &Vector, radius: f64, jacobian: Option<&Matrix>) -> Result<DegreeResult>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let k = h_star.len();
    let j = match jacobian {
        Some(j) => j.clone(),
        None => {
            let step = 6e-6 * h_star.norm().max(1.0);
            crate::linalg::try_central_jacobian(&f, h_star, step)?
        }
    };
    match index_nondegenerate(&j) {
        Ok(r) => return Ok(r),
        Err(Error::DegenerateJacobian { .. }) => {}
        Err(e) => return Err(e),
    }
    let first_error = std::cell::RefCell::new(None);
    let record = |e: Error| {
        first_error.borrow_mut().get_or_insert(e);
    };
    let out = match k {
        1 => degree_1d(
            |x| match f(&Vector::from_element(1, x)) {
                Ok(v) => v[0],
                Err(e) => {
                    record(e);
                    f64::NAN
                }
            },
            h_star[0] - radius,
            h_star[0] + radius,
        ),
        2 => degree_2d(
            |p| match f(&Vector::from_vec(p.to_vec())) {
                Ok(v) => [v[0], v[1]],
                Err(e) => {
                    record(e);
                    [f64::NAN, f64::NAN]
                }
            },
            &circle([h_star[0], h_star[1]], radius, 64),
        ),
        _ => return Err(Error::UnsupportedDimension { k }),
    };
    if let Some(e) = first_error.into_inner() {
        return Err(e);
    }
    out
}

/// Finite-difference Jacobian of an infallible map, for convenience in tests and examples.
pub fn fd_jacobian<F>(f: F, h: &Vector) -> Matrix
where
    F: Fn(&Vector) -> Vector,
{
    central_jacobian(f, h, 6e-6 * h.norm().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_circle() -> Vec<[f64; 2]> {
        circle([0.0, 0.0], 1.0, 64)
    }

    #[test]
    fn jacobian_sign_examples() {
        for k in 1..=4 {
            let id = Matrix::identity(k, k);
            assert_eq!(index_nondegenerate(&id).unwrap().value, 1);
            let expected = if k % 2 == 0 { 1 } else { -1 };
            assert_eq!(index_nondegenerate(&(-id)).unwrap().value, expected);
        }
        let j = Matrix::from_diagonal(&Vector::from_vec(vec![PI, -PI]));
        assert_eq!(index_nondegenerate(&j).unwrap().value, -1);
    }

    #[test]
    fn near_singular_jacobian_is_rejected() {
        let j = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 1e-12]));
        assert!(matches!(index_nondegenerate(&j), Err(Error::DegenerateJacobian { .. })));
    }

    #[test]
    fn sign_change_examples() {
        assert_eq!(degree_1d(|h| h, -1.0, 1.0).unwrap().value, 1);
        assert_eq!(degree_1d(|h| -h, -1.0, 1.0).unwrap().value, -1);
        assert_eq!(degree_1d(|h| h * h, -1.0, 1.0).unwrap().value, 0);
        assert!(matches!(degree_1d(|h| h - 1.0, -1.0, 1.0), Err(Error::BoundaryZero { .. })));
    }

    #[test]
    fn winding_examples() {
        let id = degree_2d(|p| p, &unit_circle()).unwrap();
        assert_eq!((id.value, id.certified), (1, true));
        let sq = degree_2d(|[x, y]| [x * x - y * y, 2.0 * x * y], &unit_circle()).unwrap();
        assert_eq!(sq.value, 2);
        let neg = degree_2d(|[x, y]| [-x, -y], &unit_circle()).unwrap();
        assert_eq!(neg.value, 1);
        let cube = degree_2d(|[x, y]| [x * x * x - 3.0 * x * y * y, 3.0 * x * x * y - y * y * y], &unit_circle()).unwrap();
        assert_eq!(cube.value, 3);
        let conj = degree_2d(|[x, y]| [x, -y], &unit_circle()).unwrap();
        assert_eq!(conj.value, -1);
    }

    #[test]
    fn winding_on_a_coarse_square_refines() {
        let square = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        let r = degree_2d(|[x, y]| [x * x - y * y, 2.0 * x * y], &square).unwrap();
        assert_eq!(r.value, 2);
        assert!(r.certified);
    }

    #[test]
    fn no_zero_inside_gives_zero() {
        let r = degree_2d(|[x, y]| [x + 3.0, y], &unit_circle()).unwrap();
        assert_eq!(r.value, 0);
    }

    #[test]
    fn boundary_zero_is_reported() {
        let poly = circle([0.0, 0.0], 1.0, 4);
        assert!(matches!(degree_2d(|[x, y]| [x - 1.0, y], &poly), Err(Error::BoundaryZero { .. })));
    }

    #[test]
    fn cap_marks_result_uncertified() {
        // a fast-spinning image cannot be resolved with a handful of samples
        let f = |[x, y]: [f64; 2]| {
            let th = 10.0 * y.atan2(x);
            [th.cos(), th.sin()]
        };
        let square = circle([0.0, 0.0], 1.0, 4);
        let r = degree_2d_capped(f, &square, 40).unwrap();
        assert!(!r.certified);
        let full = degree_2d(f, &square).unwrap();
        assert!(full.certified);
        assert_eq!(full.value, 10);
    }

    #[test]
    fn refinement_is_deterministic() {
        let f = |[x, y]: [f64; 2]| [x * x - y * y + 0.1, 2.0 * x * y - 0.2];
        let a = degree_2d(f, &unit_circle()).unwrap();
        let b = degree_2d(f, &unit_circle()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn index_of_zero_dispatch() {
        let cubic = |h: &Vector| Ok(h.map(|x| x * x * x));
        let r = index_of_zero(cubic, &Vector::zeros(1), 0.5, None, 0.0).unwrap();
        assert_eq!((r.value, r.method), (1, DegreeMethod::SignChange1D));

        let square = |h: &Vector| Ok(h.map(|x| x * x));
        let r = index_of_zero(square, &Vector::zeros(1), 0.5, None, 0.0).unwrap();
        assert_eq!(r.value, 0);

        let lin = |h: &Vector| Ok(Vector::from_vec(vec![PI * h[0], -PI * (h[1] - 1.0)]));
        let r = index_of_zero(lin, &Vector::from_vec(vec![0.0, 1.0]), 0.5, None, 0.0).unwrap();
        assert_eq!((r.value, r.method), (-1, DegreeMethod::JacobianSign));

        let z2 = |h: &Vector| Ok(Vector::from_vec(vec![h[0] * h[0] - h[1] * h[1], 2.0 * h[0] * h[1]]));
        let r = index_of_zero(z2, &Vector::zeros(2), 0.5, None, 0.0).unwrap();
        assert_eq!((r.value, r.method), (2, DegreeMethod::Winding2D));

        let flat3 = |h: &Vector| Ok(h.map(|x| x * x * x));
        assert!(matches!(
            index_of_zero(flat3, &Vector::zeros(3), 0.5, None, 0.0),
            Err(Error::UnsupportedDimension { k: 3 })
        ));
    }

    #[test]
    fn continuum_is_not_isolated() {
        // zeros on the unit circle and at the origin
        let f = |h: &Vector| {
            let r2 = h.norm_squared();
            Ok(h * (1.0 - r2))
        };
        let on_circle = Vector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(index_of_zero(f, &on_circle, 0.2, None, 0.0), Err(Error::NotIsolated { .. })));
        let origin = index_of_zero(f, &Vector::zeros(2), 0.2, None, 0.0).unwrap();
        assert_eq!(origin.value, 1);
        let flat = |h: &Vector| Ok(h * 0.0);
        assert!(matches!(index_of_zero(flat, &Vector::zeros(2), 0.2, None, 0.0), Err(Error::NotIsolated { .. })));
    }

    #[test]
    fn sphere_points_lie_on_the_sphere() {
        let c = Vector::from_vec(vec![0.5, -1.0, 2.0]);
        let pts = sphere_points(&c, 0.3, 192);
        assert_eq!(pts.len(), 192);
        for p in pts {
            assert!(((p - &c).norm() - 0.3).abs() < 1e-12);
        }
    }

    fn affine_map(a: [f64; 4], c: [f64; 2]) -> impl Fn([f64; 2]) -> [f64; 2] {
        move |[x, y]| [a[0] * x + a[1] * y + c[0], a[2] * x + a[3] * y + c[1]]
    }

    proptest! {
        #[test]
        fn jacobian_sign_matches_winding(
            a in prop::array::uniform4(-2.0f64..2.0),
            c in prop::array::uniform2(-0.3f64..0.3),
        ) {
            let det = a[0] * a[3] - a[1] * a[2];
            prop_assume!(det.abs() > 0.5);
            let m = Matrix::from_row_slice(2, 2, &a);
            let f = affine_map(a, c);
            // boundary image stays away from zero when the zero −A⁻¹c is well inside
            let z = m.clone().try_inverse().unwrap() * Vector::from_vec(vec![-c[0], -c[1]]);
            prop_assume!(z.norm() < 0.5);
            let w = degree_2d(&f, &unit_circle()).unwrap();
            prop_assert_eq!(w.value, index_nondegenerate(&m).unwrap().value);
        }

        #[test]
        fn homotopy_by_small_constant_preserves_degree(
            m in 1u32..4,
            dx in -1.0f64..1.0,
            dy in -1.0f64..1.0,
        ) {
            let power = move |[x, y]: [f64; 2]| {
                let (r, th) = (x.hypot(y), y.atan2(x));
                let rm = r.powi(m as i32);
                [rm * (m as f64 * th).cos(), rm * (m as f64 * th).sin()]
            };
            // boundary minimum of |z^m| on the unit circle is 1; shift by less than half of it
            let scale = 0.49 / dx.hypot(dy).max(1.0);
            let shift = [dx * scale, dy * scale];
            let shifted = move |p: [f64; 2]| {
                let v = power(p);
                [v[0] + shift[0], v[1] + shift[1]]
            };
            let base = degree_2d(power, &unit_circle()).unwrap();
            let moved = degree_2d(shifted, &unit_circle()).unwrap();
            prop_assert_eq!(base.value, m as i32);
            prop_assert_eq!(moved.value, base.value);
        }
    }
}
