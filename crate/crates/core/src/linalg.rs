//! Dense linear-algebra helpers shared by the flow, reduction and detection layers.

use nalgebra::{DMatrix, DVector};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Finite-difference step `√ε_mach · max(1, ‖x‖)`.
pub fn fd_step(x: &Vector) -> f64 {
    f64::EPSILON.sqrt() * x.norm().max(1.0)
}

/// Central-difference Jacobian of `f` at `x` with the given step.
pub fn central_jacobian<F>(f: F, x: &Vector, step: f64) -> Matrix
where
    F: Fn(&Vector) -> Vector,
{
    let n = x.len();
    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[j] += step;
        minus[j] -= step;
        columns.push((f(&plus) - f(&minus)) / (2.0 * step));
    }
    if columns.is_empty() {
        return Matrix::zeros(0, 0);
    }
    let m = columns[0].len();
    Matrix::from_fn(m, n, |i, j| columns[j][i])
}

/// Fallible central-difference Jacobian.
pub fn try_central_jacobian<F, E>(f: F, x: &Vector, step: f64) -> Result<Matrix, E>
where
    F: Fn(&Vector) -> Result<Vector, E>,
{
    let n = x.len();
    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[j] += step;
        minus[j] -= step;
        columns.push((f(&plus)? - f(&minus)?) / (2.0 * step));
    }
    let m = columns.first().map_or(0, |c| c.len());
    Ok(Matrix::from_fn(m, n, |i, j| columns[j][i]))
}

/// Singular values sorted in decreasing order.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Orthonormal basis of the column span of a full-column-rank `m` (left singular vectors),
/// together with the singular values in decreasing order.
pub fn range_basis(m: &Matrix) -> (Matrix, Vec<f64>) {
    let (n, k) = m.shape();
    if k == 0 {
        return (Matrix::zeros(n, 0), Vec::new());
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let basis = Matrix::from_fn(n, k, |i, j| u[(i, order[j])]);
    let sv = order.iter().map(|&j| svd.singular_values[j]).collect();
    (basis, sv)
}

/// Completes an orthonormal `n×k` basis to an orthonormal basis of the orthogonal
/// complement, using column-pivoted Gram–Schmidt over the coordinate vectors.
///
/// The coordinate vector with the largest residual is taken first, so the result is
/// deterministic and reproduces coordinate axes whenever the range is a coordinate subspace.
pub fn orthogonal_complement(basis: &Matrix) -> Matrix {
    let (n, k) = basis.shape();
    let need = n - k;
    let mut accepted: Vec<Vector> = (0..k).map(|j| basis.column(j).into_owned()).collect();
    let mut out: Vec<Vector> = Vec::with_capacity(need);
    let mut candidates: Vec<Vector> = (0..n).map(|i| {
        let mut e = Vector::zeros(n);
        e[i] = 1.0;
        e
    }).collect();
    while out.len() < need {
        // residuals of every remaining candidate against the accepted set
        let mut best: Option<(usize, Vector, f64)> = None;
        for (idx, c) in candidates.iter().enumerate() {
            let mut r = c.clone();
            for _ in 0..2 {
                for q in &accepted {
                    let proj = q.dot(&r);
                    r.axpy(-proj, q, 1.0);
                }
            }
            let norm = r.norm();
            if best.as_ref().is_none_or(|(_, _, b)| norm > *b + 1e-12) {
                best = Some((idx, r, norm));
            }
        }
        let (idx, r, norm) = best.expect("candidate set cannot be exhausted before the complement is complete");
        let q = r / norm;
        candidates.remove(idx);
        accepted.push(q.clone());
        out.push(q);
    }
    if out.is_empty() {
        return Matrix::zeros(n, 0);
    }
    Matrix::from_columns(&out)
}

/// Solves `a·x = b`, falling back to the pseudo-inverse when `a` is singular.
pub fn solve_or_pinv(a: &Matrix, b: &Vector) -> Vector {
    if a.nrows() == 0 {
        return Vector::zeros(0);
    }
    if let Some(x) = a.clone().lu().solve(b) {
        if x.iter().all(|v| v.is_finite()) {
            return x;
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(b, 1e-12 * smax.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| Vector::zeros(a.ncols()))
}

/// Frobenius-norm relative difference `‖a − b‖ / max(1, ‖b‖)`.
pub fn relative_difference(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn central_jacobian_of_a_polynomial_map() {
        let f = |x: &Vector| Vector::from_vec(vec![x[0] * x[1], x[0] * x[0] - 3.0 * x[1]]);
        let x = Vector::from_vec(vec![1.5, -2.0]);
        let j = central_jacobian(f, &x, 1e-5);
        let want = Matrix::from_row_slice(2, 2, &[-2.0, 1.5, 3.0, -3.0]);
        assert!((j - want).norm() < 1e-9);
    }

    #[test]
    fn singular_values_are_sorted_descending() {
        let m = Matrix::from_diagonal(&Vector::from_vec(vec![0.5, 3.0, 1.0]));
        assert_eq!(singular_values(&m), vec![3.0, 1.0, 0.5]);
        assert!(singular_values(&Matrix::zeros(3, 0)).is_empty());
    }

    #[test]
    fn pseudo_inverse_fallback_gives_the_least_norm_solution() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let x = solve_or_pinv(&a, &Vector::from_vec(vec![2.0, 2.0]));
        assert!((x - Vector::from_vec(vec![1.0, 1.0])).norm() < 1e-12);
        let b = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        assert_eq!(solve_or_pinv(&b, &Vector::from_vec(vec![2.0, 2.0])), Vector::from_vec(vec![1.0, 0.5]));
    }

    proptest! {
        #[test]
        fn complement_completes_an_orthonormal_basis(entries in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let m = Matrix::from_column_slice(4, 2, &entries);
            prop_assume!(singular_values(&m)[1] > 1e-3);
            let (u, _) = range_basis(&m);
            let b = orthogonal_complement(&u);
            prop_assert_eq!(b.shape(), (4, 2));
            let full = Matrix::from_columns(&[u.column(0), u.column(1), b.column(0), b.column(1)]);
            prop_assert!((full.transpose() * &full - Matrix::identity(4, 4)).norm() < 1e-12);
            // range(U) = range(m)
            prop_assert!((b.transpose() * &m).norm() < 1e-12);
        }
    }
}
