//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector};

/// Right singular vectors belonging to the `dim` smallest singular values of
/// `a`, and all singular values sorted in decreasing order.
///
/// Wide matrices are padded with zero rows so that the full right basis is
/// available.
pub fn right_nullspace(a: &DMatrix<f64>, dim: usize) -> (Vec<DVector<f64>>, Vec<f64>) {
    let (r, c) = a.shape();
    let m = if r < c {
        let mut m = DMatrix::zeros(c, c);
        m.rows_mut(0, r).copy_from(a);
        m
    } else {
        a.clone()
    };
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let basis = order[order.len() - dim..]
        .iter()
        .rev()
        .map(|&i| vt.row(i).transpose())
        .collect();
    (basis, sv)
}

/// Eigenvalues of the pencil `(A + w B) v = 0`, computed from the shifted
/// standard problem `(A + s B)^-1 B` restricted to the range of `B`.
/// Infinite eigenvalues are dropped.
///
/// Returns `None` when the shifted matrix is singular or the eigenvalue
/// iteration does not converge. The matrix is the compressed operator whose
/// eigenvalues are `1 / (s - w)`.
pub fn pencil_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>, shift: f64) -> Option<(Vec<Complex<f64>>, DMatrix<f64>)> {
    let shifted = a + b * shift;
    let svd = b.clone().svd(true, true);
    let (u, vt) = (svd.u?, svd.v_t?);
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-13 * smax)
        .collect();
    if keep.is_empty() {
        return Some((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let us = DMatrix::from_fn(a.nrows(), keep.len(), |i, k| u[(i, keep[k])] * svd.singular_values[keep[k]]);
    let vr = DMatrix::from_fn(keep.len(), a.ncols(), |k, j| vt[(keep[k], j)]);
    let x = shifted.lu().solve(&us)?;
    let m = vr * x;
    if m.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let ev = eigenvalues(&m)?;
    let out = ev
        .iter()
        .filter(|mu| mu.norm() > 1e-11 * scale)
        .map(|mu| Complex::new(shift, 0.0) - Complex::new(1.0, 0.0) / mu)
        .collect();
    Some((out, m))
}

/// Eigenvalues of a real square matrix; `None` when the iteration fails.
pub fn eigenvalues(m: &DMatrix<f64>) -> Option<Vec<Complex<f64>>> {
    let n = m.nrows();
    if n == 0 {
        return Some(Vec::new());
    }
    let fm = faer::Mat::<f64>::from_fn(n, m.ncols(), |i, j| m[(i, j)]);
    let ev = fm.eigenvalues().ok()?;
    Some(ev.iter().map(|z| Complex::new(z.re, z.im)).collect())
}

/// Approximate null vector of a nearly singular square matrix by inverse
/// iteration with a small diagonal regularization.
pub fn null_vector(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let eps = m.norm() * 1e-13 + f64::MIN_POSITIVE;
    let mut reg = m.clone();
    for i in 0..n {
        reg[(i, i)] += eps;
    }
    let lu = reg.lu();
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i * 7 + 3) % 11) as f64);
    x.normalize_mut();
    for _ in 0..3 {
        match lu.solve(&x) {
            Some(y) if y.iter().all(|v| v.is_finite()) && y.norm() > 0.0 => x = y.normalize(),
            _ => break,
        }
    }
    x
}

/// Eigenvector of `a` for the (approximately) real eigenvalue `mu`.
pub fn real_eigenvector(a: &DMatrix<f64>, mu: f64) -> DVector<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] -= mu;
    }
    null_vector(&m)
}

/// Solves a small dense system `J dx = r` in least squares (Levenberg style
/// damping `lambda`).
pub fn damped_solve(j: &DMatrix<f64>, r: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let jt = j.transpose();
    let mut h = &jt * j;
    for i in 0..h.nrows() {
        h[(i, i)] += lambda * (1.0 + h[(i, i)]);
    }
    let g = jt * r;
    h.cholesky().map(|c| c.solve(&g)).or_else(|| {
        let jt2 = j.transpose();
        let mut h2 = &jt2 * j;
        for i in 0..h2.nrows() {
            h2[(i, i)] += lambda * (1.0 + h2[(i, i)]);
        }
        h2.lu().solve(&(jt2 * r))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_wide_matrix() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let (basis, sv) = right_nullspace(&a, 2);
        assert_eq!(sv.len(), 4);
        assert!(sv[0] >= sv[1]);
        for b in &basis {
            assert!((&a * b).norm() < 1e-12);
            assert!((b.norm() - 1.0).abs() < 1e-12);
        }
        assert!(basis[0].dot(&basis[1]).abs() < 1e-12);
    }

    #[test]
    fn pencil_recovers_generalized_eigenvalues() {
        // (A + w B) singular at w = 2 and w = -3.
        let a = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 3.0]);
        let b = DMatrix::identity(2, 2);
        let (mut ws, _) = pencil_eigenvalues(&a, &b, 0.37).unwrap();
        ws.sort_by(|x, y| x.re.total_cmp(&y.re));
        assert!((ws[0].re + 3.0).abs() < 1e-12);
        assert!((ws[1].re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pencil_drops_infinite_roots() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let (ws, _) = pencil_eigenvalues(&a, &b, 0.5).unwrap();
        assert_eq!(ws.len(), 1);
        assert!((ws[0].re + 1.0).abs() < 1e-12);
    }

    #[test]
    fn null_vector_of_singular_matrix() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 1.0, 0.0, 1.0]);
        let v = null_vector(&m);
        assert!((&m * &v).norm() < 1e-9);
    }
}
