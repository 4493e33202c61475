//! Linear projection-matrix baseline: the 3x4 camera matrix from six or more
//! 2D-3D matches, decomposed into calibration and pose. The focal length is
//! the mean of the two diagonal calibration entries.

use nalgebra::{DMatrix, Matrix3x4};

use crate::error::{Error, Result};
use crate::geometry::{HybridCorrespondences, Mat3, PoseWithFocal, Vec3};
use crate::linalg::right_nullspace;

/// Splits `m = K R` with `K` upper triangular with positive diagonal and
/// `R` orthonormal; `m` must have positive determinant.
pub fn rq3(m: &Mat3) -> Option<(Mat3, Mat3)> {
    let row = |i: usize| m.row(i).transpose();
    let (m1, m2, m3) = (row(0), row(1), row(2));
    let k33 = m3.norm();
    if k33 == 0.0 {
        return None;
    }
    let r3 = m3 / k33;
    let k23 = m2.dot(&r3);
    let u2 = m2 - r3 * k23;
    let k22 = u2.norm();
    if k22 == 0.0 {
        return None;
    }
    let r2 = u2 / k22;
    let (k13, k12) = (m1.dot(&r3), m1.dot(&r2));
    let u1 = m1 - r3 * k13 - r2 * k12;
    let k11 = u1.norm();
    if k11 == 0.0 {
        return None;
    }
    let r1 = u1 / k11;
    let k = Mat3::new(k11, k12, k13, 0.0, k22, k23, 0.0, 0.0, k33);
    let r = Mat3::from_rows(&[r1.transpose(), r2.transpose(), r3.transpose()]);
    Some((k, r))
}

pub fn solve_dlt_ap(corrs: &HybridCorrespondences) -> Result<Vec<PoseWithFocal>> {
    let n = corrs.threed.len();
    if n < 6 {
        return Err(Error::WrongConfiguration {
            solver: "dlt-ap".into(),
            required: "at least 6 2D-3D matches".into(),
            m: corrs.twod.len(),
            n,
        });
    }
    let centroid = corrs.threed.iter().map(|c| c.x).sum::<Vec3>() / n as f64;
    let spread = (corrs.threed.iter().map(|c| (c.x - centroid).norm_squared()).sum::<f64>() / n as f64).sqrt();
    let img = (corrs.threed.iter().map(|c| c.p.xy().norm_squared()).sum::<f64>() / n as f64).sqrt();
    if !(spread > 0.0) || !(img > 0.0) {
        return Err(Error::DegenerateInput("2D-3D matches have no spread".into()));
    }
    let mut a = DMatrix::zeros(2 * n, 12);
    for (i, c) in corrs.threed.iter().enumerate() {
        let x = (c.x - centroid) / spread;
        let (u, v) = (c.p.x / img, c.p.y / img);
        let xh = [x.x, x.y, x.z, 1.0];
        for j in 0..4 {
            a[(2 * i, j)] = xh[j];
            a[(2 * i, 8 + j)] = -u * xh[j];
            a[(2 * i + 1, 4 + j)] = xh[j];
            a[(2 * i + 1, 8 + j)] = -v * xh[j];
        }
    }
    let (basis, sv) = right_nullspace(&a, 1);
    if sv.len() >= 11 && sv[10] <= 1e-12 * sv[0] {
        return Err(Error::DegenerateConfiguration("projection matrix is not unique".into()));
    }
    let pn = Matrix3x4::from_row_slice(basis[0].as_slice());
    let denorm_img = Mat3::from_diagonal(&Vec3::new(img, img, 1.0));
    let mut denorm_pts = nalgebra::Matrix4::identity() / spread;
    denorm_pts[(3, 3)] = 1.0;
    for k in 0..3 {
        denorm_pts[(k, 3)] = -centroid[k] / spread;
    }
    let mut p = denorm_img * pn * denorm_pts;
    let mut m: Mat3 = p.fixed_view::<3, 3>(0, 0).into_owned();
    if m.determinant() < 0.0 {
        p = -p;
        m = -m;
    }
    let (k, r) = rq3(&m).ok_or_else(|| Error::DegenerateConfiguration("singular projection matrix".into()))?;
    let t = k.try_inverse().ok_or_else(|| Error::DegenerateConfiguration("singular calibration".into()))?
        * p.column(3).into_owned();
    let f = 0.5 * (k[(0, 0)] + k[(1, 1)]) / k[(2, 2)];
    Ok(vec![PoseWithFocal::new(r, t, f)])
}
