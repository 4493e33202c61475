//! Camera models, correspondence types, the two constraint residuals, depth
//! recovery and error metrics.
//!
//! Conventions used throughout the crate:
//! - A point `X` in the rig frame G maps to the query camera frame P as
//!   `X_P = R X + t`, and projects to `p ~ K X_P` with `K = diag(f, f, 1)`.
//! - Query image points are centred on the principal point and carried as
//!   homogeneous 3-vectors with last coordinate exactly 1.
//! - A rig camera `G_i` has rotation `R_Gi` (camera to rig) and centre `t_Gi`
//!   in the rig frame, so its pixel `g` back-projects to the rig-frame ray
//!   `q = R_Gi K_Gi^-1 g` starting at `t_Gi`.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat3 = Matrix3<f64>;
pub type Vec3 = Vector3<f64>;

/// Numerical tolerances shared by the geometry routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Maximum deviation of `R^T R` from identity accepted as a rotation.
    pub so3: f64,
    /// Relative residual accepted as "exactly satisfied".
    pub residual: f64,
    /// Below this, a linear depth system is reported as indeterminate.
    pub conditioning: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            so3: 1e-12,
            residual: 1e-9,
            conditioning: 1e-10,
        }
    }
}

pub const TOLERANCES: Tolerances = Tolerances {
    so3: 1e-12,
    residual: 1e-9,
    conditioning: 1e-10,
};

/// A pinhole camera.
///
/// For rig cameras `rotation` is `R_Gi` (camera to rig) and `translation` is
/// the camera centre `t_Gi` in the rig frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinholeCamera {
    pub rotation: Mat3,
    pub translation: Vec3,
    pub focal: f64,
    /// Ratio `fy / fx`; 1 for square pixels.
    pub aspect: f64,
    pub principal_point: Vector2<f64>,
}

impl PinholeCamera {
    pub fn new(rotation: Mat3, translation: Vec3, focal: f64) -> Self {
        Self {
            rotation,
            translation,
            focal,
            aspect: 1.0,
            principal_point: Vector2::zeros(),
        }
    }

    pub fn with_intrinsics(mut self, fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        self.focal = fx;
        self.aspect = if fx != 0.0 { fy / fx } else { 0.0 };
        self.principal_point = Vector2::new(cx, cy);
        self
    }

    pub fn calibration(&self) -> Mat3 {
        Mat3::new(
            self.focal,
            0.0,
            self.principal_point.x,
            0.0,
            self.focal * self.aspect,
            self.principal_point.y,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Checks the rotation and intrinsics.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        if !(self.focal.is_finite() && self.focal > 0.0) {
            return Err(Error::InvalidCamera(format!("focal {} is not positive", self.focal)));
        }
        if !(self.aspect.is_finite() && self.aspect > 0.0) {
            return Err(Error::InvalidCamera(format!("aspect {} is not positive", self.aspect)));
        }
        if !is_rotation(&self.rotation, tol.so3.max(1e-9)) {
            return Err(Error::InvalidCamera("rotation is not in SO(3)".into()));
        }
        Ok(())
    }

    /// Projects a rig-frame point to pixel coordinates. Returns the pixel and
    /// the depth along the optical axis.
    pub fn project(&self, x: &Vec3) -> (Vector2<f64>, f64) {
        let xc = self.rotation.transpose() * (x - self.translation);
        let h = self.calibration() * xc;
        (Vector2::new(h.x / h.z, h.y / h.z), xc.z)
    }
}

/// A calibrated multi-camera rig.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedCamera {
    pub cameras: Vec<PinholeCamera>,
}

impl GeneralizedCamera {
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        if self.cameras.is_empty() {
            return Err(Error::InvalidCamera("rig has no cameras".into()));
        }
        self.cameras.iter().try_for_each(|c| c.validate(tol))
    }
}

/// Query pixel `p` matched to a rig ray `q` from the rig camera centre `tg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corr2D2D {
    pub p: Vec3,
    pub q: Vec3,
    pub tg: Vec3,
    pub cam_index: usize,
}

impl Corr2D2D {
    pub fn new(p: Vector2<f64>, q: Vec3, tg: Vec3, cam_index: usize) -> Self {
        Self {
            p: p.push(1.0),
            q,
            tg,
            cam_index,
        }
    }
}

/// Query pixel `p` matched to a rig-frame 3D point `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corr2D3D {
    pub p: Vec3,
    pub x: Vec3,
}

impl Corr2D3D {
    pub fn new(p: Vector2<f64>, x: Vec3) -> Self {
        Self { p: p.push(1.0), x }
    }
}

/// Counts describing a set of hybrid correspondences: `m` 2D-2D, `n` 2D-3D
/// and `k`, the largest number of 2D-2D matches seen by a single rig camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration {
    pub m: usize,
    pub n: usize,
    pub k: usize,
}

impl Configuration {
    /// A minimal problem fixes the seven unknowns `(R, t, f)`.
    pub fn is_minimal(&self) -> bool {
        self.m + 2 * self.n == 7
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HybridCorrespondences {
    pub twod: Vec<Corr2D2D>,
    pub threed: Vec<Corr2D3D>,
}

impl HybridCorrespondences {
    pub fn new(twod: Vec<Corr2D2D>, threed: Vec<Corr2D3D>) -> Self {
        Self { twod, threed }
    }

    pub fn configuration(&self) -> Configuration {
        let mut counts = std::collections::BTreeMap::new();
        for c in &self.twod {
            *counts.entry(c.cam_index).or_insert(0usize) += 1;
        }
        Configuration {
            m: self.twod.len(),
            n: self.threed.len(),
            k: counts.values().copied().max().unwrap_or(0),
        }
    }

    pub fn len(&self) -> usize {
        self.twod.len() + self.threed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rejects non-finite values and image points not normalised to `p[2] = 1`.
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &Vec3| v.iter().all(|x| x.is_finite());
        for (i, c) in self.twod.iter().enumerate() {
            if !(finite(&c.p) && finite(&c.q) && finite(&c.tg)) {
                return Err(Error::InvalidInput(format!("2D-2D match {i} has non-finite values")));
            }
            if c.p.z != 1.0 {
                return Err(Error::InvalidInput(format!("2D-2D match {i}: p[2] must be 1")));
            }
            if c.q.norm() == 0.0 {
                return Err(Error::InvalidInput(format!("2D-2D match {i}: zero ray")));
            }
        }
        for (i, c) in self.threed.iter().enumerate() {
            if !(finite(&c.p) && finite(&c.x)) {
                return Err(Error::InvalidInput(format!("2D-3D match {i} has non-finite values")));
            }
            if c.p.z != 1.0 {
                return Err(Error::InvalidInput(format!("2D-3D match {i}: p[2] must be 1")));
            }
        }
        Ok(())
    }
}

/// Depths of one 2D-2D match: `alpha` along the query ray, `beta` along the
/// rig ray (in units of `|q|`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthPair {
    pub alpha: f64,
    pub beta: f64,
}

/// Per-correspondence depths; `None` marks an indeterminate depth.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PoseDepths {
    pub twod: Vec<Option<DepthPair>>,
    pub threed: Vec<Option<f64>>,
}

impl PoseDepths {
    /// True when every determinate depth is positive.
    pub fn cheirality_ok(&self) -> bool {
        self.twod.iter().flatten().all(|d| d.alpha > 0.0 && d.beta > 0.0)
            && self.threed.iter().flatten().all(|&a| a > 0.0)
    }

    pub fn positive_fraction(&self) -> f64 {
        let mut pos = 0usize;
        let mut total = 0usize;
        for d in self.twod.iter().flatten() {
            total += 1;
            pos += usize::from(d.alpha > 0.0 && d.beta > 0.0);
        }
        for &a in self.threed.iter().flatten() {
            total += 1;
            pos += usize::from(a > 0.0);
        }
        if total == 0 {
            0.0
        } else {
            pos as f64 / total as f64
        }
    }
}

/// A candidate pose of the query camera together with its focal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseWithFocal {
    pub rotation: Mat3,
    pub translation: Vec3,
    pub focal: f64,
    pub depths: Option<PoseDepths>,
}

impl PoseWithFocal {
    pub fn new(rotation: Mat3, translation: Vec3, focal: f64) -> Self {
        Self {
            rotation,
            translation,
            focal,
            depths: None,
        }
    }

    pub fn calibration(&self) -> Mat3 {
        Mat3::from_diagonal(&Vec3::new(self.focal, self.focal, 1.0))
    }

    /// Pixel projection of a rig-frame point and its depth in P.
    pub fn project(&self, x: &Vec3) -> (Vector2<f64>, f64) {
        let xp = self.rotation * x + self.translation;
        (Vector2::new(self.focal * xp.x / xp.z, self.focal * xp.y / xp.z), xp.z)
    }

    /// Centre of the query camera in the rig frame.
    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }
}

pub fn skew(a: &Vec3) -> Mat3 {
    Mat3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

pub fn is_rotation(r: &Mat3, tol: f64) -> bool {
    (r.transpose() * r - Mat3::identity()).abs().max() <= tol && (r.determinant() - 1.0).abs() <= tol * 10.0
}

/// Back-projects a rig-camera pixel to a rig-frame ray `R_Gi K_Gi^-1 g`.
pub fn ray_from_pixel(g: &Vec3, cam: &PinholeCamera) -> Result<Vec3> {
    let k = cam.calibration();
    let kinv = k
        .try_inverse()
        .filter(|_| cam.focal != 0.0 && cam.aspect != 0.0)
        .ok_or_else(|| Error::InvalidCamera("singular calibration matrix".into()))?;
    Ok(cam.rotation * (kinv * g))
}

/// Generalized epipolar residual `p^T [K R q]x (K R t_G + K t)`.
pub fn residual_2d2d(c: &Corr2D2D, pose: &PoseWithFocal) -> f64 {
    let k = pose.calibration();
    let kr = k * pose.rotation;
    let a = kr * c.q;
    let b = kr * c.tg + k * pose.translation;
    c.p.dot(&a.cross(&b))
}

/// Cross-product form of the projection constraint `[p]x (K R X + K t)`.
pub fn residual_2d3d(c: &Corr2D3D, pose: &PoseWithFocal) -> Vec3 {
    let k = pose.calibration();
    c.p.cross(&(k * (pose.rotation * c.x + pose.translation)))
}

/// `residual_2d2d` divided by the product of the norms of its three factors;
/// a dimensionless value (the sine-like volume of the three vectors).
pub fn relative_residual_2d2d(c: &Corr2D2D, pose: &PoseWithFocal) -> f64 {
    let k = pose.calibration();
    let kr = k * pose.rotation;
    let a = kr * c.q;
    let b = kr * c.tg + k * pose.translation;
    let scale = c.p.norm() * a.norm() * b.norm();
    if scale == 0.0 {
        return 0.0;
    }
    c.p.dot(&a.cross(&b)).abs() / scale
}

/// Sine of the angle between the query ray and the projected point.
pub fn relative_residual_2d3d(c: &Corr2D3D, pose: &PoseWithFocal) -> f64 {
    let k = pose.calibration();
    let v = k * (pose.rotation * c.x + pose.translation);
    let scale = c.p.norm() * v.norm();
    if scale == 0.0 {
        return 0.0;
    }
    c.p.cross(&v).norm() / scale
}

/// Largest relative residual over all correspondences.
pub fn max_relative_residual(corrs: &HybridCorrespondences, pose: &PoseWithFocal) -> f64 {
    let a = corrs.twod.iter().map(|c| relative_residual_2d2d(c, pose));
    let b = corrs.threed.iter().map(|c| relative_residual_2d3d(c, pose));
    a.chain(b).fold(0.0, f64::max)
}

/// Least-squares depths of every correspondence under `pose`.
pub fn recover_depths(corrs: &HybridCorrespondences, pose: &PoseWithFocal) -> PoseDepths {
    recover_depths_with(corrs, pose, &TOLERANCES)
}

pub fn recover_depths_with(corrs: &HybridCorrespondences, pose: &PoseWithFocal, tol: &Tolerances) -> PoseDepths {
    let kinv = Vec3::new(1.0 / pose.focal, 1.0 / pose.focal, 1.0);
    let twod = corrs
        .twod
        .iter()
        .map(|c| {
            let a = c.p.component_mul(&kinv);
            let b = pose.rotation * c.q;
            let rhs = pose.rotation * c.tg + pose.translation;
            depth_pair(&a, &b, &rhs, tol.conditioning)
        })
        .collect();
    let threed = corrs
        .threed
        .iter()
        .map(|c| {
            let a = c.p.component_mul(&kinv);
            let xp = pose.rotation * c.x + pose.translation;
            let scale = xp.norm().max(pose.translation.norm()).max(c.x.norm());
            if xp.norm() <= tol.conditioning * scale.max(1.0) {
                None
            } else {
                Some(a.dot(&xp) / a.norm_squared())
            }
        })
        .collect();
    PoseDepths { twod, threed }
}

/// Solves `alpha a = beta b + c` in least squares.
fn depth_pair(a: &Vec3, b: &Vec3, c: &Vec3, cond: f64) -> Option<DepthPair> {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let (ua, ub) = (a / na, b / nb);
    let cosang = ua.dot(&ub);
    let sin2 = 1.0 - cosang * cosang;
    if sin2 <= cond * cond || ua.cross(&ub).norm() <= cond {
        return None;
    }
    // Normal equations of [ua, -ub] [x; y] = c.
    let (ca, cb) = (ua.dot(c), ub.dot(c));
    let det = 1.0 - cosang * cosang;
    let x = (ca - cosang * cb) / det;
    let y = (cosang * ca - cb) / det;
    Some(DepthPair {
        alpha: x / na,
        beta: y / nb,
    })
}

/// Rotation angle of `Ra Rb^T` in degrees, accurate for tiny angles.
pub fn rotation_error_deg(ra: &Mat3, rb: &Mat3) -> f64 {
    let m = ra * rb.transpose();
    let s = 0.5
        * Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]).norm();
    let c = 0.5 * (m.trace() - 1.0);
    s.atan2(c).to_degrees()
}

pub fn translation_error(ta: &Vec3, tb: &Vec3) -> f64 {
    (ta - tb).norm()
}

pub fn focal_rel_error(fa: f64, fb: f64) -> f64 {
    (fa - fb).abs() / fb
}

/// Rotation about the z axis.
pub fn rot_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation by the axis-angle vector `w` (Rodrigues).
pub fn rotation_exp(w: &Vec3) -> Mat3 {
    *nalgebra::Rotation3::new(*w).matrix()
}

/// Nearest rotation in Frobenius norm.
pub fn project_to_so3(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Mat3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * vt
}

/// Rotation taking the unit vector `a` onto the unit vector `b`.
pub fn rotation_between(a: &Vec3, b: &Vec3) -> Mat3 {
    match nalgebra::Rotation3::rotation_between(a, b) {
        Some(r) => *r.matrix(),
        None => {
            // Antiparallel: half turn about any axis orthogonal to `a`.
            let axis = if a.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            let axis = a.cross(&axis).normalize();
            rotation_exp(&(axis * std::f64::consts::PI))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn sample_pose() -> PoseWithFocal {
        PoseWithFocal::new(rotation_exp(&Vec3::new(0.1, -0.2, 0.3)), Vec3::new(0.5, -1.0, 12.0), 900.0)
    }

    #[test]
    fn skew_examples() {
        assert_eq!(skew(&Vec3::zeros()), Mat3::zeros());
        let a = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(skew(&a) * a, Vec3::zeros());
        assert_eq!(skew(&a) * Vec3::new(4.0, 5.0, 6.0), Vec3::new(-3.0, 6.0, -3.0));
    }

    #[test]
    fn ray_from_pixel_examples() {
        let id = PinholeCamera::new(Mat3::identity(), Vec3::zeros(), 1.0);
        let g = Vec3::new(0.3, -2.0, 1.0);
        assert_eq!(ray_from_pixel(&g, &id).unwrap(), g);

        let k2 = PinholeCamera::new(Mat3::identity(), Vec3::zeros(), 2.0);
        assert_eq!(ray_from_pixel(&Vec3::new(2.0, 4.0, 1.0), &k2).unwrap(), Vec3::new(1.0, 2.0, 1.0));

        let rz = rot_z(std::f64::consts::FRAC_PI_2);
        let cam = PinholeCamera::new(rz, Vec3::zeros(), 1.0);
        assert!((ray_from_pixel(&g, &cam).unwrap() - rz * g).norm() < 1e-15);

        let bad = PinholeCamera::new(Mat3::identity(), Vec3::zeros(), 0.0);
        assert!(matches!(ray_from_pixel(&g, &bad), Err(Error::InvalidCamera(_))));
    }

    #[test]
    fn residuals_vanish_on_exact_data() {
        let pose = sample_pose();
        let x = Vec3::new(1.0, 2.0, 3.0);
        let (px, _) = pose.project(&x);
        let c3 = Corr2D3D::new(px, x);
        assert!(residual_2d3d(&c3, &pose).norm() < 1e-9 * 900.0 * 15.0);
        assert!(relative_residual_2d3d(&c3, &pose) < 1e-12);

        let tg = Vec3::new(-3.0, 1.0, 2.0);
        let c2 = Corr2D2D::new(px, (x - tg) * 0.37, tg, 0);
        assert!(relative_residual_2d2d(&c2, &pose) < 1e-12);

        let mut off = pose.clone();
        off.rotation = rotation_exp(&Vec3::new(0.0, 0.0, 1f64.to_radians())) * off.rotation;
        assert!(relative_residual_2d2d(&c2, &off) > 1e-6);
    }

    #[test]
    fn zero_baseline_annihilates_2d2d_residual() {
        let mut pose = sample_pose();
        pose.translation = Vec3::zeros();
        let c = Corr2D2D {
            p: Vec3::new(10.0, 20.0, 1.0),
            q: Vec3::new(0.3, 0.1, 1.0),
            tg: Vec3::zeros(),
            cam_index: 0,
        };
        assert_eq!(residual_2d2d(&c, &pose), 0.0);
    }

    #[test]
    fn behind_camera_point_has_zero_residual() {
        let pose = PoseWithFocal::new(Mat3::identity(), Vec3::zeros(), 500.0);
        let c = Corr2D3D {
            p: Vec3::new(0.0, 0.0, 1.0),
            x: Vec3::new(0.0, 0.0, -5.0),
        };
        assert_eq!(residual_2d3d(&c, &pose), Vec3::zeros());
        let d = recover_depths(&HybridCorrespondences::new(vec![], vec![c]), &pose);
        assert!(d.threed[0].unwrap() < 0.0);
        assert!(!d.cheirality_ok());
    }

    #[test]
    fn depths_and_sign_flip() {
        let pose = sample_pose();
        let x = Vec3::new(1.0, 2.0, 3.0);
        let (px, depth) = pose.project(&x);
        let tg = Vec3::new(-3.0, 1.0, 2.0);
        let corrs = HybridCorrespondences::new(vec![Corr2D2D::new(px, (x - tg) * 0.5, tg, 0)], vec![Corr2D3D::new(px, x)]);
        let d = recover_depths(&corrs, &pose);
        assert!(close(d.threed[0].unwrap(), depth, 1e-8 * depth));
        let pair = d.twod[0].unwrap();
        assert!(close(pair.alpha, depth, 1e-8 * depth));
        assert!(close(pair.beta, 2.0, 1e-8));
        assert!(d.cheirality_ok());

        let neg = PoseWithFocal::new(pose.rotation * -1.0, -pose.translation, pose.focal);
        let dn = recover_depths(&corrs, &neg);
        assert!(dn.threed[0].unwrap() < 0.0);
        assert!(!dn.cheirality_ok());
    }

    #[test]
    fn point_at_camera_center_is_indeterminate() {
        let pose = sample_pose();
        let c = Corr2D3D {
            p: Vec3::new(1.0, 1.0, 1.0),
            x: pose.center(),
        };
        let d = recover_depths(&HybridCorrespondences::new(vec![], vec![c]), &pose);
        assert_eq!(d.threed[0], None);
    }

    #[test]
    fn metric_examples() {
        let r = rotation_exp(&Vec3::new(0.3, 0.2, 0.1));
        assert_eq!(rotation_error_deg(&r, &r), 0.0);
        let r10 = r * rot_z(10f64.to_radians());
        assert!(close(rotation_error_deg(&r10, &r), 10.0, 1e-9));
        assert!(close(focal_rel_error(1100.0, 1000.0), 0.1, 1e-15));
        assert_eq!(focal_rel_error(1000.0, 1000.0), 0.0);
        assert!(close(translation_error(&Vec3::new(1.0, 2.0, 2.0), &Vec3::zeros()), 3.0, 1e-15));
        let tiny = rotation_exp(&Vec3::new(0.0, 1e-10, 0.0));
        assert!(close(rotation_error_deg(&tiny, &Mat3::identity()), 1e-10f64.to_degrees(), 1e-20));
    }

    #[test]
    fn configuration_counts() {
        let c = |i| Corr2D2D {
            p: Vec3::new(0.0, 0.0, 1.0),
            q: Vec3::z(),
            tg: Vec3::zeros(),
            cam_index: i,
        };
        let x = Corr2D3D {
            p: Vec3::new(0.0, 0.0, 1.0),
            x: Vec3::z(),
        };
        let h = HybridCorrespondences::new(vec![c(0), c(1), c(0)], vec![x, x]);
        assert_eq!(h.configuration(), Configuration { m: 3, n: 2, k: 2 });
        assert!(h.configuration().is_minimal());
        let h = HybridCorrespondences::new(vec![c(4); 5], vec![x]);
        assert_eq!(h.configuration(), Configuration { m: 5, n: 1, k: 5 });
        assert_eq!(HybridCorrespondences::default().configuration(), Configuration { m: 0, n: 0, k: 0 });
    }

    #[test]
    fn rotation_between_handles_antiparallel() {
        let a = Vec3::new(0.0, 0.6, 0.8);
        let r = rotation_between(&a, &-a);
        assert!((r * a + a).norm() < 1e-12);
        assert!(is_rotation(&r, 1e-12));
    }
}
