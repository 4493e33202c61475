//! One 2D-2D match and three 2D-3D matches through a plane homography.
//!
//! The three 3D points span a plane. After moving the rig frame so that the
//! rig camera of the 2D-2D match sits at the origin and the plane reads
//! `N^T X + 1 = 0` with `N = [0, 0, d]`, the three points are related to
//! their images by `H_K = K R - K t N^T`, which only alters the third column
//! of `K R`. The six linear projection constraints leave a three-dimensional
//! family `H_K = n1 N1 + n2 N2 + n3 N3`.
//!
//! With `w = 1/f^2`, `D = diag(w, w, 1)` and the columns `h1, h2, h3` of
//! `H_K`, the remaining unknowns `(n1, n2, n3, w)` satisfy
//!
//! - `h1^T D h1 = 1`, `h2^T D h2 = 1`, `h1^T D h2 = 0` (first two columns
//!   of `R` orthonormal, which also fixes the scale of `H_K`);
//! - `p1 . ((H_K q) x (diag(1, 1, w) (h1 x h2) - h3)) = 0` (the 2D-2D
//!   constraint with `K t` written through the third column).
//!
//! Writing the family as `H_K = P diag(n) X^-1`, with the image points as
//! the columns of `P` and the canonical 3D points as the columns of `X`,
//! makes every coefficient polynomial in `(P, X^-1, q, p1)`. The canonical
//! points share their third coordinate, so the first two column sums of
//! `X^-1` vanish. Generic members of this linear family have 12 complex
//! solutions. The built-in route tracks these 12 solutions from a fixed
//! generic complex member to the given instance along a parameter homotopy.

use std::sync::OnceLock;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{
    project_to_so3, rot_z, rotation_between, Corr2D2D, Corr2D3D, HybridCorrespondences, Mat3, PoseWithFocal, Vec3,
};
use crate::homotopy::{real_endpoints, ComplexSystem, ParameterHomotopy, TrackerOptions, C64};
use crate::poly::{Field, Poly, PolySystem};
use crate::solver::{condition_scale, Backend, SolverOptions};

/// Gauge transforms that bring an H13f sample into canonical form.
///
/// Canonical rig coordinates are `X_c = rig_scale * rig_rotation * (X - rig_translation)`;
/// canonical image coordinates are `p_c = (p_x, p_y) / image_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct H13fFrame {
    pub rig_rotation: Mat3,
    pub rig_translation: Vec3,
    pub rig_scale: f64,
    /// Rotation applied to the query frame (identity for this solver).
    pub p_rotation: Mat3,
    pub image_scale: f64,
    /// Plane vector `N = [0, 0, d]` in canonical coordinates.
    pub d: f64,
    /// Canonical image coordinates of the 2D-2D match.
    pub x1: f64,
    pub y1: f64,
    /// Canonical ray of the 2D-2D match has the form `[r, 0, 1]` (up to
    /// scale); infinite when the ray is parallel to the plane.
    pub r: f64,
}

/// Canonicalized sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalH13f {
    pub frame: H13fFrame,
    pub twod: Corr2D2D,
    pub threed: [Corr2D3D; 3],
}

/// Basis of the homographies compatible with the three 2D-3D matches.
#[derive(Debug, Clone, PartialEq)]
pub struct HKNullspace {
    pub basis: [Mat3; 3],
}

impl HKNullspace {
    pub fn combine(&self, n: &Vec3) -> Mat3 {
        self.basis[0] * n.x + self.basis[1] * n.y + self.basis[2] * n.z
    }

    fn as_array(&self) -> [[[f64; 3]; 3]; 3] {
        let mut b = [[[0.0; 3]; 3]; 3];
        for (k, m) in self.basis.iter().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    b[k][i][j] = m[(i, j)];
                }
            }
        }
        b
    }
}

/// A real solution `(n, w)` of the reduced system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H13fRoot {
    pub n: Vec3,
    pub omega: f64,
}

/// Focal length and translation recovered from a homography.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalTranslation {
    /// `1/f`.
    pub w: f64,
    /// `K t` for the rescaled homography.
    pub t_k: Vec3,
    /// Factor that brought the input homography to the normalized scale.
    pub scale: f64,
}

/// Moves the rig camera of the 2D-2D match to the origin, the plane of the
/// three points to `z = const`, zeroes the y component of the 2D-2D ray and
/// normalizes scene and image scales.
pub fn canonicalize_h13f(corrs: &HybridCorrespondences, opts: &SolverOptions) -> Result<CanonicalH13f> {
    let c2 = corrs.twod[0];
    let origin = c2.tg;
    let xs: Vec<Vec3> = corrs.threed.iter().map(|c| c.x - origin).collect();
    let (e1, e2) = (xs[1] - xs[0], xs[2] - xs[0]);
    let normal = e1.cross(&e2);
    if normal.norm() <= 1e-10 * e1.norm() * e2.norm() || e1.norm() == 0.0 || e2.norm() == 0.0 {
        return Err(Error::DegenerateInput("the three 3D points are collinear".into()));
    }
    let normal = normal.normalize();
    let r_plane = rotation_between(&normal, &Vec3::z());
    let q_plane = r_plane * c2.q;
    let r_ray = rot_z(-q_plane.y.atan2(q_plane.x));
    let rig_rotation = r_ray * r_plane;
    let mean = xs.iter().map(|x| x.norm()).sum::<f64>() / 3.0;
    let rig_scale = 1.0 / mean;
    let xc: Vec<Vec3> = xs.iter().map(|x| rig_rotation * x * rig_scale).collect();
    let height = (xc[0].z + xc[1].z + xc[2].z) / 3.0;
    if height.abs() <= 1e-10 {
        return Err(Error::DegenerateConfiguration(
            "the plane of the 3D points passes through the rig camera of the 2D-2D match".into(),
        ));
    }
    let scale = condition_scale(opts, corrs.twod.iter().map(|c| &c.p).chain(corrs.threed.iter().map(|c| &c.p)));
    let cond = |p: &Vec3| Vec3::new(p.x / scale, p.y / scale, 1.0);
    let mut q = (rig_rotation * c2.q).normalize();
    q.y = 0.0;
    let p1 = cond(&c2.p);
    let frame = H13fFrame {
        rig_rotation,
        rig_translation: origin,
        rig_scale,
        p_rotation: Mat3::identity(),
        image_scale: scale,
        d: -1.0 / height,
        x1: p1.x,
        y1: p1.y,
        r: q.x / q.z,
    };
    let threed = [0, 1, 2].map(|k| Corr2D3D {
        p: cond(&corrs.threed[k].p),
        x: Vec3::new(xc[k].x, xc[k].y, height),
    });
    Ok(CanonicalH13f {
        frame,
        twod: Corr2D2D {
            p: p1,
            q,
            tg: Vec3::zeros(),
            cam_index: c2.cam_index,
        },
        threed,
    })
}

/// Parameters of the canonical problem: image points of the three 2D-3D
/// matches as columns, inverse of the matrix with the canonical 3D points
/// as columns, the 2D-2D ray and the query image point of the 2D-2D match.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H13fParams<C> {
    pub image: [[C; 3]; 3],
    pub inv_points: [[C; 3]; 3],
    pub q: [C; 3],
    pub p: [C; 3],
}

impl<C: Field> H13fParams<C> {
    /// `basis[k] = P diag(e_k) X^-1`.
    pub fn basis(&self) -> [[[C; 3]; 3]; 3] {
        std::array::from_fn(|k| std::array::from_fn(|i| std::array::from_fn(|j| self.image[i][k] * self.inv_points[k][j])))
    }

    pub fn equations(&self) -> Vec<Poly<C>> {
        h13f_equations(&self.basis(), &self.q, &self.p)
    }
}

impl H13fParams<f64> {
    pub fn from_canonical(canon: &CanonicalH13f) -> Result<Self> {
        let image = Mat3::from_columns(&[canon.threed[0].p, canon.threed[1].p, canon.threed[2].p]);
        let points = Mat3::from_columns(&[canon.threed[0].x, canon.threed[1].x, canon.threed[2].x]);
        let unit = |m: &Mat3| m.column(0).norm() * m.column(1).norm() * m.column(2).norm();
        if image.determinant().abs() <= 1e-10 * unit(&image) {
            return Err(Error::DegenerateConfiguration(
                "the image points of the 2D-3D matches are collinear".into(),
            ));
        }
        let inv = points
            .try_inverse()
            .ok_or_else(|| Error::DegenerateConfiguration("canonical 3D points are linearly dependent".into()))?;
        let arr = |m: &Mat3| -> [[f64; 3]; 3] { std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)])) };
        let (q, p) = (canon.twod.q, canon.twod.p);
        Ok(Self {
            image: arr(&image),
            inv_points: arr(&inv),
            q: [q.x, q.y, q.z],
            p: [p.x, p.y, p.z],
        })
    }

    pub fn nullspace(&self) -> HKNullspace {
        let b = self.basis();
        HKNullspace {
            basis: b.map(|m| Mat3::from_fn(|i, j| m[i][j])),
        }
    }

    fn complexify(&self) -> H13fParams<C64> {
        let c = |v: f64| C64::new(v, 0.0);
        H13fParams {
            image: self.image.map(|r| r.map(c)),
            inv_points: self.inv_points.map(|r| r.map(c)),
            q: self.q.map(c),
            p: self.p.map(c),
        }
    }
}

fn lerp(a: &H13fParams<C64>, b: &H13fParams<C64>, t: f64) -> H13fParams<C64> {
    let mix = |x: C64, y: C64| x * (1.0 - t) + y * t;
    let mat = |x: &[[C64; 3]; 3], y: &[[C64; 3]; 3]| -> [[C64; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| mix(x[i][j], y[i][j])))
    };
    H13fParams {
        image: mat(&a.image, &b.image),
        inv_points: mat(&a.inv_points, &b.inv_points),
        q: std::array::from_fn(|i| mix(a.q[i], b.q[i])),
        p: std::array::from_fn(|i| mix(a.p[i], b.p[i])),
    }
}

/// Generic number of complex solutions of the canonical family.
pub const H13F_GENERIC_SOLUTIONS: usize = 12;

/// Degree of the equation coefficients along a straight parameter line.
const PARAMETER_DEGREE: usize = 8;

const PARAMETER_TRACKER: TrackerOptions = TrackerOptions {
    initial_step: 0.01,
    min_step: 1e-12,
    max_step: 0.1,
    max_steps: 5000,
    divergence: 1e9,
    endgame_start: 0.9,
    seed: 0,
};

/// A generic complex member of the canonical family and all its solutions.
struct StartInstance {
    params: H13fParams<C64>,
    solutions: Vec<Vec<C64>>,
}

/// Largest residual relative to the sum of the absolute term values.
fn complex_relative_residual(eqs: &[Poly<C64>], x: &[C64]) -> f64 {
    eqs.iter()
        .map(|e| {
            let mut magnitude = 0.0;
            for (m, c) in &e.terms {
                magnitude += c.norm() * (0..x.len()).map(|k| x[k].norm().powi(m[k] as i32)).product::<f64>();
            }
            e.eval(x).norm() / magnitude.max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

fn random_start(seed: u64) -> Option<StartInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let image: [[C64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| r()));
    let mut inv_points: [[C64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| r()));
    for j in 0..2 {
        inv_points[2][j] = -inv_points[0][j] - inv_points[1][j];
    }
    let q = [r(), C64::new(0.0, 0.0), r()];
    let p = [r(), r(), r()];
    let params = H13fParams { image, inv_points, q, p };
    let eqs = params.equations();
    let opts = TrackerOptions {
        seed: seed ^ 0x9e37_79b9,
        ..TrackerOptions::default()
    };
    let mut solutions: Vec<Vec<C64>> = Vec::new();
    for x in ComplexSystem::from_complex(eqs.clone()).solve(&opts) {
        let scale = 1.0 + x.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let dup = solutions
            .iter()
            .any(|y| y.iter().zip(&x).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) <= 1e-8 * scale);
        if complex_relative_residual(&eqs, &x) <= 1e-11 && !dup {
            solutions.push(x);
        }
    }
    (solutions.len() == H13F_GENERIC_SOLUTIONS).then_some(StartInstance { params, solutions })
}

/// Number of independent start instances tried before giving up on a
/// consistent set of endpoints.
const START_INSTANCES: usize = 3;

fn start_instance(k: usize) -> &'static StartInstance {
    static START: [OnceLock<StartInstance>; START_INSTANCES] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    START[k].get_or_init(|| {
        (0..64u64)
            .find_map(|j| random_start(0x13f0_5eed + 1000 * k as u64 + j))
            .expect("a generic start instance with all solutions is found")
    })
}

/// Whether tracked endpoints look like the full solution set of a real
/// system: every path arrived, endpoints are distinct and the non-real ones
/// pair up under conjugation.
fn endpoints_consistent(ends: &[Option<Vec<C64>>]) -> bool {
    let Some(pts) = ends.iter().cloned().collect::<Option<Vec<_>>>() else {
        return false;
    };
    let scale = |x: &[C64]| 1.0 + x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let dist = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
    for (i, x) in pts.iter().enumerate() {
        let s = scale(x);
        if pts[..i].iter().any(|y| dist(x, y) <= 1e-6 * s) {
            return false;
        }
        let conj: Vec<C64> = x.iter().map(|z| z.conj()).collect();
        if dist(x, &conj) > 1e-6 * s && !pts.iter().any(|y| dist(y, &conj) <= 1e-4 * s) {
            return false;
        }
    }
    true
}

/// Basis of the homographies compatible with the three 2D-3D matches.
pub fn build_hk_nullspace(canon: &CanonicalH13f) -> Result<HKNullspace> {
    Ok(H13fParams::from_canonical(canon)?.nullspace())
}

/// The four equations in `(n1, n2, n3, w)` (variables 0..4).
pub fn h13f_equations<C: Field>(basis: &[[[C; 3]; 3]; 3], q: &[C; 3], p: &[C; 3]) -> Vec<Poly<C>> {
    let nv = 4;
    let n = [Poly::var(nv, 0), Poly::var(nv, 1), Poly::var(nv, 2)];
    let w = Poly::var(nv, 3);
    let hk: Vec<Vec<Poly<C>>> = (0..3)
        .map(|i| {
            (0..3)
                .map(|j| {
                    let mut s = Poly::zero(nv);
                    for k in 0..3 {
                        s = &s + &n[k].scale(basis[k][i][j]);
                    }
                    s
                })
                .collect()
        })
        .collect();
    let col = |j: usize| [hk[0][j].clone(), hk[1][j].clone(), hk[2][j].clone()];
    let (h1, h2, h3) = (col(0), col(1), col(2));
    let one = Poly::constant(nv, C::one());
    let dform = |a: &[Poly<C>; 3], b: &[Poly<C>; 3]| {
        let xy = &(&a[0] * &b[0]) + &(&a[1] * &b[1]);
        &(&w * &xy) + &(&a[2] * &b[2])
    };
    let e1 = &dform(&h1, &h1) - &one;
    let e2 = &dform(&h2, &h2) - &one;
    let e3 = dform(&h1, &h2);
    let mut c = crate::poly::pcross(&h1, &h2);
    c[2] = &c[2] * &w;
    let tk = [&c[0] - &h3[0], &c[1] - &h3[1], &c[2] - &h3[2]];
    let hq: [Poly<C>; 3] = [0, 1, 2].map(|i| {
        let mut s = Poly::zero(nv);
        for j in 0..3 {
            s = &s + &hk[i][j].scale(q[j]);
        }
        s
    });
    let e4 = crate::poly::pdot_const(p, &crate::poly::pcross(&hq, &tk));
    vec![e1, e2, e3, e4]
}

fn equations(ns: &HKNullspace, canon: &CanonicalH13f) -> Vec<Poly<f64>> {
    let q = canon.twod.q;
    let p = canon.twod.p;
    h13f_equations(&ns.as_array(), &[q.x, q.y, q.z], &[p.x, p.y, p.z])
}

/// Residuals of the reduced system at `n`, with `w` eliminated by its
/// least-squares value from the three orthonormality equations. All four
/// residuals vanish exactly when `n` yields a valid pose. The system is not
/// homogeneous: `n = 0` gives residuals `(-1, -1, 0, 0)`.
pub fn evaluate_elim_ideal(ns: &HKNullspace, canon: &CanonicalH13f, n: &Vec3) -> Vec<f64> {
    let eqs = equations(ns, canon);
    let x0 = [n.x, n.y, n.z, 0.0];
    let x1 = [n.x, n.y, n.z, 1.0];
    let (mut num, mut den) = (0.0, 0.0);
    for e in &eqs[..3] {
        let b = e.eval(&x0);
        let a = e.eval(&x1) - b;
        num -= a * b;
        den += a * a;
    }
    let w = if den > 0.0 { num / den } else { 0.0 };
    let x = [n.x, n.y, n.z, w];
    eqs.iter().map(|e| e.eval(&x)).collect()
}

fn dedup_push(out: &mut Vec<H13fRoot>, root: H13fRoot, tol: f64) -> bool {
    let close = |a: &H13fRoot| {
        let dn = (a.n - root.n).norm() / (1.0 + root.n.norm());
        let dw = (a.omega - root.omega).abs() / (1.0 + root.omega.abs());
        dn <= tol && dw <= tol
    };
    if out.iter().any(close) {
        false
    } else {
        out.push(root);
        true
    }
}

/// Relative residual accepted for a polished root.
const ROOT_TOL: f64 = 1e-9;

/// Real roots tracked from the generic start instance.
///
/// When the endpoints from one start instance are inconsistent, the paths
/// from further independent instances are tracked as well and all real
/// endpoints are pooled.
fn solve_parametric(params: &H13fParams<f64>, eqs: &[Poly<f64>]) -> Vec<H13fRoot> {
    let target = params.complexify();
    let mut endpoints: Vec<Vec<C64>> = Vec::new();
    for k in 0..START_INSTANCES {
        let start = start_instance(k);
        let homotopy = ParameterHomotopy::interpolate(PARAMETER_DEGREE, 0x13f0_c4a7 + k as u64, |t| {
            lerp(&start.params, &target, t).equations()
        });
        let ends = homotopy.track(&start.solutions, &PARAMETER_TRACKER);
        let done = endpoints_consistent(&ends);
        endpoints.extend(ends.into_iter().flatten());
        if done {
            break;
        }
    }
    refine_real(eqs, &real_endpoints(&endpoints, 1e-6), 8, 1e-7)
}

/// Polishes candidate real roots and keeps the distinct ones with small
/// relative residual.
fn refine_real(eqs: &[Poly<f64>], candidates: &[Vec<f64>], iters: usize, dedup: f64) -> Vec<H13fRoot> {
    let sys = PolySystem::new(eqs);
    let mut out = Vec::new();
    for r in candidates {
        let mut x = [r[0], r[1], r[2], r[3]];
        sys.polish(&mut x, iters);
        if x.iter().all(|v| v.is_finite()) && sys.relative_residual(&x) <= ROOT_TOL {
            dedup_push(
                &mut out,
                H13fRoot {
                    n: Vec3::new(x[0], x[1], x[2]),
                    omega: x[3],
                },
                dedup,
            );
        }
    }
    out
}

/// Real roots from total-degree homotopy continuation, refined on the real
/// system.
fn solve_oracle(eqs: &[Poly<f64>], opts: &TrackerOptions) -> Vec<H13fRoot> {
    let endpoints = ComplexSystem::new(eqs).solve(opts);
    refine_real(eqs, &real_endpoints(&endpoints, 1e-6), 4, 1e-6)
}

/// All real solutions `(n, w)` of the reduced system.
pub fn solve_h13f_system(params: &H13fParams<f64>, opts: &SolverOptions) -> Result<Vec<H13fRoot>> {
    let eqs = params.equations();
    match opts.backend {
        Backend::Auto => Ok(solve_parametric(params, &eqs)),
        Backend::Oracle => Ok(solve_oracle(&eqs, &TrackerOptions::default())),
        Backend::Template => {
            let set = opts
                .templates
                .as_ref()
                .ok_or_else(|| Error::BackendUnavailable("no solver templates loaded".into()))?;
            let t = set
                .get(crate::solver::SolverId::H13f)
                .ok_or_else(|| Error::BackendUnavailable("no h13f template loaded".into()))?;
            let sols = t.execute(&eqs)?;
            Ok(refine_real(&eqs, &sols, 4, 1e-7))
        }
    }
}

/// Least-squares `(u, v) = (s^2 w^2, s^2)` with `s H` satisfying the three
/// orthonormality equations of its first two columns.
fn orthonormal_scale(hk: &Mat3) -> Option<(f64, f64)> {
    let (h1, h2) = (hk.column(0), hk.column(1));
    let a = nalgebra::Matrix3x2::new(
        h1.x * h1.x + h1.y * h1.y,
        h1.z * h1.z,
        h2.x * h2.x + h2.y * h2.y,
        h2.z * h2.z,
        h1.x * h2.x + h1.y * h2.y,
        h1.z * h2.z,
    );
    let sol = a.svd(true, true).solve(&Vector3::new(1.0, 1.0, 0.0), 1e-14).ok()?;
    (sol[0].is_finite() && sol[1].is_finite()).then_some((sol[0], sol[1]))
}

/// Recovers `w = 1/f`, the homography scale and `K t` from a homography of
/// the canonical problem, solving the three orthonormality equations of the
/// first two columns in least squares for `(s^2 w^2, s^2)`.
pub fn recover_focal_and_t(hk: &Mat3, d: f64) -> Result<FocalTranslation> {
    let (u, v) = orthonormal_scale(hk).ok_or_else(|| Error::DegenerateConfiguration("focal recovery failed".into()))?;
    if !(v > 0.0) {
        return Err(Error::DegenerateConfiguration("homography scale is not real".into()));
    }
    let omega = u / v;
    if !(omega > 1e-24) {
        return Err(Error::DegenerateConfiguration("focal length is not positive".into()));
    }
    let scale = v.sqrt();
    let h = hk * scale;
    let c = h.column(0).cross(&h.column(1));
    let t_k = (Vec3::new(c.x, c.y, c.z * omega) - h.column(2)) / d;
    Ok(FocalTranslation {
        w: omega.sqrt(),
        t_k,
        scale,
    })
}

/// Pose from a calibrated plane homography `H = R - t N^T`, `N = [0, 0, d]`.
pub fn pose_from_homography(h: &Mat3, d: f64, focal: f64) -> Result<PoseWithFocal> {
    let (h1, h2) = (h.column(0).into_owned(), h.column(1).into_owned());
    if (h1.norm() - 1.0).abs() > 1e-3 || (h2.norm() - 1.0).abs() > 1e-3 || h1.dot(&h2).abs() > 1e-3 {
        return Err(Error::InvalidHomography(
            "first two columns are not orthonormal".into(),
        ));
    }
    let r3 = h1.cross(&h2);
    let r = project_to_so3(&Mat3::from_columns(&[h1, h2, r3]));
    let t = (r3 - h.column(2)) / d;
    Ok(PoseWithFocal::new(r, t, focal))
}

/// Maps a canonical pose back to the input frames.
pub fn uncanonicalize(frame: &H13fFrame, canonical: &PoseWithFocal) -> PoseWithFocal {
    let r = frame.p_rotation.transpose() * canonical.rotation * frame.rig_rotation;
    let t = frame.p_rotation.transpose() * canonical.translation / frame.rig_scale - r * frame.rig_translation;
    PoseWithFocal::new(r, t, canonical.focal * frame.image_scale)
}

/// Converts a root of the reduced system into a pose of the input problem.
pub fn root_to_pose(ns: &HKNullspace, canon: &CanonicalH13f, root: &H13fRoot) -> Result<PoseWithFocal> {
    let hk = ns.combine(&root.n);
    let ft = recover_focal_and_t(&hk, canon.frame.d)?;
    let kinv = Mat3::from_diagonal(&Vec3::new(ft.w, ft.w, 1.0));
    let h = kinv * hk * ft.scale;
    let pose = pose_from_homography(&h, canon.frame.d, 1.0 / ft.w)?;
    Ok(uncanonicalize(&canon.frame, &pose))
}

/// Full solver for one 2D-2D and three 2D-3D matches.
pub fn solve_h13f(corrs: &HybridCorrespondences, opts: &SolverOptions) -> Result<Vec<PoseWithFocal>> {
    let cfg = corrs.configuration();
    if cfg.m != 1 || cfg.n != 3 {
        return Err(Error::WrongConfiguration {
            solver: "h13f".into(),
            required: "1 2D-2D match and 3 2D-3D matches".into(),
            m: cfg.m,
            n: cfg.n,
        });
    }
    let canon = canonicalize_h13f(corrs, opts)?;
    let params = H13fParams::from_canonical(&canon)?;
    let ns = params.nullspace();
    let roots = solve_h13f_system(&params, opts)?;
    Ok(roots
        .iter()
        .filter(|r| r.omega > 0.0)
        .filter_map(|r| root_to_pose(&ns, &canon, r).ok())
        .collect())
}
