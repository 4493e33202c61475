//! Five 2D-2D matches seen by one rig camera plus one 2D-3D match.
//!
//! The 3D point is turned into a sixth match of the same rig camera, the
//! six-point relative pose between the calibrated rig camera and the query
//! camera with unknown focal length is solved, and the metric scale of the
//! translation is then fixed by the 2D-3D match.
//!
//! The focal system: the fundamental matrix lies in the three-dimensional
//! right nullspace of the stacked epipolar constraints, `F = x F1 + y F2 + F3`.
//! With `w = 1/f^2` and `Q = diag(1, 1, w)` it must satisfy `det F = 0` and
//! `2 F F^T Q F - tr(F F^T Q) F = 0`. All ten equations are cubic in `(x, y)`
//! and at most linear in `w`, so hiding `w` gives a 10x10 polynomial
//! eigenvalue problem of degree one whose finite eigenvalues are the nine
//! solutions.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{
    recover_depths, skew, Corr2D2D, Corr2D3D, HybridCorrespondences, Mat3, PinholeCamera, PoseWithFocal, Vec3,
};
use crate::linalg::{null_vector, pencil_eigenvalues, right_nullspace};
use crate::poly::{Field, Poly};
use crate::solver::{condition_scale, Backend, SolverId, SolverOptions};

/// Basis of the fundamental matrices compatible with the six epipolar
/// constraints, in conditioned coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalNullspace {
    pub basis: Vec<Mat3>,
    pub count: usize,
    /// Image scale used for conditioning (`p / scale`).
    pub image_scale: f64,
}

/// Synthetic match obtained by projecting a 3D point into a rig camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedMatch {
    pub corr: Corr2D2D,
    /// True when the point lies behind the rig camera.
    pub behind: bool,
}

/// One real root of the focal system.
#[derive(Debug, Clone, PartialEq)]
pub struct FocalRoot {
    /// Fundamental matrix in pixel units: `p^T F q = 0`.
    pub fundamental: Mat3,
    /// `1/f^2` in pixel units; may be non-positive.
    pub omega: f64,
}

impl FocalRoot {
    pub fn focal(&self) -> Option<f64> {
        (self.omega > 0.0).then(|| 1.0 / self.omega.sqrt())
    }
}

/// Output of the scale recovery step.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPose {
    pub pose: PoseWithFocal,
    pub scale: f64,
    /// False when the recovered scale is not positive.
    pub cheirality_ok: bool,
    /// True when the projection is insensitive to the scale (far point).
    pub ill_conditioned: bool,
}

const SHIFT: f64 = 0.618_033_988_749_894_8;
const MONOMIALS: [(u8, u8); 10] = [(3, 0), (2, 1), (1, 2), (0, 3), (2, 0), (1, 1), (0, 2), (1, 0), (0, 1), (0, 0)];

/// Projects `c3d.x` into `rig_cam` and returns the matching rig ray.
pub fn project_3d_to_sixth_match(c3d: &Corr2D3D, rig_cam: &PinholeCamera, cam_index: usize) -> Result<ProjectedMatch> {
    let d = c3d.x - rig_cam.translation;
    let scale = c3d.x.norm().max(rig_cam.translation.norm()).max(1.0);
    if d.norm() <= 1e-12 * scale {
        return Err(Error::DegenerateInput("3D point coincides with the rig camera centre".into()));
    }
    let xc = rig_cam.rotation.transpose() * d;
    if xc.z.abs() <= 1e-12 * d.norm() {
        return Err(Error::DegenerateInput("3D point lies in the rig camera's principal plane".into()));
    }
    let q = rig_cam.rotation * (xc / xc.z);
    Ok(ProjectedMatch {
        corr: Corr2D2D {
            p: c3d.p,
            q,
            tg: rig_cam.translation,
            cam_index,
        },
        behind: xc.z < 0.0,
    })
}

/// Nullspace of the six conditioned epipolar constraints.
pub fn fundamental_nullspace(corrs: &[Corr2D2D], image_scale: f64) -> Result<FundamentalNullspace> {
    if corrs.len() != 6 {
        return Err(Error::InvalidInput(format!("six matches required, got {}", corrs.len())));
    }
    let mut a = DMatrix::zeros(6, 9);
    for (r, c) in corrs.iter().enumerate() {
        let p = Vec3::new(c.p.x / image_scale, c.p.y / image_scale, 1.0);
        let q = c.q.normalize();
        for i in 0..3 {
            for j in 0..3 {
                a[(r, 3 * i + j)] = p[i] * q[j];
            }
        }
    }
    let (basis, sv) = right_nullspace(&a, 3);
    if sv[5] <= 1e-10 * sv[0] {
        return Err(Error::DegenerateConfiguration(
            "epipolar constraint matrix is rank deficient (nullspace dimension > 3)".into(),
        ));
    }
    let basis = basis.iter().map(|v| Mat3::from_row_slice(v.as_slice())).collect();
    Ok(FundamentalNullspace {
        basis,
        count: 3,
        image_scale,
    })
}

/// The ten focal equations in the variables `(x, y, w)` for a nullspace basis.
pub fn focal_equations<C: Field>(basis: &[[[C; 3]; 3]; 3]) -> Vec<Poly<C>> {
    let nv = 3;
    let x = Poly::var(nv, 0);
    let y = Poly::var(nv, 1);
    let w = Poly::var(nv, 2);
    let f: Vec<Vec<Poly<C>>> = (0..3)
        .map(|i| {
            (0..3)
                .map(|j| {
                    &(&x.scale(basis[0][i][j]) + &y.scale(basis[1][i][j])) + &Poly::constant(nv, basis[2][i][j])
                })
                .collect()
        })
        .collect();
    let minor = |a: usize, b: usize| &(&f[1][a] * &f[2][b]) - &(&f[1][b] * &f[2][a]);
    let det = &(&(&f[0][0] * &minor(1, 2)) - &(&f[0][1] * &minor(0, 2))) + &(&f[0][2] * &minor(0, 1));
    // F F^T Q with Q = diag(1, 1, w).
    let ffq: Vec<Vec<Poly<C>>> = (0..3)
        .map(|i| {
            (0..3)
                .map(|k| {
                    let mut s = Poly::zero(nv);
                    for j in 0..3 {
                        s = &s + &(&f[i][j] * &f[k][j]);
                    }
                    if k == 2 {
                        &s * &w
                    } else {
                        s
                    }
                })
                .collect()
        })
        .collect();
    let tr = &(&ffq[0][0] + &ffq[1][1]) + &ffq[2][2];
    let two = C::from_i64(2);
    let mut out = vec![det];
    for i in 0..3 {
        for j in 0..3 {
            let mut s = Poly::zero(nv);
            for k in 0..3 {
                s = &s + &(&ffq[i][k] * &f[k][j]);
            }
            out.push(&s.scale(two) - &(&tr * &f[i][j]));
        }
    }
    out
}

fn basis_array(ns: &FundamentalNullspace) -> [[[f64; 3]; 3]; 3] {
    let mut b = [[[0.0; 3]; 3]; 3];
    for (k, m) in ns.basis.iter().enumerate().take(3) {
        for i in 0..3 {
            for j in 0..3 {
                b[k][i][j] = m[(i, j)];
            }
        }
    }
    b
}

fn coefficient_matrices(eqs: &[Poly<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut c0 = DMatrix::zeros(10, 10);
    let mut c1 = DMatrix::zeros(10, 10);
    for (r, e) in eqs.iter().enumerate() {
        for (m, &c) in &e.terms {
            let col = MONOMIALS
                .iter()
                .position(|&(a, b)| a == m[0] && b == m[1])
                .expect("focal equations are cubic in (x, y)");
            match m[2] {
                0 => c0[(r, col)] += c,
                1 => c1[(r, col)] += c,
                _ => unreachable!("focal equations are linear in w"),
            }
        }
    }
    (c0, c1)
}

fn relative_residual(eqs: &[Poly<f64>], v: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for e in eqs {
        let val = e.eval(v);
        let mag: f64 = e
            .terms
            .iter()
            .map(|(m, c)| {
                let mut t = c.abs();
                for (i, &k) in m.iter().enumerate().take(3) {
                    t *= v[i].abs().powi(k as i32);
                }
                t
            })
            .sum();
        if mag > 0.0 {
            worst = worst.max(val.abs() / mag);
        }
    }
    worst
}

/// Gauss-Newton polish of `(x, y, w)` on the ten focal equations.
fn polish(eqs: &[Poly<f64>], v: &mut [f64; 3]) {
    let grads: Vec<[Poly<f64>; 3]> = eqs
        .iter()
        .map(|e| [e.derivative(0), e.derivative(1), e.derivative(2)])
        .collect();
    for _ in 0..3 {
        let mut j = DMatrix::zeros(eqs.len(), 3);
        let mut r = nalgebra::DVector::zeros(eqs.len());
        for (i, e) in eqs.iter().enumerate() {
            r[i] = e.eval(v);
            for k in 0..3 {
                j[(i, k)] = grads[i][k].eval(v);
            }
        }
        let Some(dx) = j.clone().svd(true, true).solve(&r, 1e-14).ok() else {
            return;
        };
        let cand = [v[0] - dx[0], v[1] - dx[1], v[2] - dx[2]];
        let rn = r.norm();
        let cn: f64 = eqs.iter().map(|e| e.eval(&cand).powi(2)).sum::<f64>().sqrt();
        if cn < rn {
            *v = cand;
        } else {
            return;
        }
    }
}

/// Candidate `(x, y, w)` roots from the linear pencil in `w`: for each real
/// eigenvalue the null vector of the cubic monomial system gives `(x, y)`.
fn pencil_candidates(eqs: &[Poly<f64>]) -> Result<Vec<[f64; 3]>> {
    let (c0, c1) = coefficient_matrices(eqs);
    let cmax = c0.abs().max().max(c1.abs().max());
    if c0.row(0).abs().max() <= 1e-10 * cmax {
        return Err(Error::DegenerateConfiguration(
            "rank constraint vanishes identically (zero baseline or homography-related matches)".into(),
        ));
    }
    let Some((ws, _)) = pencil_eigenvalues(&c0, &c1, SHIFT) else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for w in ws {
        if w.im.abs() > 1e-6 * w.re.abs().max(1e-300) {
            continue;
        }
        let m = &c0 + &c1 * w.re;
        let v = null_vector(&m);
        if v[9].abs() <= 1e-12 * v.amax() {
            continue;
        }
        out.push([v[7] / v[9], v[8] / v[9], w.re]);
    }
    Ok(out)
}

/// All real roots `(F, w)` of the focal system, before any sign filtering.
pub fn focal_roots(ns: &FundamentalNullspace, opts: &SolverOptions) -> Result<Vec<FocalRoot>> {
    let eqs = focal_equations(&basis_array(ns));
    let candidates = match opts.backend {
        Backend::Auto | Backend::Oracle => pencil_candidates(&eqs)?,
        Backend::Template => {
            let t = opts
                .templates
                .as_ref()
                .and_then(|set| set.get(SolverId::H51f5))
                .ok_or_else(|| Error::BackendUnavailable("no h51f5 template loaded".into()))?;
            t.execute(&eqs)?.into_iter().map(|v| [v[0], v[1], v[2]]).collect()
        }
    };
    let s = ns.image_scale;
    let mut out: Vec<(f64, f64, f64)> = Vec::new();
    for mut sol in candidates {
        polish(&eqs, &mut sol);
        if relative_residual(&eqs, &sol) > 1e-7 {
            continue;
        }
        let dup = out.iter().any(|o| {
            (o.2 - sol[2]).abs() <= 1e-9 * sol[2].abs().max(1e-12)
                && (o.0 - sol[0]).abs() <= 1e-7 * (1.0 + sol[0].abs())
                && (o.1 - sol[1]).abs() <= 1e-7 * (1.0 + sol[1].abs())
        });
        if !dup {
            out.push((sol[0], sol[1], sol[2]));
        }
    }
    let cond = Mat3::from_diagonal(&Vec3::new(1.0 / s, 1.0 / s, 1.0));
    Ok(out
        .into_iter()
        .map(|(x, y, w)| {
            let f = ns.basis[0] * x + ns.basis[1] * y + ns.basis[2];
            FocalRoot {
                fundamental: cond * f,
                omega: w / (s * s),
            }
        })
        .collect())
}

/// Solves the six-point relative pose with unknown focal length on the query
/// side. Returns `(F, f)` pairs in pixel units with `f > 0`.
pub fn solve_onesided_focal_6pt(corrs: &[Corr2D2D], opts: &SolverOptions) -> Result<Vec<(Mat3, f64)>> {
    if let Some(c) = corrs.iter().find(|c| c.cam_index != corrs[0].cam_index) {
        return Err(Error::InvalidInput(format!(
            "all six matches must share one rig camera (found {} and {})",
            corrs[0].cam_index, c.cam_index
        )));
    }
    let scale = condition_scale(opts, corrs.iter().map(|c| &c.p));
    let ns = fundamental_nullspace(corrs, scale)?;
    Ok(focal_roots(&ns, opts)?
        .into_iter()
        .filter_map(|r| r.focal().map(|f| (r.fundamental, f)))
        .collect())
}

/// The four `(R, t)` factorizations of an essential matrix, unit `t`.
fn essential_factorizations(e: &Mat3) -> [(Mat3, Vec3); 4] {
    let svd = e.svd(true, true);
    let mut u = svd.u.unwrap();
    let mut vt = svd.v_t.unwrap();
    // Sort so the smallest singular value is last.
    let sv = svd.singular_values;
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let u0 = Mat3::from_columns(&[u.column(idx[0]), u.column(idx[1]), u.column(idx[2])]);
    let v0 = Mat3::from_rows(&[vt.row(idx[0]), vt.row(idx[1]), vt.row(idx[2])]);
    u = u0;
    vt = v0;
    if u.determinant() < 0.0 {
        u = -u;
    }
    if vt.determinant() < 0.0 {
        vt = -vt;
    }
    let w = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let r1 = u * w * vt;
    let r2 = u * w.transpose() * vt;
    let t = u.column(2).into_owned();
    [(r1, t), (r1, -t), (r2, t), (r2, -t)]
}

/// Factorizes `E = K F` and keeps the factorization with the largest number
/// of matches in front of both cameras, provided that is a majority.
///
/// The returned translation is the unit direction from the query camera to
/// the rig camera centre, expressed in the query frame.
pub fn decompose_to_pose(fundamental: &Mat3, focal: f64, corrs: &[Corr2D2D]) -> Vec<PoseWithFocal> {
    let k = Mat3::from_diagonal(&Vec3::new(focal, focal, 1.0));
    let e = k * fundamental;
    let local: Vec<Corr2D2D> = corrs.iter().map(|c| Corr2D2D { tg: Vec3::zeros(), ..*c }).collect();
    let hc = HybridCorrespondences::new(local, vec![]);
    let mut best: Option<(usize, PoseWithFocal)> = None;
    for (r, t) in essential_factorizations(&e) {
        let pose = PoseWithFocal::new(r, t, focal);
        let d = recover_depths(&hc, &pose);
        let votes = d.twod.iter().flatten().filter(|p| p.alpha > 0.0 && p.beta > 0.0).count();
        if best.as_ref().map_or(true, |(b, _)| votes > *b) {
            best = Some((votes, pose));
        }
    }
    match best {
        Some((votes, pose)) if 2 * votes > corrs.len() => vec![pose],
        _ => Vec::new(),
    }
}

/// Fixes the length of the translation with one 2D-3D match.
///
/// `pose_dir.translation` is the unit direction of the rig camera centre in
/// the query frame; `tg` is that centre in the rig frame. The returned pose
/// has `t = s t_dir - R tg`, which reduces to `s t_dir` when `tg = 0`.
pub fn recover_scale(pose_dir: &PoseWithFocal, c3d: &Corr2D3D, tg: &Vec3) -> Result<ScaledPose> {
    let k = pose_dir.calibration();
    let r = pose_dir.rotation;
    let px = skew(&c3d.p);
    let kt = k * pose_dir.translation;
    let a = px * kt;
    let b = px * (k * (r * (c3d.x - tg)));
    if a.norm() <= 1e-12 * c3d.p.norm() * kt.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::ScaleIndeterminate(
            "the query ray of the 3D point is parallel to the baseline".into(),
        ));
    }
    let s = -a.dot(&b) / a.norm_squared();
    let xp = r * (c3d.x - tg) + pose_dir.translation * s;
    let sensitivity = a.norm() * s.abs() / (c3d.p.norm() * (k * xp).norm().max(f64::MIN_POSITIVE));
    let pose = PoseWithFocal::new(r, pose_dir.translation * s - r * tg, pose_dir.focal);
    Ok(ScaledPose {
        pose,
        scale: s,
        cheirality_ok: s > 0.0,
        ill_conditioned: sensitivity < 1e-8,
    })
}

/// Full solver for five 2D-2D matches of one rig camera and one 2D-3D match.
pub fn solve_h51f5(corrs: &HybridCorrespondences, opts: &SolverOptions) -> Result<Vec<PoseWithFocal>> {
    let cfg = corrs.configuration();
    if cfg.m != 5 || cfg.n != 1 || cfg.k != 5 {
        return Err(Error::WrongConfiguration {
            solver: "h51f5".into(),
            required: "5 2D-2D matches of one rig camera and 1 2D-3D match".into(),
            m: cfg.m,
            n: cfg.n,
        });
    }
    let c3d = corrs.threed[0];
    let tg = corrs.twod[0].tg;
    let cam = corrs.twod[0].cam_index;
    if corrs.twod.iter().any(|c| (c.tg - tg).norm() > 1e-12 * (1.0 + tg.norm())) {
        return Err(Error::InvalidInput("matches of one rig camera must share its centre".into()));
    }
    if (c3d.x - tg).norm() <= 1e-12 * (1.0 + tg.norm()) {
        return Err(Error::DegenerateInput("3D point coincides with the rig camera centre".into()));
    }
    let mut six = corrs.twod.clone();
    six.push(Corr2D2D {
        p: c3d.p,
        q: c3d.x - tg,
        tg,
        cam_index: cam,
    });
    let mut out = Vec::new();
    for (fm, f) in solve_onesided_focal_6pt(&six, opts)? {
        for pose in decompose_to_pose(&fm, f, &six) {
            match recover_scale(&pose, &c3d, &tg) {
                Ok(sp) if sp.cheirality_ok => out.push(sp.pose),
                _ => {}
            }
        }
    }
    Ok(out)
}
