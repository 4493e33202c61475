//! Three 2D-2D matches and two 2D-3D matches.
//!
//! In canonical coordinates the two 3D points sit at the origin and at
//! `e_z`, and the image of the origin is `[1, 0, 1]`. The rotation is
//! written through a non-normalized quaternion `(1, a, b, c)` with rotation
//! matrix `S = |q|^2 R`, so `M = diag(1, 1, w) S` is proportional to `K R`
//! with `w = 1/f`. The second 3D point fixes `w` and the translation along
//! `[1, 0, 1]` rationally in the quaternion, with denominator `S_33`. After
//! clearing that denominator each 2D-2D match gives a polynomial of degree
//! eight that is divisible by `S_33`; the quotients form a square system of
//! degree six in `(a, b, c)`.
//!
//! The system is solved by a seeded multi-start Levenberg-Marquardt search
//! (or by a loaded solver template).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{
    max_relative_residual, rot_z, rotation_between, Corr2D2D, Corr2D3D, HybridCorrespondences, Mat3, PoseWithFocal,
    Vec3,
};
use crate::poly::{Field, Poly, PolySystem};
use crate::solver::{Backend, SolverId, SolverOptions};

/// Gauge transforms of an H32f sample.
///
/// Canonical rig coordinates are `rig_scale * rig_rotation * (X - rig_origin)`;
/// canonical image coordinates are `image_rotation * (p_x, p_y) / image_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct H32fFrame {
    pub rig_rotation: Mat3,
    pub rig_origin: Vec3,
    pub rig_scale: f64,
    pub image_rotation: Mat3,
    pub image_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalH32f {
    pub frame: H32fFrame,
    /// Canonical image of the second 3D point.
    pub x4: f64,
    pub y4: f64,
    pub twod: [Corr2D2D; 3],
}

/// Fixed rotation about the vertical axis applied to the rig frame so that
/// typical instances stay away from the half-turn quaternions with zero
/// real part.
const RIG_TWIST: f64 = 0.7;

pub fn canonicalize_h32f(corrs: &HybridCorrespondences) -> Result<CanonicalH32f> {
    let (c5, c4) = (corrs.threed[0], corrs.threed[1]);
    let axis = c4.x - c5.x;
    let len = axis.norm();
    if !(len > 1e-12 * (1.0 + c5.x.norm())) {
        return Err(Error::DegenerateInput("the two 3D points coincide".into()));
    }
    let rig_rotation = rot_z(RIG_TWIST) * rotation_between(&(axis / len), &Vec3::z());
    let rig_scale = 1.0 / len;

    let rho = c5.p.xy().norm();
    if !(rho > 1e-9) {
        return Err(Error::DegenerateConfiguration(
            "the first 3D point projects onto the principal point".into(),
        ));
    }
    let image_rotation = rot_z(-c5.p.y.atan2(c5.p.x));
    let to_image = |p: &Vec3| {
        let r = image_rotation * Vec3::new(p.x, p.y, 0.0) / rho;
        Vec3::new(r.x, r.y, 1.0)
    };
    let p4 = to_image(&c4.p);
    if p4.y.abs() <= 1e-10 * (1.0 + p4.x.abs()) {
        return Err(Error::DegenerateConfiguration(
            "the images of the two 3D points are collinear with the principal point".into(),
        ));
    }
    let frame = H32fFrame {
        rig_rotation,
        rig_origin: c5.x,
        rig_scale,
        image_rotation,
        image_scale: rho,
    };
    let twod = [0, 1, 2].map(|i| {
        let c = corrs.twod[i];
        Corr2D2D {
            p: to_image(&c.p),
            q: (rig_rotation * c.q).normalize(),
            tg: rig_rotation * (c.tg - c5.x) * rig_scale,
            cam_index: c.cam_index,
        }
    });
    Ok(CanonicalH32f {
        frame,
        x4: p4.x,
        y4: p4.y,
        twod,
    })
}

/// Entries of `|q|^2 R` for `q = (1, a, b, c)` as polynomials in `(a, b, c)`.
pub fn quaternion_rotation<C: Field>() -> [[Poly<C>; 3]; 3] {
    let nv = 3;
    let one = Poly::constant(nv, C::one());
    let (a, b, c) = (Poly::var(nv, 0), Poly::var(nv, 1), Poly::var(nv, 2));
    let two = C::from_i64(2);
    let sq = |p: &Poly<C>| p * p;
    let r00 = &(&(&one + &sq(&a)) - &sq(&b)) - &sq(&c);
    let r11 = &(&(&one - &sq(&a)) + &sq(&b)) - &sq(&c);
    let r22 = &(&(&one - &sq(&a)) - &sq(&b)) + &sq(&c);
    let r01 = (&(&a * &b) - &c).scale(two);
    let r10 = (&(&a * &b) + &c).scale(two);
    let r02 = (&(&a * &c) + &b).scale(two);
    let r20 = (&(&a * &c) - &b).scale(two);
    let r12 = (&(&b * &c) - &a).scale(two);
    let r21 = (&(&b * &c) + &a).scale(two);
    [[r00, r01, r02], [r10, r11, r12], [r20, r21, r22]]
}

/// The three cleared 2D-2D equations of degree eight, before dividing out
/// `S_33`, together with `S_33`.
pub fn h32f_cleared_equations<C: Field>(x4: C, y4: C, twod: &[([C; 3], [C; 3], [C; 3])]) -> (Vec<Poly<C>>, Poly<C>) {
    let s = quaternion_rotation::<C>();
    let q33 = s[2][2].clone();
    let (m13, m23) = (&s[0][2], &s[1][2]);
    let yinv = y4.inv();
    // w * S_33 and alpha * S_33.
    let wq = (&m13.scale(y4) + &m23.scale(C::one() - x4)).scale(yinv);
    let alpha = (&m23.scale(x4) - &m13.scale(y4)).scale(yinv);
    let aq = &alpha * &q33;
    let rows: [[Poly<C>; 3]; 3] = [
        [0, 1, 2].map(|j| &q33 * &s[0][j]),
        [0, 1, 2].map(|j| &q33 * &s[1][j]),
        [0, 1, 2].map(|j| &wq * &s[2][j]),
    ];
    let apply = |v: &[C; 3]| -> [Poly<C>; 3] {
        [0, 1, 2].map(|i| &(&rows[i][0].scale(v[0]) + &rows[i][1].scale(v[1])) + &rows[i][2].scale(v[2]))
    };
    let eqs = twod
        .iter()
        .map(|(p, q, tg)| {
            let mq = apply(q);
            let mut mt = apply(tg);
            mt[0] = &mt[0] + &aq;
            mt[2] = &mt[2] + &aq;
            crate::poly::pdot_const(p, &crate::poly::pcross(&mq, &mt))
        })
        .collect();
    (eqs, q33)
}

/// Square system of degree six in `(a, b, c)`.
pub fn build_h32f_system(canon: &CanonicalH32f) -> Result<Vec<Poly<f64>>> {
    let data: Vec<_> = canon
        .twod
        .iter()
        .map(|c| (c.p.into(), c.q.into(), c.tg.into()))
        .collect();
    let (cleared, q33) = h32f_cleared_equations(canon.x4, canon.y4, &data);
    cleared
        .iter()
        .map(|e| {
            e.divide_approx(&q33, 1e-11)
                .ok_or_else(|| Error::DegenerateConfiguration("cleared equation not divisible".into()))
        })
        .collect()
}

/// Pose in the canonical frames for a quaternion `(1, a, b, c)`.
pub fn pose_from_quaternion(canon: &CanonicalH32f, v: &[f64; 3]) -> Option<PoseWithFocal> {
    let (a, b, c) = (v[0], v[1], v[2]);
    let norm2 = 1.0 + a * a + b * b + c * c;
    let s = quaternion_rotation::<f64>().map(|row| row.map(|p| p.eval(v)));
    let s = Mat3::from_fn(|i, j| s[i][j]);
    let q33 = s[(2, 2)];
    if q33.abs() <= 1e-9 * norm2 {
        return None;
    }
    let (x4, y4) = (canon.x4, canon.y4);
    let (m13, m23) = (s[(0, 2)], s[(1, 2)]);
    let w = (y4 * m13 + (1.0 - x4) * m23) / (y4 * q33);
    let alpha = (x4 * m23 - y4 * m13) / y4;
    if !(w.abs() > 1e-12) || !w.is_finite() {
        return None;
    }
    let lambda = w * norm2;
    let depth = alpha / lambda;
    let flip = Mat3::from_diagonal(&Vec3::new(w.signum(), w.signum(), 1.0));
    let r = flip * s / norm2;
    let t = Vec3::new(w.abs(), 0.0, 1.0) * depth;
    Some(PoseWithFocal::new(r, t, 1.0 / w.abs()))
}

pub fn uncanonicalize(frame: &H32fFrame, canonical: &PoseWithFocal) -> PoseWithFocal {
    let back = frame.image_rotation.transpose();
    let r = back * canonical.rotation * frame.rig_rotation;
    let t = back * canonical.translation / frame.rig_scale - r * frame.rig_origin;
    PoseWithFocal::new(r, t, canonical.focal * frame.image_scale)
}

pub const ORACLE_STARTS: usize = 500;
const ORACLE_SEED: u64 = 0x5eed_32f0;
const ROOT_TOL: f64 = 1e-9;

/// Real roots `(a, b, c)` found from seeded random unit quaternions.
pub fn solve_h32f_oracle(eqs: &[Poly<f64>], starts: usize) -> Vec<[f64; 3]> {
    let sys = PolySystem::new(eqs);
    let mut rng = ChaCha8Rng::seed_from_u64(ORACLE_SEED);
    let mut out: Vec<[f64; 3]> = Vec::new();
    for _ in 0..starts {
        let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        if q[0].abs() < 0.05 {
            continue;
        }
        let mut x = [q[1] / q[0], q[2] / q[0], q[3] / q[0]];
        if sys.levenberg_marquardt(&mut x, 60, 1e-11) {
            sys.polish(&mut x, 4);
            if sys.relative_residual(&x) > ROOT_TOL || !x.iter().all(|v| v.is_finite()) {
                continue;
            }
            let n = 1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !out.iter().any(|u| (0..3).all(|i| (u[i] - x[i]).abs() <= 1e-7 * n)) {
                out.push(x);
            }
        }
    }
    out
}

fn same_pose(a: &PoseWithFocal, b: &PoseWithFocal) -> bool {
    (a.rotation - b.rotation).norm() <= 1e-6
        && (a.translation - b.translation).norm() <= 1e-6 * (1.0 + a.translation.norm())
        && (a.focal - b.focal).abs() <= 1e-6 * a.focal
}

pub fn solve_h32f(corrs: &HybridCorrespondences, opts: &SolverOptions) -> Result<Vec<PoseWithFocal>> {
    let cfg = corrs.configuration();
    if cfg.m != 3 || cfg.n != 2 {
        return Err(Error::WrongConfiguration {
            solver: "h32f".into(),
            required: "3 2D-2D matches and 2 2D-3D matches".into(),
            m: cfg.m,
            n: cfg.n,
        });
    }
    let canon = canonicalize_h32f(corrs)?;
    let eqs = build_h32f_system(&canon)?;
    let roots = match opts.backend {
        Backend::Auto | Backend::Oracle => solve_h32f_oracle(&eqs, opts.oracle_starts.unwrap_or(ORACLE_STARTS)),
        Backend::Template => {
            let t = opts
                .templates
                .as_ref()
                .and_then(|set| set.get(SolverId::H32f))
                .ok_or_else(|| Error::BackendUnavailable("no h32f template loaded".into()))?;
            let sys = PolySystem::new(&eqs);
            t.execute(&eqs)?
                .into_iter()
                .filter_map(|s| {
                    let mut x = [s[0], s[1], s[2]];
                    sys.polish(&mut x, 4);
                    (sys.relative_residual(&x) <= ROOT_TOL).then_some(x)
                })
                .collect()
        }
    };
    let mut poses: Vec<PoseWithFocal> = Vec::new();
    for x in roots {
        let Some(p) = pose_from_quaternion(&canon, &x) else { continue };
        let p = uncanonicalize(&canon.frame, &p);
        if max_relative_residual(corrs, &p) > 1e-6 {
            continue;
        }
        if !poses.iter().any(|q| same_pose(q, &p)) {
            poses.push(p);
        }
    }
    Ok(poses)
}

/// The 2D-3D matches in canonical coordinates, used by tests.
pub fn canonical_threed(canon: &CanonicalH32f) -> [Corr2D3D; 2] {
    [
        Corr2D3D {
            p: Vec3::new(1.0, 0.0, 1.0),
            x: Vec3::zeros(),
        },
        Corr2D3D {
            p: Vec3::new(canon.x4, canon.y4, 1.0),
            x: Vec3::z(),
        },
    ]
}
