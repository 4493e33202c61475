//! End-to-end checks of the minimal solvers and the linear baseline on
//! synthetic scenes with known ground truth.

use nalgebra::Vector2;
use semigen::geometry::{
    focal_rel_error, max_relative_residual, recover_depths, rotation_error_deg, rotation_exp, translation_error,
    Mat3, Vec3,
};
use semigen::h13f::canonicalize_h13f;
use semigen::h32f::canonicalize_h32f;
use semigen::h51f5::{decompose_to_pose, project_3d_to_sixth_match, recover_scale, solve_onesided_focal_6pt};
use semigen::synth::{generate_scene, minimal_sample, SceneConfig, SceneInstance};
use semigen::{
    solve, Backend, Corr2D2D, Corr2D3D, Error, HybridCorrespondences, PinholeCamera, PoseWithFocal, SolverId,
    SolverOptions,
};

fn scene(index: usize) -> SceneInstance {
    generate_scene(&SceneConfig::default(), index).unwrap()
}

fn closest(poses: &[PoseWithFocal], truth: &PoseWithFocal) -> Option<(f64, f64, f64)> {
    poses
        .iter()
        .map(|p| {
            (
                rotation_error_deg(&p.rotation, &truth.rotation),
                translation_error(&p.translation, &truth.translation),
                focal_rel_error(p.focal, truth.focal),
            )
        })
        .min_by(|a, b| (a.0 + a.2).total_cmp(&(b.0 + b.2)))
}

fn assert_recovers(id: SolverId, opts: &SolverOptions, scenes: usize, min_hits: usize) {
    let mut hits = 0;
    for i in 0..scenes {
        let s = scene(i);
        let sample = minimal_sample(&s, id, false).unwrap();
        let poses = solve(id, &sample, opts).unwrap();
        for p in &poses {
            assert!(max_relative_residual(&sample, p) <= 1e-6, "{id} scene {i}");
        }
        if let Some((r, t, f)) = closest(&poses, &s.pose) {
            if r <= 1e-6 && f <= 1e-6 && t <= 1e-6 * s.pose.translation.norm() {
                hits += 1;
            }
        }
    }
    assert!(hits >= min_hits, "{id}: ground truth recovered in {hits}/{scenes}");
}

#[test]
fn h51f5_recovers_ground_truth() {
    assert_recovers(SolverId::H51f5, &SolverOptions::default(), 50, 50);
}

#[test]
fn h13f_recovers_ground_truth() {
    assert_recovers(SolverId::H13f, &SolverOptions::default(), 30, 30);
}

#[test]
fn h13f_oracle_recovers_ground_truth() {
    assert_recovers(SolverId::H13f, &SolverOptions::with_backend(Backend::Oracle), 10, 10);
}

#[test]
fn h32f_recovers_ground_truth_in_most_scenes() {
    assert_recovers(SolverId::H32f, &SolverOptions::default(), 30, 25);
}

#[test]
fn dlt_baseline_is_exact_on_clean_data() {
    assert_recovers(SolverId::DltAp, &SolverOptions::default(), 30, 30);
}

#[test]
fn h51f5_with_focal_1000_returns_it() {
    let cfg = SceneConfig {
        focal_range: (1000.0, 1000.0),
        ..SceneConfig::default()
    };
    let s = generate_scene(&cfg, 2).unwrap();
    let sample = minimal_sample(&s, SolverId::H51f5, false).unwrap();
    let poses = solve(SolverId::H51f5, &sample, &SolverOptions::default()).unwrap();
    let hits = poses.iter().filter(|p| (p.focal - 1000.0).abs() / 1000.0 <= 1e-6).count();
    assert_eq!(hits, 1, "{poses:?}");
}

#[test]
fn solution_counts_stay_within_generic_bounds() {
    let opts = SolverOptions::default();
    for i in 0..40 {
        let s = scene(100 + i);
        for (id, bound) in [(SolverId::H51f5, 9), (SolverId::H13f, 12), (SolverId::H32f, 26)] {
            let sample = minimal_sample(&s, id, false).unwrap();
            let n = solve(id, &sample, &opts).map(|v| v.len()).unwrap_or(0);
            assert!(n <= bound, "{id}: {n} solutions");
        }
    }
}

#[test]
fn wrong_sample_shape_names_the_requirement() {
    let s = scene(0);
    let sample = minimal_sample(&s, SolverId::H51f5, false).unwrap();
    let err = solve(SolverId::H13f, &sample, &SolverOptions::default()).unwrap_err();
    assert!(matches!(err, Error::WrongConfiguration { .. }));
    assert!(err.to_string().contains("1 2D-2D"), "{err}");
}

/// A rig camera and a query camera sharing one centre: every 2D-2D match
/// has zero baseline.
fn pure_rotation_sample() -> HybridCorrespondences {
    let centre = Vec3::new(0.0, 0.0, -20.0);
    let rig_cam = PinholeCamera::new(Mat3::identity(), centre, 900.0);
    let rotation = rotation_exp(&Vec3::new(0.05, -0.1, 0.02));
    let pose = PoseWithFocal::new(rotation, -rotation * centre, 1000.0);
    let points = [
        Vec3::new(1.0, 2.0, 0.5),
        Vec3::new(-3.0, 1.0, 2.0),
        Vec3::new(2.0, -2.5, -1.0),
        Vec3::new(-1.5, -1.0, 3.0),
        Vec3::new(3.5, 0.5, -2.0),
        Vec3::new(0.5, 3.0, 1.0),
    ];
    let twod = points[..5]
        .iter()
        .map(|x| Corr2D2D::new(pose.project(x).0, x - centre, rig_cam.translation, 0))
        .collect();
    let threed = vec![Corr2D3D::new(pose.project(&points[5]).0, points[5])];
    HybridCorrespondences::new(twod, threed)
}

#[test]
fn h51f5_pure_rotation_is_degenerate() {
    let err = solve(SolverId::H51f5, &pure_rotation_sample(), &SolverOptions::default()).unwrap_err();
    assert!(err.is_degeneracy(), "{err}");
}

#[test]
fn h13f_collinear_points_are_degenerate() {
    let s = scene(1);
    let mut sample = minimal_sample(&s, SolverId::H13f, false).unwrap();
    let (a, b) = (sample.threed[0].x, sample.threed[1].x);
    sample.threed[2].x = a + (b - a) * 2.5;
    let err = solve(SolverId::H13f, &sample, &SolverOptions::default()).unwrap_err();
    assert!(err.is_degeneracy(), "{err}");
    assert!(canonicalize_h13f(&sample, &SolverOptions::default()).is_err());
}

#[test]
fn h13f_coincident_points_are_rejected() {
    let s = scene(1);
    let mut sample = minimal_sample(&s, SolverId::H13f, false).unwrap();
    sample.threed[1] = sample.threed[0];
    assert!(solve(SolverId::H13f, &sample, &SolverOptions::default()).is_err());
}

#[test]
fn h13f_canonical_points_lie_on_the_plane() {
    for i in 0..10 {
        let s = scene(i);
        let sample = minimal_sample(&s, SolverId::H13f, false).unwrap();
        let canon = canonicalize_h13f(&sample, &SolverOptions::default()).unwrap();
        let z = canon.threed[0].x.z;
        for c in &canon.threed {
            assert!((c.x.z - z).abs() <= 1e-12 * (1.0 + z.abs()), "scene {i}");
        }
        assert!(canon.twod.tg.norm() <= 1e-12);
        assert!(canon.twod.q.y.abs() <= 1e-12 * canon.twod.q.norm());
    }
}

#[test]
fn h32f_coincident_points_are_rejected() {
    let s = scene(3);
    let mut sample = minimal_sample(&s, SolverId::H32f, false).unwrap();
    sample.threed[1] = sample.threed[0];
    assert!(canonicalize_h32f(&sample).is_err());
    assert!(solve(SolverId::H32f, &sample, &SolverOptions::default()).is_err());
}

#[test]
fn h32f_canonical_gauge_places_the_points() {
    for i in 0..10 {
        let s = scene(i);
        let sample = minimal_sample(&s, SolverId::H32f, false).unwrap();
        let canon = canonicalize_h32f(&sample).unwrap();
        let three = semigen::h32f::canonical_threed(&canon);
        assert!(three[0].x.norm() <= 1e-12);
        assert!((three[1].x - Vec3::new(0.0, 0.0, 1.0)).norm() <= 1e-12);
    }
}

#[test]
fn h32f_is_independent_of_the_camera_grouping() {
    // The same three rays regrouped as one, two or three rig cameras.
    let s = scene(5);
    let sample = minimal_sample(&s, SolverId::H32f, false).unwrap();
    let opts = SolverOptions::default();
    let reference = solve(SolverId::H32f, &sample, &opts).unwrap();
    for grouping in [[0, 0, 0], [0, 0, 1], [0, 1, 2]] {
        let mut regrouped = sample.clone();
        for (c, g) in regrouped.twod.iter_mut().zip(grouping) {
            c.cam_index = g;
        }
        let poses = solve(SolverId::H32f, &regrouped, &opts).unwrap();
        assert_eq!(poses.len(), reference.len());
        for p in &poses {
            let (r, _, f) = closest(&reference, p).unwrap();
            assert!(r <= 1e-6 && f <= 1e-6);
        }
    }
}

#[test]
fn projected_sixth_match_follows_the_axis() {
    let cam = PinholeCamera::new(rotation_exp(&Vec3::new(0.3, -0.2, 0.1)), Vec3::new(1.0, 2.0, 3.0), 800.0);
    let axis = cam.rotation * Vec3::z();
    let on_axis = Corr2D3D::new(Vector2::zeros(), cam.translation + axis * 7.0);
    let m = project_3d_to_sixth_match(&on_axis, &cam, 0).unwrap();
    assert!(m.corr.q.normalize().cross(&axis).norm() <= 1e-12);
    assert!(!m.behind);
    let behind = Corr2D3D::new(Vector2::zeros(), cam.translation - axis * 7.0 + cam.rotation * Vec3::x());
    assert!(project_3d_to_sixth_match(&behind, &cam, 0).unwrap().behind);
}

#[test]
fn projected_sixth_match_satisfies_the_epipolar_residual() {
    let s = scene(7);
    let cam = &s.rig.cameras[0];
    for c in &s.clean.threed {
        let m = project_3d_to_sixth_match(c, cam, 0).unwrap();
        let corrs = HybridCorrespondences::new(vec![m.corr], vec![]);
        assert!(max_relative_residual(&corrs, &s.pose) <= 1e-9);
    }
}

#[test]
fn essential_sign_does_not_change_the_decomposition() {
    let s = scene(8);
    let sample = minimal_sample(&s, SolverId::H51f5, false).unwrap();
    let mut six = sample.twod.clone();
    let m = project_3d_to_sixth_match(&sample.threed[0], &s.rig.cameras[0], 0).unwrap();
    six.push(m.corr);
    for (fm, f) in solve_onesided_focal_6pt(&six, &SolverOptions::default()).unwrap() {
        let a = decompose_to_pose(&fm, f, &six);
        let b = decompose_to_pose(&(-fm), f, &six);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!(rotation_error_deg(&x.rotation, &y.rotation) <= 1e-9);
            assert!((x.translation - y.translation).norm() <= 1e-9);
        }
    }
}

#[test]
fn scale_recovery_matches_the_baseline() {
    let s = scene(9);
    let tg = s.rig.cameras[0].translation;
    // Direction from the query camera to rig camera 0 in the query frame.
    let c_dir = s.pose.rotation * tg + s.pose.translation;
    let baseline = c_dir.norm();
    let dir_pose = PoseWithFocal::new(s.pose.rotation, c_dir / baseline, s.pose.focal);
    let c3d = s.clean.threed[0];
    let sp = recover_scale(&dir_pose, &c3d, &tg).unwrap();
    assert!((sp.scale - baseline).abs() <= 1e-8 * baseline);
    assert!(sp.cheirality_ok && !sp.ill_conditioned);
    assert!((sp.pose.translation - s.pose.translation).norm() <= 1e-8 * s.pose.translation.norm());

    let flipped = PoseWithFocal::new(s.pose.rotation, -c_dir / baseline, s.pose.focal);
    let sf = recover_scale(&flipped, &c3d, &tg).unwrap();
    assert!((sf.scale + baseline).abs() <= 1e-8 * baseline);
    assert!(!sf.cheirality_ok);

    let far = Corr2D3D {
        x: tg + (c3d.x - tg) * 1e12,
        ..c3d
    };
    let far_query = s.pose.project(&far.x).0;
    let far = Corr2D3D::new(far_query, far.x);
    assert!(recover_scale(&dir_pose, &far, &tg).map_or(true, |r| r.ill_conditioned));
}

#[test]
fn cheirality_separates_truth_from_its_mirror() {
    for i in 0..20 {
        let s = scene(200 + i);
        for id in [SolverId::H51f5, SolverId::H13f] {
            let sample = minimal_sample(&s, id, false).unwrap();
            let poses = solve(id, &sample, &SolverOptions::default()).unwrap();
            let truth = poses
                .iter()
                .find(|p| rotation_error_deg(&p.rotation, &s.pose.rotation) <= 1e-6)
                .unwrap_or_else(|| panic!("{id} scene {i}: truth missing"));
            assert!(recover_depths(&sample, truth).cheirality_ok(), "{id} scene {i}");
            let mirror = PoseWithFocal::new(truth.rotation, -truth.translation, truth.focal);
            assert!(!recover_depths(&sample, &mirror).cheirality_ok(), "{id} scene {i}");
        }
    }
}
