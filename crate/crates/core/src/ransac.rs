//! Hybrid LO-RANSAC over mixed 2D-2D / 2D-3D correspondences.
//!
//! Each iteration picks a minimal solver by its weight, samples that
//! solver's minimal set, solves, keeps the cheirality-consistent candidates
//! and scores them with a truncated quadratic (MSAC) over both kinds of
//! correspondence. New best models are refined by a Levenberg-Marquardt
//! local optimization of the combined reprojection and Sampson cost.
//!
//! Hypotheses are generated in fixed-size batches: samples are drawn
//! sequentially from the seeded generator, solved in parallel, and reduced
//! in sample order. The result therefore depends only on the inputs, the
//! configuration and the seed, never on the number of worker threads.

use nalgebra::{DMatrix, DVector, Vector2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    recover_depths, rotation_exp, Corr2D2D, Corr2D3D, HybridCorrespondences, PoseWithFocal, Vec3,
};
use crate::solver::{solve, SolverId, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    pub max_iterations: usize,
    pub confidence: f64,
    /// Inlier threshold on the 2D-3D reprojection error, in pixels.
    pub reproj_px: f64,
    /// Inlier threshold on the 2D-2D Sampson distance, in pixels.
    pub sampson_px: f64,
    /// Sampling probability of each solver; the weights sum to one.
    pub solver_weights: Vec<(SolverId, f64)>,
    pub lo_enabled: bool,
    pub lo_max_iters: usize,
    pub seed: u64,
    /// Hypotheses generated per batch. Batches are the unit of parallel
    /// work and of the stopping test.
    pub batch_size: usize,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            confidence: 0.999,
            reproj_px: 2.0,
            sampson_px: 2.0,
            solver_weights: Self::uniform_weights(&[SolverId::H13f, SolverId::H32f, SolverId::H51f5]),
            lo_enabled: true,
            lo_max_iters: 25,
            seed: 0,
            batch_size: 8,
        }
    }
}

impl RansacConfig {
    pub fn uniform_weights(solvers: &[SolverId]) -> Vec<(SolverId, f64)> {
        let w = 1.0 / solvers.len().max(1) as f64;
        solvers.iter().map(|&s| (s, w)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let weight_sum: f64 = self.solver_weights.iter().map(|w| w.1).sum();
        if !(self.reproj_px > 0.0 && self.sampson_px > 0.0) {
            return Err(Error::Config("inlier thresholds must be positive".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config("confidence must lie in (0, 1)".into()));
        }
        if self.solver_weights.is_empty()
            || self.solver_weights.iter().any(|w| !(w.1 >= 0.0) || !w.1.is_finite())
            || (weight_sum - 1.0).abs() > 1e-9
        {
            return Err(Error::Config("solver weights must be nonnegative and sum to 1".into()));
        }
        if self.max_iterations == 0 || self.batch_size == 0 {
            return Err(Error::Config("iteration cap and batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Cost of the local optimization before and after one call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoRecord {
    pub cost_before: f64,
    pub cost_after: f64,
    pub iterations: usize,
    /// False when the refinement stopped without meeting a convergence test.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RansacResult {
    pub pose: PoseWithFocal,
    pub inliers_2d2d: Vec<bool>,
    pub inliers_2d3d: Vec<bool>,
    pub score: f64,
    pub iterations: usize,
    pub solver: SolverId,
    pub lo: Vec<LoRecord>,
    pub confidence: f64,
    pub max_iterations: usize,
}

impl RansacResult {
    pub fn num_inliers(&self) -> usize {
        self.inliers_2d2d.iter().chain(&self.inliers_2d3d).filter(|b| **b).count()
    }
}

/// Pixel reprojection error of a 2D-3D match; infinite behind the camera.
pub fn reprojection_error(c: &Corr2D3D, pose: &PoseWithFocal) -> f64 {
    let (px, depth) = pose.project(&c.x);
    if !(depth > 0.0) {
        return f64::INFINITY;
    }
    (px - c.p.xy()).norm()
}

/// Epipolar line `l` in the query image with `p^T l` the generalized
/// epipolar residual.
fn epipolar_line(c: &Corr2D2D, pose: &PoseWithFocal) -> Vec3 {
    let k = pose.calibration();
    let kr = k * pose.rotation;
    (kr * c.q).cross(&(kr * c.tg + k * pose.translation))
}

/// Signed first-order distance of the image point to its generalized
/// epipolar line, in pixels.
fn signed_sampson(c: &Corr2D2D, pose: &PoseWithFocal) -> f64 {
    let l = epipolar_line(c, pose);
    let g = l.x.hypot(l.y);
    if g == 0.0 {
        return f64::INFINITY;
    }
    c.p.dot(&l) / g
}

/// Sampson distance of a 2D-2D match: the epipolar residual divided by its
/// gradient with respect to the query image point.
pub fn sampson_error(c: &Corr2D2D, pose: &PoseWithFocal) -> f64 {
    signed_sampson(c, pose).abs()
}

/// Inlier masks of both correspondence kinds.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InlierMasks {
    pub twod: Vec<bool>,
    pub threed: Vec<bool>,
}

impl InlierMasks {
    pub fn count(&self) -> usize {
        self.twod.iter().chain(&self.threed).filter(|b| **b).count()
    }
}

/// MSAC score, the sum of `1 - e^2 / tau^2` over correspondences with error
/// `e` below their threshold `tau`, and the inlier masks.
pub fn score_model(pose: &PoseWithFocal, corrs: &HybridCorrespondences, config: &RansacConfig) -> (f64, InlierMasks) {
    let mut score = 0.0;
    let mut term = |e: f64, tau: f64| -> bool {
        if e <= tau {
            score += 1.0 - (e / tau).powi(2);
            true
        } else {
            false
        }
    };
    let twod = corrs
        .twod
        .iter()
        .map(|c| term(sampson_error(c, pose), config.sampson_px))
        .collect();
    let threed = corrs
        .threed
        .iter()
        .map(|c| term(reprojection_error(c, pose), config.reproj_px))
        .collect();
    (score, InlierMasks { twod, threed })
}

/// Residual vector of the local optimization: two reprojection components
/// per 2D-3D inlier and one signed Sampson distance per 2D-2D inlier.
fn lo_residuals(pose: &PoseWithFocal, corrs: &HybridCorrespondences, masks: &InlierMasks) -> DVector<f64> {
    let mut r = Vec::new();
    for (c, _) in corrs.threed.iter().zip(&masks.threed).filter(|x| *x.1) {
        let (px, _) = pose.project(&c.x);
        let d: Vector2<f64> = px - c.p.xy();
        r.extend([d.x, d.y]);
    }
    for (c, _) in corrs.twod.iter().zip(&masks.twod).filter(|x| *x.1) {
        r.push(signed_sampson(c, pose));
    }
    DVector::from_vec(r)
}

/// Combined cost minimized by [`local_optimize`].
pub fn lo_cost(pose: &PoseWithFocal, corrs: &HybridCorrespondences, masks: &InlierMasks) -> f64 {
    let r = lo_residuals(pose, corrs, masks);
    if r.iter().all(|v| v.is_finite()) {
        r.norm_squared()
    } else {
        f64::INFINITY
    }
}

/// Local update: rotation increment, translation increment, log focal
/// increment.
fn perturb(pose: &PoseWithFocal, d: &[f64]) -> PoseWithFocal {
    let w = Vec3::new(d[0], d[1], d[2]);
    PoseWithFocal::new(
        rotation_exp(&w) * pose.rotation,
        pose.translation + Vec3::new(d[3], d[4], d[5]),
        pose.focal * d[6].exp(),
    )
}

const LO_PARAMS: usize = 7;
/// Refine-and-rescore rounds per new best model.
const LO_ROUNDS: usize = 4;
/// Threshold multiplier for the correspondences fed to the local
/// optimization. Scoring always uses the configured thresholds.
const LO_THRESHOLD_FACTOR: f64 = 3.0;
const LO_GRADIENT_TOL: f64 = 1e-10;

/// Levenberg-Marquardt refinement of `(R, t, f)` on the inliers in `masks`.
/// Only steps that lower the cost are taken, so the returned pose never
/// costs more than the input.
pub fn local_optimize(
    pose: &PoseWithFocal,
    corrs: &HybridCorrespondences,
    masks: &InlierMasks,
    config: &RansacConfig,
) -> (PoseWithFocal, LoRecord) {
    let start_cost = lo_cost(pose, corrs, masks);
    let constraints = 2 * masks.threed.iter().filter(|b| **b).count() + masks.twod.iter().filter(|b| **b).count();
    let mut record = LoRecord {
        cost_before: start_cost,
        cost_after: start_cost,
        iterations: 0,
        converged: false,
    };
    if constraints < LO_PARAMS || !start_cost.is_finite() {
        return (pose.clone(), record);
    }
    let mut current = PoseWithFocal::new(pose.rotation, pose.translation, pose.focal);
    let mut cost = start_cost;
    let mut lambda = 1e-3;
    let tscale = 1.0 + pose.translation.norm();
    let steps = [1e-6, 1e-6, 1e-6, 1e-6 * tscale, 1e-6 * tscale, 1e-6 * tscale, 1e-6];
    for it in 0..config.lo_max_iters {
        record.iterations = it + 1;
        let r = lo_residuals(&current, corrs, masks);
        let mut jac = DMatrix::zeros(r.len(), LO_PARAMS);
        for (k, &h) in steps.iter().enumerate() {
            let mut d = [0.0; LO_PARAMS];
            d[k] = h;
            let plus = lo_residuals(&perturb(&current, &d), corrs, masks);
            d[k] = -h;
            let minus = lo_residuals(&perturb(&current, &d), corrs, masks);
            jac.set_column(k, &((plus - minus) / (2.0 * h)));
        }
        let jt = jac.transpose();
        let g = &jt * &r;
        if g.norm() < LO_GRADIENT_TOL {
            record.converged = true;
            break;
        }
        let jtj = &jt * &jac;
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for i in 0..LO_PARAMS {
                a[(i, i)] += lambda * (1.0 + jtj[(i, i)]);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = perturb(&current, step.as_slice());
            let c = lo_cost(&candidate, corrs, masks);
            if c < cost {
                let small = cost - c <= 1e-15 * cost;
                current = candidate;
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if small {
                    record.converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            record.converged = true;
            break;
        }
        if record.converged {
            break;
        }
    }
    record.cost_after = cost;
    (current, record)
}

/// Indices of a minimal sample for `id`, or `None` when the pool cannot
/// provide one.
fn draw_sample(
    id: SolverId,
    corrs: &HybridCorrespondences,
    cams: &[(usize, Vec<usize>)],
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<usize>, Vec<usize>)> {
    let req = id.requirement();
    if corrs.threed.len() < req.threed || corrs.twod.len() < req.twod {
        return None;
    }
    let twod = if req.same_camera && req.twod > 0 {
        let eligible: Vec<&Vec<usize>> = cams.iter().filter(|c| c.1.len() >= req.twod).map(|c| &c.1).collect();
        if eligible.is_empty() {
            return None;
        }
        let pool = eligible[rng.gen_range(0..eligible.len())];
        sample(rng, pool.len(), req.twod).iter().map(|i| pool[i]).collect()
    } else {
        sample(rng, corrs.twod.len(), req.twod).into_vec()
    };
    let threed = sample(rng, corrs.threed.len(), req.threed).into_vec();
    Some((twod, threed))
}

struct Hypothesis {
    solver: SolverId,
    candidates: Vec<PoseWithFocal>,
}

fn hypothesize(
    solver: SolverId,
    idx: &(Vec<usize>, Vec<usize>),
    corrs: &HybridCorrespondences,
    opts: &SolverOptions,
) -> Hypothesis {
    let minimal = HybridCorrespondences::new(
        idx.0.iter().map(|&i| corrs.twod[i]).collect(),
        idx.1.iter().map(|&i| corrs.threed[i]).collect(),
    );
    let candidates = solve(solver, &minimal, opts)
        .unwrap_or_default()
        .into_iter()
        .filter(|p| p.focal > 0.0 && recover_depths(&minimal, p).cheirality_ok())
        .collect();
    Hypothesis { solver, candidates }
}

/// Iterations needed to draw one all-inlier sample with the configured
/// confidence, for the current inlier ratios of both correspondence kinds.
fn required_iterations(config: &RansacConfig, ratio2: f64, ratio3: f64) -> usize {
    let p: f64 = config
        .solver_weights
        .iter()
        .map(|(s, w)| {
            let r = s.requirement();
            w * ratio2.powi(r.twod as i32) * ratio3.powi(r.threed as i32)
        })
        .sum();
    if p >= 1.0 {
        return 1;
    }
    if p <= 0.0 {
        return config.max_iterations;
    }
    let n = (1.0 - config.confidence).ln() / (1.0 - p).ln();
    if n.is_finite() {
        (n.ceil() as usize).clamp(1, config.max_iterations)
    } else {
        config.max_iterations
    }
}

fn loose_config(config: &RansacConfig) -> RansacConfig {
    RansacConfig {
        reproj_px: config.reproj_px * LO_THRESHOLD_FACTOR,
        sampson_px: config.sampson_px * LO_THRESHOLD_FACTOR,
        ..config.clone()
    }
}

/// Runs hybrid RANSAC. Solvers whose sample cannot be drawn from `corrs`
/// are skipped; if none remains the call fails with a configuration error.
pub fn run_ransac(corrs: &HybridCorrespondences, config: &RansacConfig, opts: &SolverOptions) -> Result<RansacResult> {
    config.validate()?;
    corrs.validate()?;
    let mut cams: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, c) in corrs.twod.iter().enumerate() {
        match cams.iter_mut().find(|e| e.0 == c.cam_index) {
            Some(e) => e.1.push(i),
            None => cams.push((c.cam_index, vec![i])),
        }
    }
    cams.sort_by_key(|e| e.0);
    let usable: Vec<(SolverId, f64)> = config
        .solver_weights
        .iter()
        .copied()
        .filter(|(s, w)| *w > 0.0 && s.requirement().satisfiable(corrs))
        .collect();
    if usable.is_empty() {
        return Err(Error::Config(
            "no solver can draw a minimal sample from the given correspondences".into(),
        ));
    }
    let total: f64 = usable.iter().map(|u| u.1).sum();
    let mut effective = config.clone();
    effective.solver_weights = usable.iter().map(|&(s, w)| (s, w / total)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(f64, PoseWithFocal, InlierMasks, SolverId)> = None;
    let mut lo = Vec::new();
    let mut iterations = 0;
    let mut needed = config.max_iterations;
    while iterations < needed {
        let batch = config.batch_size.min(needed - iterations);
        let samples: Vec<(SolverId, Option<(Vec<usize>, Vec<usize>)>)> = (0..batch)
            .map(|_| {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut solver = effective.solver_weights.last().expect("nonempty").0;
                for &(s, w) in &effective.solver_weights {
                    acc += w;
                    if u < acc {
                        solver = s;
                        break;
                    }
                }
                (solver, draw_sample(solver, corrs, &cams, &mut rng))
            })
            .collect();
        let hyps: Vec<Hypothesis> = samples
            .par_iter()
            .map(|(s, idx)| match idx {
                Some(idx) => hypothesize(*s, idx, corrs, opts),
                None => Hypothesis {
                    solver: *s,
                    candidates: Vec::new(),
                },
            })
            .collect();
        iterations += batch;
        for h in hyps {
            for cand in h.candidates {
                let (score, masks) = score_model(&cand, corrs, config);
                if best.as_ref().is_some_and(|b| score <= b.0) {
                    continue;
                }
                let (mut pose, mut s, mut m) = (cand, score, masks);
                if config.lo_enabled {
                    // Refine on the current inliers and rescore until the
                    // score stops improving.
                    let loose = loose_config(config);
                    for _ in 0..LO_ROUNDS {
                        let (_, wide) = score_model(&pose, corrs, &loose);
                        let (refined, rec) = local_optimize(&pose, corrs, &wide, config);
                        lo.push(rec);
                        let (rs, rm) = score_model(&refined, corrs, config);
                        if rs <= s {
                            break;
                        }
                        pose = refined;
                        s = rs;
                        m = rm;
                    }
                }
                best = Some((s, pose, m, h.solver));
            }
        }
        if let Some((_, _, m, _)) = &best {
            let ratio = |v: &[bool]| {
                if v.is_empty() {
                    1.0
                } else {
                    v.iter().filter(|b| **b).count() as f64 / v.len() as f64
                }
            };
            needed = required_iterations(&effective, ratio(&m.twod), ratio(&m.threed)).max(iterations.min(needed));
        }
    }
    let (mut score, mut pose, mut masks, solver) =
        best.ok_or_else(|| Error::DegenerateConfiguration("no sample produced a valid model".into()))?;
    if config.lo_enabled {
        // Final least-squares polish of the best model on its loose inlier
        // set, repeated until that set stops changing.
        let loose = loose_config(config);
        let (_, mut wide) = score_model(&pose, corrs, &loose);
        for _ in 0..LO_ROUNDS {
            let (refined, rec) = local_optimize(&pose, corrs, &wide, config);
            lo.push(rec);
            pose = refined;
            let (_, next) = score_model(&pose, corrs, &loose);
            if next == wide {
                break;
            }
            wide = next;
        }
        (score, masks) = score_model(&pose, corrs, config);
    }
    Ok(RansacResult {
        pose: PoseWithFocal::new(pose.rotation, pose.translation, pose.focal),
        inliers_2d2d: masks.twod,
        inliers_2d3d: masks.threed,
        score,
        iterations,
        solver,
        lo,
        confidence: config.confidence,
        max_iterations: config.max_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_noisy_scene, SceneConfig};

    fn scene(outliers: f64, noise: f64, index: usize) -> crate::synth::SceneInstance {
        let cfg = SceneConfig {
            matches_2d2d_per_cam: 12,
            matches_2d3d: 40,
            outlier_ratio: outliers,
            noise_2d_px: noise,
            seed: 11,
            ..SceneConfig::default()
        };
        generate_noisy_scene(&cfg, index).unwrap()
    }

    #[test]
    fn ground_truth_scores_every_clean_match() {
        let s = scene(0.0, 0.0, 0);
        let (score, masks) = score_model(&s.pose, &s.clean, &RansacConfig::default());
        assert_eq!(masks.count(), s.clean.len());
        assert!((score - s.clean.len() as f64).abs() < 1e-6);
    }

    #[test]
    fn doubled_focal_shrinks_the_inlier_set() {
        let s = scene(0.0, 0.0, 1);
        let mut p = s.pose.clone();
        p.focal *= 2.0;
        let cfg = RansacConfig::default();
        let (_, m0) = score_model(&s.pose, &s.clean, &cfg);
        let (_, m1) = score_model(&p, &s.clean, &cfg);
        assert!(m1.threed.iter().filter(|b| **b).count() < m0.threed.iter().filter(|b| **b).count());
    }

    #[test]
    fn large_reprojection_error_is_an_outlier() {
        let s = scene(0.0, 0.0, 2);
        let mut c = s.clean.clone();
        c.threed[0].p.x += 100.0;
        let (_, m) = score_model(&s.pose, &c, &RansacConfig::default());
        assert!(!m.threed[0]);
        assert!(m.threed[1..].iter().all(|b| *b));
    }

    #[test]
    fn lo_is_stationary_at_ground_truth() {
        let s = scene(0.0, 0.0, 3);
        let cfg = RansacConfig::default();
        let (_, m) = score_model(&s.pose, &s.clean, &cfg);
        let (p, rec) = local_optimize(&s.pose, &s.clean, &m, &cfg);
        assert!(rec.cost_after <= rec.cost_before);
        assert!(crate::geometry::rotation_error_deg(&p.rotation, &s.pose.rotation) < 1e-9);
    }

    #[test]
    fn lo_recovers_a_perturbed_pose() {
        let s = scene(0.0, 0.0, 4);
        let cfg = RansacConfig {
            lo_max_iters: 100,
            ..RansacConfig::default()
        };
        let (_, m) = score_model(&s.pose, &s.clean, &cfg);
        let start = PoseWithFocal::new(
            rotation_exp(&Vec3::new(0.5f64.to_radians(), 0.0, 0.0)) * s.pose.rotation,
            s.pose.translation,
            s.pose.focal * 1.01,
        );
        let (p, rec) = local_optimize(&start, &s.clean, &m, &cfg);
        assert!(rec.cost_after <= rec.cost_before);
        assert!(crate::geometry::rotation_error_deg(&p.rotation, &s.pose.rotation) < 1e-6);
        assert!(crate::geometry::focal_rel_error(p.focal, s.pose.focal) < 1e-6);
    }

    #[test]
    fn outlier_free_data_gives_all_inliers() {
        let s = scene(0.0, 0.0, 5);
        let cfg = RansacConfig {
            solver_weights: RansacConfig::uniform_weights(&[SolverId::H51f5]),
            ..RansacConfig::default()
        };
        let r = run_ransac(&s.noisy, &cfg, &SolverOptions::default()).unwrap();
        assert_eq!(r.num_inliers(), s.noisy.len());
    }

    #[test]
    fn weights_must_sum_to_one() {
        let cfg = RansacConfig {
            solver_weights: vec![(SolverId::H13f, 0.5)],
            ..RansacConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unsatisfiable_pool_is_a_configuration_error() {
        let s = scene(0.0, 0.0, 6);
        let corrs = HybridCorrespondences::new(Vec::new(), s.noisy.threed[..2].to_vec());
        let cfg = RansacConfig {
            solver_weights: RansacConfig::uniform_weights(&[SolverId::H13f]),
            ..RansacConfig::default()
        };
        assert!(matches!(
            run_ransac(&corrs, &cfg, &SolverOptions::default()),
            Err(Error::Config(_))
        ));
    }
}
