//! Synthetic scenes: a rig of look-at cameras around a cube of points and a
//! query camera with unknown focal length.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    Corr2D2D, Corr2D3D, DepthPair, GeneralizedCamera, HybridCorrespondences, Mat3, PinholeCamera, PoseDepths,
    PoseWithFocal, Vec3,
};

/// Placement of the query camera relative to the reference rig camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Motion {
    /// Independent look-at camera.
    Random,
    /// Rig camera 0 moved along its optical axis.
    Forward,
    /// Rig camera 0 moved along its image x axis.
    Sideways,
}

impl Motion {
    pub const ALL: [Motion; 3] = [Motion::Random, Motion::Forward, Motion::Sideways];

    pub fn name(&self) -> &'static str {
        match self {
            Motion::Random => "random",
            Motion::Forward => "forward",
            Motion::Sideways => "sideways",
        }
    }
}

impl std::str::FromStr for Motion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Motion::Random),
            "forward" => Ok(Motion::Forward),
            "sideways" => Ok(Motion::Sideways),
            other => Err(Error::InvalidInput(format!("unknown motion '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub num_scenes: usize,
    pub cube_side: f64,
    pub num_rig_cams: usize,
    pub distance_range: (f64, f64),
    pub image_size: (f64, f64),
    pub focal_range: (f64, f64),
    pub motion: Motion,
    /// Standard deviation of 3D point noise, in percent of the point depth
    /// in the query camera.
    pub noise_3d_pct: f64,
    pub noise_2d_px: f64,
    pub seed: u64,
    /// Query displacement for forward and sideways motion, as a fraction of
    /// the reference camera's distance to the origin.
    pub displacement_range: (f64, f64),
    pub matches_2d2d_per_cam: usize,
    pub matches_2d3d: usize,
    /// Fraction of correspondences replaced by random image points.
    pub outlier_ratio: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            num_scenes: 5000,
            cube_side: 10.0,
            num_rig_cams: 5,
            distance_range: (15.0, 25.0),
            image_size: (1000.0, 1000.0),
            focal_range: (800.0, 1500.0),
            motion: Motion::Random,
            noise_3d_pct: 0.0,
            noise_2d_px: 0.0,
            seed: 0,
            displacement_range: (0.1, 0.2),
            matches_2d2d_per_cam: 6,
            matches_2d3d: 8,
            outlier_ratio: 0.0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let (d0, d1) = self.distance_range;
        let (f0, f1) = self.focal_range;
        let ok = self.cube_side > 0.0
            && d0 > 0.0
            && d0 <= d1
            && f0 > 0.0
            && f0 <= f1
            && self.image_size.0 > 0.0
            && self.image_size.1 > 0.0
            && self.num_rig_cams > 0
            && self.noise_3d_pct >= 0.0
            && self.noise_2d_px >= 0.0
            && (0.0..1.0).contains(&self.outlier_ratio)
            && self.displacement_range.0 >= 0.0
            && self.displacement_range.0 <= self.displacement_range.1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("invalid scene configuration".into()))
        }
    }

    /// Image half extents: centred pixel coordinates lie within these.
    fn half_extent(&self) -> Vector2<f64> {
        Vector2::new(self.image_size.0 / 2.0, self.image_size.1 / 2.0)
    }
}

/// Ground truth inlier labels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InlierLabels {
    pub twod: Vec<bool>,
    pub threed: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneInstance {
    pub index: usize,
    pub pose: PoseWithFocal,
    pub rig: GeneralizedCamera,
    /// Exact correspondences; image points are centred on the principal point.
    pub clean: HybridCorrespondences,
    /// Observed correspondences (equal to `clean` until noise is added).
    pub noisy: HybridCorrespondences,
    /// True depths of the clean correspondences.
    pub depths: PoseDepths,
    /// Rig camera pixel of every 2D-2D match.
    pub rig_pixels: Vec<Vector2<f64>>,
    /// 3D point of every 2D-2D match.
    pub twod_points: Vec<Vec3>,
    pub inliers: Option<InlierLabels>,
}

fn scene_rng(seed: u64, index: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index as u64);
    rng
}

fn unit_vector(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

/// Camera-to-world rotation of a camera at `center` looking at the origin.
fn look_at(center: &Vec3, rng: &mut impl Rng) -> Mat3 {
    let z = -center.normalize();
    loop {
        let up = unit_vector(rng);
        let x = up.cross(&z);
        if x.norm() > 0.1 {
            let x = x.normalize();
            let y = z.cross(&x);
            return Mat3::from_columns(&[x, y, z]);
        }
    }
}

fn random_camera(cfg: &SceneConfig, rng: &mut impl Rng) -> PinholeCamera {
    let dist = rng.gen_range(cfg.distance_range.0..=cfg.distance_range.1);
    let center = unit_vector(rng) * dist;
    let rot = look_at(&center, rng);
    let f = rng.gen_range(cfg.focal_range.0..=cfg.focal_range.1);
    PinholeCamera::new(rot, center, f)
}

fn visible(cam: &PinholeCamera, x: &Vec3, half: &Vector2<f64>) -> Option<(Vector2<f64>, f64)> {
    let (px, depth) = cam.project(x);
    (depth > 1e-3 && px.x.abs() <= half.x && px.y.abs() <= half.y).then_some((px, depth))
}

/// Builds the clean scene with index `index`.
pub fn generate_scene(cfg: &SceneConfig, index: usize) -> Result<SceneInstance> {
    cfg.validate()?;
    let mut rng = scene_rng(cfg.seed, index, 1);
    let rig: Vec<PinholeCamera> = (0..cfg.num_rig_cams).map(|_| random_camera(cfg, &mut rng)).collect();
    let query = match cfg.motion {
        Motion::Random => random_camera(cfg, &mut rng),
        Motion::Forward | Motion::Sideways => {
            let base = rig[0];
            let frac = rng.gen_range(cfg.displacement_range.0..=cfg.displacement_range.1);
            let dist = base.translation.norm() * frac;
            let axis = if cfg.motion == Motion::Forward {
                base.rotation.column(2).into_owned()
            } else {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                base.rotation.column(0).into_owned() * sign
            };
            let f = rng.gen_range(cfg.focal_range.0..=cfg.focal_range.1);
            PinholeCamera::new(base.rotation, base.translation + axis * dist, f)
        }
    };
    let r = query.rotation.transpose();
    let pose = PoseWithFocal::new(r, -(r * query.translation), query.focal);
    let half = cfg.half_extent();
    let h = cfg.cube_side / 2.0;
    let sample_point = |rng: &mut ChaCha8Rng, cam: Option<&PinholeCamera>| -> Result<(Vec3, Vector2<f64>, f64, Option<(Vector2<f64>, f64)>)> {
        for _ in 0..1000 {
            let x = Vec3::new(rng.gen_range(-h..=h), rng.gen_range(-h..=h), rng.gen_range(-h..=h));
            let Some((px, depth)) = visible(&query, &x, &half) else {
                continue;
            };
            match cam {
                None => return Ok((x, px, depth, None)),
                Some(c) => {
                    if let Some(g) = visible(c, &x, &half) {
                        return Ok((x, px, depth, Some(g)));
                    }
                }
            }
        }
        Err(Error::Config("scene generation: no visible point after 1000 attempts".into()))
    };

    let mut twod = Vec::new();
    let mut depths2 = Vec::new();
    let mut rig_pixels = Vec::new();
    let mut twod_points = Vec::new();
    for (i, cam) in rig.iter().enumerate() {
        for _ in 0..cfg.matches_2d2d_per_cam {
            let (x, px, depth, g) = sample_point(&mut rng, Some(cam))?;
            let (g, beta) = g.expect("rig observation requested");
            let q = cam.rotation * Vec3::new(g.x / cam.focal, g.y / cam.focal, 1.0);
            twod.push(Corr2D2D::new(px, q, cam.translation, i));
            depths2.push(Some(DepthPair { alpha: depth, beta }));
            rig_pixels.push(g);
            twod_points.push(x);
        }
    }
    let mut threed = Vec::new();
    let mut depths3 = Vec::new();
    for _ in 0..cfg.matches_2d3d {
        let (x, px, depth, _) = sample_point(&mut rng, None)?;
        threed.push(Corr2D3D::new(px, x));
        depths3.push(Some(depth));
    }
    let clean = HybridCorrespondences::new(twod, threed);
    Ok(SceneInstance {
        index,
        pose,
        rig: GeneralizedCamera { cameras: rig },
        noisy: clean.clone(),
        clean,
        depths: PoseDepths {
            twod: depths2,
            threed: depths3,
        },
        rig_pixels,
        twod_points,
        inliers: None,
    })
}

/// Adds Gaussian noise (3D noise proportional to the depth in the query
/// camera, pixel noise on every image observation) and optional outliers.
/// The result depends only on the configuration seed and the scene index.
pub fn add_noise(scene: &SceneInstance, cfg: &SceneConfig) -> SceneInstance {
    let mut out = scene.clone();
    let mut rng = scene_rng(cfg.seed, scene.index, 2);
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
    let s2 = cfg.noise_2d_px;
    let frac = cfg.noise_3d_pct / 100.0;
    for (k, c) in out.noisy.threed.iter_mut().enumerate() {
        let depth = scene.pose.rotation.row(2).transpose().dot(&scene.clean.threed[k].x) + scene.pose.translation.z;
        let sigma = frac * depth.abs();
        let n = Vec3::new(gauss(&mut rng), gauss(&mut rng), gauss(&mut rng));
        let e = Vector2::new(gauss(&mut rng), gauss(&mut rng));
        c.x = scene.clean.threed[k].x + n * sigma;
        c.p = scene.clean.threed[k].p + (e * s2).push(0.0);
    }
    for (k, c) in out.noisy.twod.iter_mut().enumerate() {
        let e = Vector2::new(gauss(&mut rng), gauss(&mut rng));
        let eg = Vector2::new(gauss(&mut rng), gauss(&mut rng));
        let cam = &scene.rig.cameras[c.cam_index];
        let g = scene.rig_pixels[k] + eg * s2;
        c.p = scene.clean.twod[k].p + (e * s2).push(0.0);
        c.q = cam.rotation * Vec3::new(g.x / cam.focal, g.y / cam.focal, 1.0);
    }
    if cfg.outlier_ratio > 0.0 {
        let half = cfg.half_extent();
        let random_pixel = |rng: &mut ChaCha8Rng| {
            Vec3::new(rng.gen_range(-half.x..=half.x), rng.gen_range(-half.y..=half.y), 1.0)
        };
        let mut labels = InlierLabels {
            twod: vec![true; out.noisy.twod.len()],
            threed: vec![true; out.noisy.threed.len()],
        };
        let total = out.noisy.len();
        let n_out = (cfg.outlier_ratio * total as f64).round() as usize;
        let mut idx: Vec<usize> = (0..total).collect();
        for i in 0..n_out.min(total) {
            let j = rng.gen_range(i..total);
            idx.swap(i, j);
        }
        for &k in idx.iter().take(n_out) {
            let p = random_pixel(&mut rng);
            if k < out.noisy.twod.len() {
                out.noisy.twod[k].p = p;
                labels.twod[k] = false;
            } else {
                let j = k - out.noisy.twod.len();
                out.noisy.threed[j].p = p;
                labels.threed[j] = false;
            }
        }
        out.inliers = Some(labels);
    }
    out
}

/// Convenience for tests and the harness: a scene with noise applied.
pub fn generate_noisy_scene(cfg: &SceneConfig, index: usize) -> Result<SceneInstance> {
    Ok(add_noise(&generate_scene(cfg, index)?, cfg))
}

/// Draws the first valid minimal sample of a solver from a scene's observed
/// correspondences, deterministically: the first matches of rig camera 0,
/// a spread of cameras for multi-camera samples, and the first 3D points.
pub fn minimal_sample(scene: &SceneInstance, id: crate::solver::SolverId, observed: bool) -> Option<HybridCorrespondences> {
    use crate::solver::SolverId;
    let src = if observed { &scene.noisy } else { &scene.clean };
    let req = id.requirement();
    if src.threed.len() < req.threed {
        return None;
    }
    let threed: Vec<Corr2D3D> = src.threed[..req.threed].to_vec();
    let twod: Vec<Corr2D2D> = match id {
        SolverId::H51f5 => {
            let v: Vec<Corr2D2D> = src.twod.iter().filter(|c| c.cam_index == 0).take(5).copied().collect();
            if v.len() < 5 {
                return None;
            }
            v
        }
        _ => {
            // One match from each of the first cameras, in round-robin order.
            let ncam = scene.rig.cameras.len();
            let mut v = Vec::new();
            let mut used = vec![0usize; ncam];
            let mut cam = 0;
            let mut guard = 0;
            while v.len() < req.twod && guard < src.twod.len() * ncam + ncam {
                let found = src.twod.iter().filter(|c| c.cam_index == cam).nth(used[cam]);
                if let Some(c) = found {
                    v.push(*c);
                    used[cam] += 1;
                }
                cam = (cam + 1) % ncam;
                guard += 1;
            }
            if v.len() < req.twod {
                return None;
            }
            v
        }
    };
    Some(HybridCorrespondences::new(twod, threed))
}
