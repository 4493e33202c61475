//! JSON correspondence files and atomic file output.
//!
//! A correspondence file holds the calibrated rig, the hybrid matches and an
//! optional ground truth:
//!
//! ```json
//! {
//!   "rig": [{"R": [9 floats, row-major], "t": [x, y, z], "K": [fx, fy, cx, cy]}],
//!   "matches2d2d": [{"p": [x, y], "g": [x, y], "cam": 0}],
//!   "matches2d3d": [{"p": [x, y], "X": [x, y, z]}],
//!   "ground_truth": {"R": [9 floats], "t": [x, y, z], "f": 1000.0}
//! }
//! ```
//!
//! Rig rotations map camera to rig coordinates and `t` is the camera centre
//! in the rig frame. Rig pixels `g` are raw pixel coordinates of camera
//! `cam`. Query pixels `p` are measured from the query principal point.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    ray_from_pixel, Corr2D2D, Corr2D3D, GeneralizedCamera, HybridCorrespondences, Mat3, PinholeCamera,
    PoseWithFocal, Tolerances, Vec3,
};
use crate::synth::SceneInstance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigCameraEntry {
    #[serde(rename = "R")]
    pub rotation: [f64; 9],
    pub t: [f64; 3],
    #[serde(rename = "K")]
    pub intrinsics: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Match2D2DEntry {
    pub p: [f64; 2],
    pub g: [f64; 2],
    pub cam: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Match2D3DEntry {
    pub p: [f64; 2],
    #[serde(rename = "X")]
    pub x: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthEntry {
    #[serde(rename = "R")]
    pub rotation: [f64; 9],
    pub t: [f64; 3],
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrespondenceFile {
    pub rig: Vec<RigCameraEntry>,
    #[serde(default)]
    pub matches2d2d: Vec<Match2D2DEntry>,
    #[serde(default)]
    pub matches2d3d: Vec<Match2D3DEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruthEntry>,
}

fn mat_from_row_major(v: &[f64; 9]) -> Mat3 {
    Mat3::from_row_slice(v)
}

fn mat_to_row_major(m: &Mat3) -> [f64; 9] {
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[3 * r + c] = m[(r, c)];
        }
    }
    out
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} contains a non-finite value")))
    }
}

impl CorrespondenceFile {
    /// Parses and validates a correspondence document.
    pub fn parse(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("malformed JSON: {e}")))?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Checks finiteness, camera indices and rig camera validity.
    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.rig.iter().enumerate() {
            check_finite(&c.rotation, &format!("rig camera {i} R"))?;
            check_finite(&c.t, &format!("rig camera {i} t"))?;
            check_finite(&c.intrinsics, &format!("rig camera {i} K"))?;
        }
        for (i, m) in self.matches2d2d.iter().enumerate() {
            check_finite(&m.p, &format!("2D-2D match {i} p"))?;
            check_finite(&m.g, &format!("2D-2D match {i} g"))?;
            if m.cam >= self.rig.len() {
                return Err(Error::InvalidInput(format!(
                    "2D-2D match {i} refers to camera {} but the rig has {}",
                    m.cam,
                    self.rig.len()
                )));
            }
        }
        for (i, m) in self.matches2d3d.iter().enumerate() {
            check_finite(&m.p, &format!("2D-3D match {i} p"))?;
            check_finite(&m.x, &format!("2D-3D match {i} X"))?;
        }
        if let Some(g) = &self.ground_truth {
            check_finite(&g.rotation, "ground truth R")?;
            check_finite(&g.t, "ground truth t")?;
            check_finite(&[g.f], "ground truth f")?;
        }
        self.rig_camera()?.validate(&Tolerances {
            so3: 1e-6,
            ..Tolerances::default()
        })?;
        Ok(())
    }

    pub fn rig_camera(&self) -> Result<GeneralizedCamera> {
        let cameras = self
            .rig
            .iter()
            .map(|c| {
                let [fx, fy, cx, cy] = c.intrinsics;
                PinholeCamera::new(mat_from_row_major(&c.rotation), Vec3::from(c.t), fx).with_intrinsics(fx, fy, cx, cy)
            })
            .collect();
        Ok(GeneralizedCamera { cameras })
    }

    /// Converts the matches to solver input: rig pixels become rig-frame
    /// rays from their camera centres.
    pub fn correspondences(&self) -> Result<HybridCorrespondences> {
        let rig = self.rig_camera()?;
        let twod = self
            .matches2d2d
            .iter()
            .map(|m| {
                let cam = &rig.cameras[m.cam];
                let q = ray_from_pixel(&Vec3::new(m.g[0], m.g[1], 1.0), cam)?;
                Ok(Corr2D2D::new(Vector2::from(m.p), q, cam.translation, m.cam))
            })
            .collect::<Result<_>>()?;
        let threed = self
            .matches2d3d
            .iter()
            .map(|m| Corr2D3D::new(Vector2::from(m.p), Vec3::from(m.x)))
            .collect();
        Ok(HybridCorrespondences::new(twod, threed))
    }

    pub fn ground_truth_pose(&self) -> Option<PoseWithFocal> {
        self.ground_truth
            .as_ref()
            .map(|g| PoseWithFocal::new(mat_from_row_major(&g.rotation), Vec3::from(g.t), g.f))
    }

    /// The observed (noisy) correspondences of a synthetic scene, with its
    /// ground truth.
    pub fn from_scene(scene: &SceneInstance) -> Self {
        let rig = scene
            .rig
            .cameras
            .iter()
            .map(|c| RigCameraEntry {
                rotation: mat_to_row_major(&c.rotation),
                t: c.translation.into(),
                intrinsics: [c.focal, c.focal * c.aspect, c.principal_point.x, c.principal_point.y],
            })
            .collect();
        let matches2d2d = scene
            .noisy
            .twod
            .iter()
            .map(|c| {
                let cam = &scene.rig.cameras[c.cam_index];
                let h = cam.calibration() * (cam.rotation.transpose() * c.q);
                Match2D2DEntry {
                    p: [c.p.x, c.p.y],
                    g: [h.x / h.z, h.y / h.z],
                    cam: c.cam_index,
                }
            })
            .collect();
        let matches2d3d = scene
            .noisy
            .threed
            .iter()
            .map(|c| Match2D3DEntry {
                p: [c.p.x, c.p.y],
                x: c.x.into(),
            })
            .collect();
        Self {
            rig,
            matches2d2d,
            matches2d3d,
            ground_truth: Some(GroundTruthEntry {
                rotation: mat_to_row_major(&scene.pose.rotation),
                t: scene.pose.translation.into(),
                f: scene.pose.focal,
            }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("correspondence files always serialize")
    }
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory followed by a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io_err = |e: std::io::Error| Error::InvalidInput(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("{} is not a file path", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io_err)
}
