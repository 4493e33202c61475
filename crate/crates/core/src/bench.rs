//! Noise-robustness benchmark: every solver runs on its minimal sample of
//! each synthetic scene, the candidate closest to ground truth is kept and
//! error distributions are aggregated per motion and 3D noise level.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{focal_rel_error, rotation_error_deg, translation_error, PoseWithFocal};
use crate::solver::{solve, SolverId, SolverOptions};
use crate::synth::{add_noise, generate_scene, minimal_sample, Motion, SceneConfig, SceneInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Scene generator settings. `motion` and `noise_3d_pct` are overridden
    /// by the sweep below; `num_scenes` sets the scenes per cell.
    pub scene: SceneConfig,
    pub motions: Vec<Motion>,
    /// 3D point noise levels, in percent of depth.
    pub sigma3d_pct: Vec<f64>,
    pub solvers: Vec<SolverId>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig {
                noise_2d_px: 2.0,
                ..SceneConfig::default()
            },
            motions: Motion::ALL.to_vec(),
            sigma3d_pct: vec![0.0, 0.5, 1.0, 2.0],
            solvers: SolverId::ALL.to_vec(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        if self.motions.is_empty() || self.solvers.is_empty() || self.sigma3d_pct.is_empty() {
            return Err(Error::Config("benchmark needs at least one motion, solver and noise level".into()));
        }
        if self.sigma3d_pct.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::Config("3D noise levels must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Errors of the selected candidate on one scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseErrors {
    pub rotation_deg: f64,
    pub translation: f64,
    pub focal_rel: f64,
}

impl PoseErrors {
    pub fn between(estimate: &PoseWithFocal, truth: &PoseWithFocal) -> Self {
        Self {
            rotation_deg: rotation_error_deg(&estimate.rotation, &truth.rotation),
            translation: translation_error(&estimate.translation, &truth.translation),
            focal_rel: focal_rel_error(estimate.focal, truth.focal),
        }
    }

    /// Selection key: rotation error in radians plus relative focal error.
    fn selection_cost(&self) -> f64 {
        self.rotation_deg.to_radians() + self.focal_rel
    }
}

/// Per-scene outcomes of one solver at one motion and noise level, in scene
/// index order. `None` marks a scene where the solver returned nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub solver: SolverId,
    pub motion: Motion,
    pub sigma3d_pct: f64,
    pub sigma2d_px: f64,
    pub outcomes: Vec<Option<PoseErrors>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RotationDeg,
    Translation,
    FocalRel,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::RotationDeg, Metric::Translation, Metric::FocalRel];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::RotationDeg => "rotation_deg",
            Metric::Translation => "translation",
            Metric::FocalRel => "focal_rel",
        }
    }

    fn of(&self, e: &PoseErrors) -> f64 {
        match self {
            Metric::RotationDeg => e.rotation_deg,
            Metric::Translation => e.translation,
            Metric::FocalRel => e.focal_rel,
        }
    }
}

/// One aggregated CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub solver: SolverId,
    pub motion: Motion,
    pub sigma3d_pct: f64,
    pub sigma2d_px: f64,
    pub metric: Metric,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub fail_rate: f64,
    pub n: usize,
}

pub const CSV_HEADER: &str = "solver,motion,sigma3d_pct,sigma2d_px,metric,q25,median,q75,fail_rate,n";

impl BenchRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.solver.name(),
            self.motion.name(),
            self.sigma3d_pct,
            self.sigma2d_px,
            self.metric.name(),
            self.q25,
            self.median,
            self.q75,
            self.fail_rate,
            self.n
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub cells: Vec<BenchCell>,
}

impl BenchReport {
    pub fn cell(&self, solver: SolverId, motion: Motion, sigma3d_pct: f64) -> Option<&BenchCell> {
        self.cells
            .iter()
            .find(|c| c.solver == solver && c.motion == motion && c.sigma3d_pct == sigma3d_pct)
    }

    /// Aggregated rows ordered by solver, motion, noise level and metric.
    pub fn rows(&self) -> Vec<BenchRow> {
        let mut rows = Vec::new();
        for c in &self.cells {
            for m in Metric::ALL {
                rows.push(c.row(m));
            }
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in self.rows() {
            s.push_str(&r.to_csv());
            s.push('\n');
        }
        s
    }
}

impl BenchCell {
    /// Values of a metric over the scenes where the solver succeeded.
    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.outcomes.iter().flatten().map(|e| metric.of(e)).collect()
    }

    pub fn fail_rate(&self) -> f64 {
        if self.outcomes.is_empty() {
            return 0.0;
        }
        self.outcomes.iter().filter(|o| o.is_none()).count() as f64 / self.outcomes.len() as f64
    }

    pub fn median(&self, metric: Metric) -> f64 {
        quantile(&sorted(self.values(metric)), 0.5)
    }

    pub fn row(&self, metric: Metric) -> BenchRow {
        let v = sorted(self.values(metric));
        BenchRow {
            solver: self.solver,
            motion: self.motion,
            sigma3d_pct: self.sigma3d_pct,
            sigma2d_px: self.sigma2d_px,
            metric,
            q25: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q75: quantile(&v, 0.75),
            fail_rate: self.fail_rate(),
            n: self.outcomes.len(),
        }
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Quantile of sorted data with linear interpolation between order
/// statistics; NaN for empty data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Runs `id` on its minimal sample of `scene` and returns the errors of the
/// candidate closest to ground truth.
pub fn best_candidate(scene: &SceneInstance, id: SolverId, opts: &SolverOptions) -> Option<PoseErrors> {
    let sample = minimal_sample(scene, id, true)?;
    let candidates = solve(id, &sample, opts);
    candidates
        .ok()?
        .iter()
        .map(|p| PoseErrors::between(p, &scene.pose))
        .filter(|e| e.selection_cost().is_finite())
        .min_by(|a, b| a.selection_cost().total_cmp(&b.selection_cost()))
}

/// Runs the benchmark. Scenes are generated once per motion and reused
/// across noise levels; results do not depend on the worker count.
pub fn run_benchmark(config: &BenchConfig, opts: &SolverOptions) -> Result<BenchReport> {
    config.validate()?;
    let mut cells = Vec::new();
    for &motion in &config.motions {
        let scene_cfg = SceneConfig {
            motion,
            ..config.scene.clone()
        };
        let scenes: Vec<SceneInstance> = (0..scene_cfg.num_scenes)
            .into_par_iter()
            .map(|i| generate_scene(&scene_cfg, i))
            .collect::<Result<_>>()?;
        for &sigma in &config.sigma3d_pct {
            let noise_cfg = SceneConfig {
                noise_3d_pct: sigma,
                ..scene_cfg.clone()
            };
            let noisy: Vec<SceneInstance> = scenes.par_iter().map(|s| add_noise(s, &noise_cfg)).collect();
            for &solver in &config.solvers {
                let outcomes = noisy.par_iter().map(|s| best_candidate(s, solver, opts)).collect();
                cells.push(BenchCell {
                    solver,
                    motion,
                    sigma3d_pct: sigma,
                    sigma2d_px: noise_cfg.noise_2d_px,
                    outcomes,
                });
            }
        }
    }
    Ok(BenchReport {
        config: config.clone(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(solvers: Vec<SolverId>, sigmas: Vec<f64>, noise_2d: f64) -> BenchConfig {
        BenchConfig {
            scene: SceneConfig {
                num_scenes: 6,
                noise_2d_px: noise_2d,
                seed: 3,
                ..SceneConfig::default()
            },
            motions: vec![Motion::Random],
            sigma3d_pct: sigmas,
            solvers,
        }
    }

    #[test]
    fn quantile_interpolates_order_statistics() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.5), 1.5);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn noiseless_cells_are_exact() {
        let r = run_benchmark(&small(vec![SolverId::H51f5, SolverId::DltAp], vec![0.0], 0.0), &SolverOptions::default())
            .unwrap();
        for c in &r.cells {
            assert_eq!(c.fail_rate(), 0.0, "{:?}", c.solver);
            assert!(c.median(Metric::RotationDeg) < 1e-6, "{:?}", c.solver);
            assert!(c.median(Metric::FocalRel) < 1e-6, "{:?}", c.solver);
        }
    }

    #[test]
    fn csv_has_one_row_per_cell_and_metric() {
        let r = run_benchmark(&small(vec![SolverId::H51f5], vec![0.0, 1.0], 2.0), &SolverOptions::default()).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 1 + 2 * 3);
        assert!(lines[1].starts_with("h51f5,random,0,2,rotation_deg,"));
        assert!(lines.iter().all(|l| l.split(',').count() == 10));
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let mut c = small(vec![SolverId::H51f5], vec![], 0.0);
        assert!(run_benchmark(&c, &SolverOptions::default()).is_err());
        c.sigma3d_pct = vec![-1.0];
        assert!(run_benchmark(&c, &SolverOptions::default()).is_err());
    }
}
