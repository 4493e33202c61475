//! Solver registry: identifiers, sample requirements and dispatch.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HybridCorrespondences, PoseWithFocal, Vec3};
use crate::template::TemplateSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverId {
    /// One 2D-2D and three 2D-3D matches.
    H13f,
    /// Three 2D-2D and two 2D-3D matches.
    H32f,
    /// Five 2D-2D matches of one rig camera and one 2D-3D match.
    H51f5,
    /// Six 2D-3D matches, linear projection matrix (non-minimal baseline).
    DltAp,
}

impl SolverId {
    pub const ALL: [SolverId; 4] = [SolverId::H13f, SolverId::H32f, SolverId::H51f5, SolverId::DltAp];

    pub fn name(&self) -> &'static str {
        match self {
            SolverId::H13f => "h13f",
            SolverId::H32f => "h32f",
            SolverId::H51f5 => "h51f5",
            SolverId::DltAp => "dlt-ap",
        }
    }

    pub fn requirement(&self) -> SampleRequirement {
        match self {
            SolverId::H13f => SampleRequirement {
                twod: 1,
                threed: 3,
                same_camera: false,
            },
            SolverId::H32f => SampleRequirement {
                twod: 3,
                threed: 2,
                same_camera: false,
            },
            SolverId::H51f5 => SampleRequirement {
                twod: 5,
                threed: 1,
                same_camera: true,
            },
            SolverId::DltAp => SampleRequirement {
                twod: 0,
                threed: 6,
                same_camera: false,
            },
        }
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h13f" => Ok(SolverId::H13f),
            "h32f" => Ok(SolverId::H32f),
            "h51f5" | "h51f[5]" => Ok(SolverId::H51f5),
            "dlt-ap" | "dlt" | "dltap" => Ok(SolverId::DltAp),
            other => Err(Error::InvalidInput(format!("unknown solver '{other}'"))),
        }
    }
}

/// Number of matches a solver consumes; with `same_camera` all 2D-2D matches
/// must come from one rig camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleRequirement {
    pub twod: usize,
    pub threed: usize,
    pub same_camera: bool,
}

impl SampleRequirement {
    pub fn describe(&self) -> String {
        let cam = if self.same_camera { " of one rig camera" } else { "" };
        format!("{} 2D-2D matches{cam} and {} 2D-3D matches", self.twod, self.threed)
    }

    /// True when `corrs` holds exactly this sample.
    pub fn matches(&self, corrs: &HybridCorrespondences) -> bool {
        let c = corrs.configuration();
        c.m == self.twod && c.n == self.threed && (!self.same_camera || c.k == c.m)
    }

    /// True when a sample can be drawn from a larger pool.
    pub fn satisfiable(&self, corrs: &HybridCorrespondences) -> bool {
        if corrs.threed.len() < self.threed || corrs.twod.len() < self.twod {
            return false;
        }
        !self.same_camera || corrs.configuration().k >= self.twod
    }
}

/// Which numerical route a solver takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// The fastest built-in route: a linear pencil for H51f[5], a parameter
    /// homotopy from cached start systems for H13f and the multi-start oracle
    /// for H32f.
    #[default]
    Auto,
    /// Exhaustive reference route: a total-degree homotopy for H13f and
    /// multi-start Newton for H32f. H51f[5] shares its pencil with `Auto`.
    Oracle,
    /// Action-matrix execution of a loaded solver template.
    Template,
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" | "default" => Ok(Backend::Auto),
            "oracle" => Ok(Backend::Oracle),
            "template" => Ok(Backend::Template),
            other => Err(Error::InvalidInput(format!("unknown backend '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolverOptions {
    /// Scale dividing image coordinates before solving; derived from the
    /// data when absent.
    pub image_scale: Option<f64>,
    pub backend: Backend,
    pub templates: Option<Arc<TemplateSet>>,
    /// Number of oracle starts; the solver default when absent.
    pub oracle_starts: Option<usize>,
}

impl SolverOptions {
    pub fn with_backend(backend: Backend) -> Self {
        Self {
            backend,
            ..Self::default()
        }
    }
}

/// Image conditioning scale: the configured value, or the root mean square
/// distance of the points from the principal point.
pub fn condition_scale<'a>(opts: &SolverOptions, points: impl Iterator<Item = &'a Vec3>) -> f64 {
    if let Some(s) = opts.image_scale.filter(|s| s.is_finite() && *s > 0.0) {
        return s;
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for p in points {
        sum += p.x * p.x + p.y * p.y;
        n += 1;
    }
    let s = if n > 0 { (sum / n as f64).sqrt() } else { 0.0 };
    if s.is_finite() && s > 1e-12 {
        s
    } else {
        1.0
    }
}

/// Runs a solver on a minimal sample.
pub fn solve(id: SolverId, corrs: &HybridCorrespondences, opts: &SolverOptions) -> Result<Vec<PoseWithFocal>> {
    corrs.validate()?;
    let req = id.requirement();
    if !req.matches(corrs) {
        let c = corrs.configuration();
        return Err(Error::WrongConfiguration {
            solver: id.name().into(),
            required: req.describe(),
            m: c.m,
            n: c.n,
        });
    }
    match id {
        SolverId::H13f => crate::h13f::solve_h13f(corrs, opts),
        SolverId::H32f => crate::h32f::solve_h32f(corrs, opts),
        SolverId::H51f5 => crate::h51f5::solve_h51f5(corrs, opts),
        SolverId::DltAp => crate::dlt::solve_dlt_ap(corrs),
    }
}
