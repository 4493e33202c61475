//! Absolute pose and focal length of a query camera from hybrid 2D-2D and
//! 2D-3D correspondences with a calibrated generalized (multi-camera) rig.
//!
//! Minimal solvers: [`h51f5`] (five 2D-2D matches of one rig camera and one
//! 2D-3D match), [`h13f`] (one 2D-2D and three 2D-3D matches) and [`h32f`]
//! (three 2D-2D and two 2D-3D matches), plus the linear 2D-3D baseline in
//! [`dlt`]. [`ransac`] mixes them in a robust estimator, [`synth`] generates
//! synthetic rigs and [`bench`] evaluates solvers on them.

pub mod bench;
pub mod dlt;
pub mod error;
pub mod geometry;
pub mod h13f;
pub mod h32f;
pub mod h51f5;
pub mod homotopy;
pub mod io;
pub mod linalg;
pub mod poly;
pub mod ransac;
pub mod solver;
pub mod synth;
pub mod template;

pub use error::{Error, Result};
pub use geometry::{
    Corr2D2D, Corr2D3D, GeneralizedCamera, HybridCorrespondences, PinholeCamera, PoseWithFocal, Tolerances,
};
pub use solver::{solve, Backend, SolverId, SolverOptions};
