//! Co-generation of maximal collision-free solid pairs under a prescribed
//! one-parametric relative rigid motion.
//!
//! The pipeline: rasterize two solids onto uniform Cartesian grids
//! ([`geometry`]), sample their relative motion at midpoint times
//! ([`motion`]), precompute sparse motion-correlation matrices that record
//! how long each moving grid vertex dwells in each stationary cell
//! ([`correlation`]), evaluate differentiable collision measures and their
//! exact sensitivities ([`collision`]), and run a constrained
//! volume-maximization loop that grows both solids until every further
//! growth would collide ([`optimizer`]). Sweep and unsweep fall out as the
//! extreme cases of the volume-ratio parameter. [`analysis`] holds
//! independent quadrature oracles and evaluation metrics; [`scene`] and
//! [`export`] cover configuration files and on-disk formats.

pub mod analysis;
pub mod collision;
pub mod correlation;
pub mod error;
pub mod export;
pub mod geometry;
pub mod motion;
pub mod optimizer;
pub mod scene;

pub use collision::{LocalMeasureField, PartitionMasks};
pub use correlation::CorrelationMatrix;
pub use error::{CogenError, Result};
pub use geometry::{rasterize, DensityField, Grid, ShapeSpec};
pub use motion::{BuiltinMotion, MotionPair, Pose, Trajectory};
pub use optimizer::{CancelToken, CoGenResult, OptimizerConfig};
pub use scene::{MotionConfig, SceneConfig};
