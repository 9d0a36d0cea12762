#![no_std]
extern crate alloc;

pub mod analysis;
pub mod datasets;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod heat;
mod linalg;
pub mod measures;
mod vecops;

pub use dynamics::{IntegratorConfig, Trajectory, TrajectoryMode};
pub use error::{Error, Result};
pub use geometry::{Classification, CriticalPointRecord, StratumKey, SubgradientSet};
pub use heat::{MixedScoreModel, Regime, ScoreEvaluation};
pub use measures::{EmpiricalMeasure, NearestSet};
