//! Missile-evasion workbench: a 200 Hz aircraft/missile engagement, the
//! per-policy reward evaluators, a PPO learner and the multi-stage switching
//! strategy, plus the harness that trains and sweeps them.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aircraft;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod learner;
pub mod missile;
pub mod report;
pub mod rewards;
pub mod strategy;

pub use aircraft::{AircraftParams, AircraftState, ControlAction};
pub use error::{Error, Result};
pub use geometry::{RelativeGeometry, Vec3};
pub use harness::episode::{run_episode, EpisodeRecord, Outcome, RunOptions};
pub use harness::scenario::{ScenarioBounds, ScenarioSpec};
pub use harness::sim::{SimConfig, Simulation};
pub use harness::sweep::{success_ratio_sweep, SweepGrid, SweepResult};
pub use harness::task::{Task, TaskConfig, TaskEnv};
pub use learner::{PolicyParameters, TrainConfig};
pub use missile::{GuidanceConfig, GuidanceLaw, MissileState};
pub use rewards::RewardBreakdown;
pub use strategy::{Controller, MultiStage, SinglePolicy, Stage, StrategyBundle};
