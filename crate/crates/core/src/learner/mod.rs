pub mod gae;
pub mod network;
pub mod observation;
pub mod policy;
pub mod ppo;
pub mod train;

pub use gae::{compute_gae, Advantages};
pub use observation::{Observation, OBS_DIM};
pub use policy::{CheckpointMeta, NetworkConfig, PolicyOutput, PolicyParameters, SampledAction, ACTION_DIM};
pub use ppo::{ppo_update, Adam, PpoConfig, RolloutBatch, UpdateStats};
pub use train::{train, CurveRow, EnvStep, Environment, TrainConfig, TrainResult};
