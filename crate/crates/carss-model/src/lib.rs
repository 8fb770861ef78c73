//! Attention-based policies for cooperative subpath generation and merging,
//! plus the independent REINFORCE trainer with POMO baselines.

pub mod config;
mod error;
pub mod gen_policy;
pub mod merge_policy;
pub mod rollout;
pub mod training;

pub use config::{describe, init_params, ModelConfig};
pub use error::{ModelError, Result};
pub use rollout::{solve, SolveOptions};
pub use training::{train, BaselineMode, CheckpointMeta, ReturnSelection, TrainConfig};
