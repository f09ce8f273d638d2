//! The SSRL training loop, count-based exploration, and the multi-threaded
//! actor/worker variant.

mod config;
mod distributed;
mod exploration;
mod metrics;
mod single;

pub use config::{BufferKind, DistributedConfig, RolloutMode, TrainConfig};
pub use distributed::{train_distributed, DistributedRun, DistributedStats, Snapshot};
pub use exploration::{bonus_for_count, count_bonus, shape, shaped_rollout, StateVisitCounts};
pub use metrics::{read_rolling, EpisodeRecord, IterationRecord, TrainMetrics, CSV_HEADER, ROLLING_WINDOW};
pub use single::{evaluate, policy_action, supervised_update, train, Trainer};
