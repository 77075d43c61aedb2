//! DDPG training: replay, updates, exploration, curriculum and the loop.

pub mod buffer;
pub mod curriculum;
pub mod ddpg;
pub mod explore;
pub mod train;

pub use buffer::{ReplayBuffer, Transition, REPLAY_CAPACITY};
pub use curriculum::{curriculum_advance, CurriculumState, CURRICULUM_N_DYN, CURRICULUM_THRESHOLD};
pub use ddpg::{critic_targets, ddpg_update, Agent, DdpgConfig, UpdateDiagnostics};
pub use explore::{perturb, select_action, NoiseSchedule};
pub use train::{episode_seed, resume, train, BestRecord, TrainLogRecord, TrainOutcome, TrainerConfig, TrainerState};
