//! Dense layers with hand-written reverse mode, location-based attention
//! and the dual-stream actor and critic.

pub mod attention;
pub mod checkpoint;
pub mod dense;
pub mod features;
pub mod matrix;
pub mod model;
pub mod params;

pub use attention::{softmax_into, AttentionDims, AttentionModule, AttentionTrace};
pub use checkpoint::{AgentCheckpoint, CHECKPOINT_VERSION};
pub use dense::{Activation, DenseNet, DenseTrace, Layer};
pub use features::{
    build_spatial_inputs, build_temporal_inputs, stream_matrix, Ablation, ObsFeatures, StreamKind, N_SECTORS,
    SPATIAL_DIM, TEMPORAL_DIM,
};
pub use matrix::Matrix;
pub use model::{bound_action, Actor, ActorTrace, Critic, CriticTrace, Encoder, NetworkConfig, ACTION_DIM};
pub use params::{param_distance, soft_update, Adam, AdamParams, GradientSet, ParamSet};
