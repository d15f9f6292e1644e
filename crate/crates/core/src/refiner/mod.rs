//! Latent refinement environment and off-policy agents (TD3, DDPG) trained
//! over stored GFVs.

mod agent;
mod buffer;
mod curves;
mod env;

pub use agent::{
    actor_param_count, critic_param_count, ddpg_train, refine, sidecar_path, td3_train, train_agent, train_agent_observed, Agent,
    AgentKind, Policy, Td3Config, TrainOutcome, TrainStats,
};
pub use buffer::{ReplayBuffer, Transition};
pub use curves::{curves_to_csv, parse_curves, save_curves, CurveRow, CURVES_HEADER};
pub use env::{
    apply_action, clamp_action, env_step, refinement_reward, LatentEnv, QuadraticTargetEnv, RefineEnv,
    RefineEnvConfig, RefineSample, StepOutcome,
};
