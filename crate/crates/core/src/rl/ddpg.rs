use rand::Rng;
use serde::{Deserialize, Serialize};

use super::buffer::Transition;
use crate::error::{Error, Result};
use crate::nn::{soft_update, Actor, Adam, AdamParams, AgentCheckpoint, Critic, GradientSet, Matrix, NetworkConfig, ObsFeatures, ParamSet, ACTION_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdpgConfig {
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    pub batch_size: usize,
    /// Weight of the mean squared actor pre-activation added to the actor
    /// loss.
    pub action_l2: f64,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            gamma: 0.98,
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            tau: 0.005,
            batch_size: 128,
            action_l2: 1e-3,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma {} must lie in (0, 1)", self.gamma)));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau {} must lie in (0, 1]", self.tau)));
        }
        if !(self.action_l2 >= 0.0) {
            return Err(Error::Config(format!("action_l2 {} must be non-negative", self.action_l2)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Online and target networks with their optimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub actor: Actor,
    pub critic: Critic,
    pub actor_target: Actor,
    pub critic_target: Critic,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateDiagnostics {
    pub critic_loss: f64,
    /// `-mean Q(s, pi(s))` before the actor step.
    pub actor_loss: f64,
    pub mean_target: f64,
}

impl Agent {
    pub fn new(config: NetworkConfig, ddpg: &DdpgConfig, rng: &mut impl Rng) -> Self {
        let actor = Actor::init(config.clone(), rng);
        let critic = Critic::init(config, rng);
        Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor_opt: Adam::new(AdamParams::with_lr(ddpg.actor_lr), &actor),
            critic_opt: Adam::new(AdamParams::with_lr(ddpg.critic_lr), &critic),
            actor,
            critic,
        }
    }

    pub fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint::new(self.actor.clone(), self.critic.clone())
    }
}

/// Bootstrapped critic targets `r + gamma (1 - terminal) Q'(s', pi'(s'))`.
pub fn critic_targets(agent: &Agent, batch: &[&Transition], gamma: f64) -> Result<Vec<f64>> {
    let next: Vec<&ObsFeatures> = batch.iter().map(|t| t.next_obs.as_ref()).collect();
    let next_actions = agent.actor_target.forward(&next)?.actions;
    let q_next = agent.critic_target.forward(&next, &next_actions)?;
    Ok(batch
        .iter()
        .zip(&q_next.q().data)
        .map(|(t, &q)| if t.terminal { t.reward } else { t.reward + gamma * q })
        .collect())
}

fn action_matrix(batch: &[&Transition]) -> Matrix {
    let data = batch.iter().flat_map(|t| t.action.to_array()).collect();
    Matrix::from_vec(batch.len(), ACTION_DIM, data).expect("two values per action")
}

/// One DDPG step: critic regression to the bootstrapped targets, actor
/// ascent on `Q(s, pi(s))` through the critic's action input, then soft
/// target updates. Nothing is modified if any loss or gradient is
/// non-finite.
pub fn ddpg_update(agent: &mut Agent, batch: &[&Transition], config: &DdpgConfig) -> Result<UpdateDiagnostics> {
    if batch.is_empty() {
        return Err(Error::Usage("ddpg update on an empty batch".into()));
    }
    let n = batch.len() as f64;
    let targets = critic_targets(agent, batch, config.gamma)?;
    let obs: Vec<&ObsFeatures> = batch.iter().map(|t| t.obs.as_ref()).collect();

    let encoded = agent.critic.encode(&obs)?;
    let head = agent.critic.head(&encoded, &action_matrix(batch))?;
    let q = &head.output().data;
    let critic_loss = q.iter().zip(&targets).map(|(a, y)| (a - y) * (a - y)).sum::<f64>() / n;
    let dq = Matrix::from_vec(batch.len(), 1, q.iter().zip(&targets).map(|(a, y)| 2.0 * (a - y) / n).collect())?;
    let mut critic_grads = GradientSet::zeros_like(&agent.critic);
    agent.critic.backward_parts(&encoded, &head, &dq, &mut critic_grads.0);

    let pi = agent.actor.forward(&obs)?;
    let pi_head = agent.critic.head(&encoded, &pi.actions)?;
    let actor_loss = -pi_head.output().data.iter().sum::<f64>() / n;
    let d_action = agent
        .critic
        .action_gradient(&pi_head, &Matrix::from_vec(batch.len(), 1, vec![-1.0 / n; batch.len()])?);
    let mut actor_grads = GradientSet::zeros_like(&agent.actor);
    agent
        .actor
        .backward_penalized(&pi, &d_action, 2.0 * config.action_l2 / n, &mut actor_grads.0);

    if !critic_loss.is_finite() || !actor_loss.is_finite() || !critic_grads.0.all_finite() || !actor_grads.0.all_finite() {
        return Err(Error::NonFinite(format!(
            "critic loss {critic_loss}, actor loss {actor_loss}"
        )));
    }
    agent.critic_opt.update(&mut agent.critic, &critic_grads)?;
    agent.actor_opt.update(&mut agent.actor, &actor_grads)?;
    soft_update(&mut agent.critic_target, &agent.critic, config.tau);
    soft_update(&mut agent.actor_target, &agent.actor, config.tau);

    Ok(UpdateDiagnostics {
        critic_loss,
        actor_loss,
        mean_target: targets.iter().sum::<f64>() / n,
    })
}
