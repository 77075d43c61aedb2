use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::MetricsSummary;
use super::record::{EpisodeRecord, RecordDetail, StepEntry};
use crate::error::{Error, Result};
use crate::nn::{Actor, ObsFeatures, StreamKind};
use crate::sim::{Action, Env, EnvParams, EpisodeConfig, Observation, SceneKind};

/// What a policy chose, with the attention weights behind the choice.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Decision {
    pub action: Action,
    pub spatial_weights: Vec<f64>,
    pub temporal_weights: Vec<f64>,
    pub previous_spatial_weights: Vec<f64>,
}

pub trait Policy: Sync {
    fn decide(&self, obs: &Observation, step: usize) -> Result<Decision>;
}

impl Policy for Actor {
    fn decide(&self, obs: &Observation, _step: usize) -> Result<Decision> {
        let features = ObsFeatures::from_observation(obs, self.config.ablation)?;
        let trace = self.forward(&[&features])?;
        let mut d = Decision {
            action: Action::new(trace.actions.get(0, 0), trace.actions.get(0, 1)),
            ..Decision::default()
        };
        for (kind, t) in self.config.ablation.streams().iter().zip(&trace.encoder.streams) {
            let w = t.weights.row(0).to_vec();
            match kind {
                StreamKind::Spatial => d.spatial_weights = w,
                StreamKind::Temporal => d.temporal_weights = w,
                StreamKind::PreviousSpatial => d.previous_spatial_weights = w,
            }
        }
        Ok(d)
    }
}

/// Replays a fixed action list, then holds the last action.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScriptedPolicy {
    pub actions: Vec<Action>,
}

impl Policy for ScriptedPolicy {
    fn decide(&self, _obs: &Observation, step: usize) -> Result<Decision> {
        let action = self
            .actions
            .get(step)
            .or(self.actions.last())
            .copied()
            .unwrap_or_default();
        Ok(Decision {
            action,
            ..Decision::default()
        })
    }
}

/// A fixed evaluation protocol: every episode is fully determined by its
/// seed, independently of the policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub seed_base: u64,
    pub episodes: usize,
    pub scenes: Vec<SceneKind>,
    pub n_dynamic: (usize, usize),
    pub n_static: (usize, usize),
    pub ped_speed: (f64, f64),
    pub env: EnvParams,
    pub parallel: bool,
    pub detail: RecordDetail,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed_base: 1_000_000,
            episodes: 1000,
            scenes: SceneKind::ALL.to_vec(),
            n_dynamic: (2, 2),
            n_static: (1, 1),
            ped_speed: (0.6, 0.6),
            env: EnvParams::default(),
            parallel: true,
            detail: RecordDetail::Steps,
        }
    }
}

impl SuiteConfig {
    pub fn episode_config(&self, index: usize) -> EpisodeConfig {
        EpisodeConfig {
            seed: self.seed_base + index as u64,
            scenes: self.scenes.clone(),
            n_dynamic: self.n_dynamic,
            n_static: self.n_static,
            ped_speed: self.ped_speed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::Config("evaluation needs at least one episode".into()));
        }
        self.episode_config(0).validate()
    }
}

/// Runs one episode to its end.
pub fn run_episode(
    policy: &dyn Policy,
    params: &EnvParams,
    config: EpisodeConfig,
    episode: usize,
    detail: RecordDetail,
) -> Result<EpisodeRecord> {
    let mut env = Env::new(params.clone(), config.clone())?;
    let mut steps = Vec::new();
    let mut episode_return = 0.0;
    loop {
        let obs = env.observation();
        let decision = policy.decide(obs, env.step_count())?;
        let pose = env.robot().pose;
        let pedestrians = env.pedestrians().iter().map(|p| p.position()).collect();
        let tagd_displacements = obs.tagds.iter().map(|t| t.displacement()).collect();
        let (scan_ranges, tagd_centroids) = if detail == RecordDetail::Full {
            (
                Some(obs.scan.ranges()),
                Some(obs.tagds.iter().map(|t| (t.c_prev, t.c_t)).collect()),
            )
        } else {
            (None, None)
        };
        let (_, out) = env.step(decision.action)?;
        episode_return += out.reward.total;
        if detail != RecordDetail::Summary {
            steps.push(StepEntry {
                step: out.step - 1,
                pose,
                action: decision.action.clipped(),
                reward: out.reward,
                spatial_weights: decision.spatial_weights,
                temporal_weights: decision.temporal_weights,
                previous_spatial_weights: decision.previous_spatial_weights,
                tagd_displacements,
                pedestrians,
                scan_ranges,
                tagd_centroids,
            });
        }
        if out.terminal.is_done() {
            break;
        }
    }
    Ok(EpisodeRecord {
        episode,
        config,
        scene: env.layout().kind,
        walls: env.layout().walls.clone(),
        robot_path: env.robot_path().waypoints.clone(),
        pedestrian_half_extent: params.pedestrian_half_extent,
        robot_radius: params.robot_radius,
        steps,
        final_pose: env.robot().pose,
        outcome: env.terminal(),
        step_count: env.step_count(),
        episode_return,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub summary: MetricsSummary,
    /// One record per suite episode, in suite order.
    pub records: Vec<EpisodeRecord>,
}

pub fn summarize(records: &[EpisodeRecord]) -> MetricsSummary {
    MetricsSummary::from_outcomes(records.iter().map(|r| (r.outcome, r.step_count)))
}

/// Evaluates `policy` on every suite episode with exploration off.
/// Parallel and sequential runs give identical reports.
pub fn run_eval(policy: &dyn Policy, suite: &SuiteConfig) -> Result<EvalReport> {
    suite.validate()?;
    let one = |i: usize| run_episode(policy, &suite.env, suite.episode_config(i), i, suite.detail);
    let records: Vec<EpisodeRecord> = if suite.parallel {
        (0..suite.episodes).into_par_iter().map(one).collect::<Result<_>>()?
    } else {
        (0..suite.episodes).map(one).collect::<Result<_>>()?
    };
    Ok(EvalReport {
        summary: summarize(&records),
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Dynamic pedestrian speed (m/s).
    Speed,
    /// Number of dynamic pedestrians at 0.6 m/s.
    Count,
}

impl SweepAxis {
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::Speed => (1..=6).map(|k| 0.2 * k as f64).collect(),
            SweepAxis::Count => (1..=8).map(f64::from).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub summary: MetricsSummary,
}

pub fn run_sweep(policy: &dyn Policy, base: &SuiteConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&value| {
            let mut suite = base.clone();
            suite.detail = RecordDetail::Summary;
            match axis {
                SweepAxis::Speed => suite.ped_speed = (value, value),
                SweepAxis::Count => {
                    let n = value.round() as usize;
                    suite.n_dynamic = (n, n);
                    suite.ped_speed = (0.6, 0.6);
                }
            }
            Ok(SweepPoint {
                value,
                summary: run_eval(policy, &suite)?.summary,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub baseline: MetricsSummary,
    pub icp_disabled: MetricsSummary,
    pub open_space: MetricsSummary,
    /// Success-rate change relative to the baseline (negative is worse).
    pub icp_disabled_delta: f64,
    pub open_space_delta: f64,
}

/// Baseline, ICP-disabled and open-space evaluations on the same seeds.
pub fn run_robustness(policy: &dyn Policy, suite: &SuiteConfig) -> Result<RobustnessReport> {
    let mut base = suite.clone();
    base.detail = RecordDetail::Summary;
    let baseline = run_eval(policy, &base)?.summary;
    let mut no_icp = base.clone();
    no_icp.env.icp.enabled = false;
    let icp_disabled = run_eval(policy, &no_icp)?.summary;
    let mut open = base;
    open.env.open_space = true;
    let open_space = run_eval(policy, &open)?.summary;
    Ok(RobustnessReport {
        icp_disabled_delta: icp_disabled.success_rate - baseline.success_rate,
        open_space_delta: open_space.success_rate - baseline.success_rate,
        baseline,
        icp_disabled,
        open_space,
    })
}
