use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{ReplayBuffer, Transition, REPLAY_CAPACITY};
use super::curriculum::{curriculum_advance, CurriculumState};
use super::ddpg::{ddpg_update, Agent, DdpgConfig, UpdateDiagnostics};
use super::explore::{select_action, NoiseSchedule};
use crate::error::{Error, Result};
use crate::eval::{run_eval, MetricsSummary, RecordDetail, SuiteConfig};
use crate::nn::{Ablation, NetworkConfig, ObsFeatures};
use crate::sim::{Env, EnvParams, EpisodeConfig, SceneKind, Terminal};

pub const TRAINER_STATE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub seed: u64,
    pub episodes: usize,
    pub ddpg: DdpgConfig,
    /// Transitions collected before the first update.
    pub warmup: usize,
    pub buffer_capacity: usize,
    /// One update every this many environment steps.
    pub update_every: usize,
    pub noise: NoiseSchedule,
    pub eval_period: usize,
    pub eval_episodes: usize,
    pub eval_seed_base: u64,
    /// Also evaluate the untrained policy before the first episode.
    pub eval_at_start: bool,
    pub curriculum: bool,
    pub scenes: Vec<SceneKind>,
    /// Dynamic pedestrian range when the curriculum is off.
    pub n_dynamic: (usize, usize),
    pub n_static: (usize, usize),
    pub ped_speed: (f64, f64),
    pub network: NetworkConfig,
    pub env: EnvParams,
    /// Stop once an evaluation at the final level reaches this success rate.
    pub early_stop_success: Option<f64>,
    pub parallel_eval: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            episodes: 300_000,
            ddpg: DdpgConfig::default(),
            warmup: 5000,
            buffer_capacity: REPLAY_CAPACITY,
            update_every: 1,
            noise: NoiseSchedule::default(),
            eval_period: 1000,
            eval_episodes: 100,
            eval_seed_base: 1 << 40,
            eval_at_start: false,
            curriculum: true,
            scenes: SceneKind::ALL.to_vec(),
            n_dynamic: (1, 2),
            n_static: (1, 2),
            ped_speed: (0.5, 1.0),
            network: NetworkConfig::full(Ablation::None),
            env: EnvParams::default(),
            early_stop_success: None,
            parallel_eval: true,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        self.ddpg.validate()?;
        self.network.validate()?;
        self.env.tagd.validate_for(crate::sim::V_MAX, self.env.dt)?;
        if self.episodes == 0 || self.eval_period == 0 || self.eval_episodes == 0 {
            return Err(Error::Config("episodes, eval_period and eval_episodes must be positive".into()));
        }
        if self.update_every == 0 || self.buffer_capacity == 0 {
            return Err(Error::Config("update_every and buffer_capacity must be positive".into()));
        }
        if self.buffer_capacity < self.ddpg.batch_size {
            return Err(Error::Config("replay capacity is smaller than one batch".into()));
        }
        self.episode_config(0, CurriculumState::default()).validate()
    }

    pub fn n_dynamic_for(&self, curriculum: CurriculumState) -> (usize, usize) {
        if self.curriculum {
            (1, curriculum.n_dyn_max())
        } else {
            self.n_dynamic
        }
    }

    pub fn episode_config(&self, episode: usize, curriculum: CurriculumState) -> EpisodeConfig {
        EpisodeConfig {
            seed: episode_seed(self.seed, episode),
            scenes: self.scenes.clone(),
            n_dynamic: self.n_dynamic_for(curriculum),
            n_static: self.n_static,
            ped_speed: self.ped_speed,
        }
    }

    pub fn eval_suite(&self, curriculum: CurriculumState) -> SuiteConfig {
        SuiteConfig {
            seed_base: self.eval_seed_base,
            episodes: self.eval_episodes,
            scenes: self.scenes.clone(),
            n_dynamic: self.n_dynamic_for(curriculum),
            n_static: self.n_static,
            ped_speed: self.ped_speed,
            env: self.env.clone(),
            parallel: self.parallel_eval,
            detail: RecordDetail::Summary,
        }
    }
}

/// Decorrelated per-episode seed (splitmix64 finalizer).
pub fn episode_seed(master: u64, episode: usize) -> u64 {
    let mut z = master ^ (episode as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRecord {
    pub episode: usize,
    pub level: usize,
    pub success_rate: f64,
    pub checkpoint: Option<PathBuf>,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainLogRecord {
    Episode {
        episode: usize,
        scene: SceneKind,
        outcome: Terminal,
        episode_return: f64,
        steps: usize,
        level: usize,
        sigma: f64,
        updates: usize,
        critic_loss: Option<f64>,
        actor_loss: Option<f64>,
    },
    Eval {
        /// Training episodes completed before this evaluation.
        episode: usize,
        level: usize,
        summary: MetricsSummary,
        checkpoint: Option<PathBuf>,
    },
    Curriculum {
        episode: usize,
        from: usize,
        to: usize,
    },
    Best {
        episode: usize,
        level: usize,
        success_rate: f64,
        checkpoint: Option<PathBuf>,
    },
}

/// Everything needed to resume training except the replay buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub version: u32,
    pub config: TrainerConfig,
    pub next_episode: usize,
    pub total_steps: u64,
    pub agent: Agent,
    pub curriculum: CurriculumState,
    pub best: Option<BestRecord>,
    pub noise_rng: ChaCha8Rng,
    pub sample_rng: ChaCha8Rng,
}

impl TrainerState {
    pub fn new(config: TrainerConfig) -> Result<Self> {
        config.validate()?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
        let agent = Agent::new(config.network.clone(), &config.ddpg, &mut init_rng);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed);
        noise_rng.set_stream(2);
        let mut sample_rng = ChaCha8Rng::seed_from_u64(config.seed);
        sample_rng.set_stream(3);
        Ok(Self {
            version: TRAINER_STATE_VERSION,
            config,
            next_episode: 0,
            total_steps: 0,
            agent,
            curriculum: CurriculumState::default(),
            best: None,
            noise_rng,
            sample_rng,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_string(self)?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Load(format!("{}: {e}", path.display())))?;
        let state: Self = serde_json::from_str(&text).map_err(|e| Error::Load(format!("trainer state: {e}")))?;
        if state.version != TRAINER_STATE_VERSION {
            return Err(Error::Load(format!("trainer state version {} is not supported", state.version)));
        }
        state.agent.actor.validate().map_err(|e| Error::Load(e.to_string()))?;
        state.agent.critic.validate().map_err(|e| Error::Load(e.to_string()))?;
        Ok(state)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: TrainerState,
    pub log: Vec<TrainLogRecord>,
    pub evaluations: Vec<(usize, MetricsSummary)>,
    pub stopped_early: bool,
}

struct Sink {
    dir: Option<PathBuf>,
    log: Option<BufWriter<File>>,
    records: Vec<TrainLogRecord>,
}

impl Sink {
    fn open(dir: Option<&Path>, append: bool) -> Result<Self> {
        let log = match dir {
            Some(d) => {
                fs::create_dir_all(d.join("checkpoints"))?;
                let f = OpenOptions::new()
                    .create(true)
                    .write(true)
                    .append(append)
                    .truncate(!append)
                    .open(d.join("train_log.jsonl"))?;
                Some(BufWriter::new(f))
            }
            None => None,
        };
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
            log,
            records: Vec::new(),
        })
    }

    fn emit(&mut self, rec: TrainLogRecord) -> Result<()> {
        if let Some(w) = self.log.as_mut() {
            serde_json::to_writer(&mut *w, &rec)?;
            writeln!(w)?;
        }
        self.records.push(rec);
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        if let Some(w) = self.log.as_mut() {
            w.flush()?;
        }
        Ok(())
    }
}

/// Trains from scratch. With `out_dir`, writes `train_log.jsonl`, one
/// checkpoint per evaluation under `checkpoints/`, `best.json` and a
/// resumable `trainer_state.json`.
pub fn train(config: TrainerConfig, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    let state = TrainerState::new(config)?;
    run_training(state, out_dir, false)
}

/// Continues a saved run. The replay buffer starts empty again.
pub fn resume(state: TrainerState, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    state.config.validate()?;
    run_training(state, out_dir, true)
}

fn evaluate(state: &mut TrainerState, sink: &mut Sink, completed: usize) -> Result<MetricsSummary> {
    let level = state.curriculum.level;
    let summary = run_eval(&state.agent.actor, &state.config.eval_suite(state.curriculum))?.summary;
    let checkpoint = match &sink.dir {
        Some(d) => {
            let p = d.join("checkpoints").join(format!("ep{completed:07}.json"));
            state.agent.checkpoint().save(&p)?;
            Some(p)
        }
        None => None,
    };
    sink.emit(TrainLogRecord::Eval {
        episode: completed,
        level,
        summary,
        checkpoint: checkpoint.clone(),
    })?;

    let better = match &state.best {
        None => true,
        Some(b) => level > b.level || (level == b.level && summary.success_rate > b.success_rate),
    };
    if better {
        let best_path = match (&sink.dir, &checkpoint) {
            (Some(d), Some(c)) => {
                let p = d.join("best.json");
                fs::copy(c, &p)?;
                Some(p)
            }
            _ => None,
        };
        state.best = Some(BestRecord {
            episode: completed,
            level,
            success_rate: summary.success_rate,
            checkpoint: best_path.clone(),
        });
        sink.emit(TrainLogRecord::Best {
            episode: completed,
            level,
            success_rate: summary.success_rate,
            checkpoint: best_path,
        })?;
    }

    if state.config.curriculum {
        let next = curriculum_advance(state.curriculum, summary.success_rate);
        if next != state.curriculum {
            sink.emit(TrainLogRecord::Curriculum {
                episode: completed,
                from: state.curriculum.level,
                to: next.level,
            })?;
            state.curriculum = next;
        }
    }
    Ok(summary)
}

fn divergence(state: &TrainerState, sink: &Sink, episode: usize, detail: String) -> Error {
    let dump = sink
        .dir
        .clone()
        .unwrap_or_else(std::env::temp_dir)
        .join(format!("divergence_ep{episode}.json"));
    if let Err(e) = state.save(&dump) {
        return Error::Divergence {
            episode,
            detail: format!("{detail}; dump failed: {e}"),
            dump,
        };
    }
    Error::Divergence { episode, detail, dump }
}

fn run_training(mut state: TrainerState, out_dir: Option<&Path>, append: bool) -> Result<TrainOutcome> {
    let mut sink = Sink::open(out_dir, append)?;
    let cfg = state.config.clone();
    let ablation = cfg.network.ablation;
    let mut buffer: ReplayBuffer<Transition> = ReplayBuffer::new(cfg.buffer_capacity);
    let mut evaluations = Vec::new();
    let mut stopped_early = false;

    if cfg.eval_at_start && state.next_episode == 0 {
        let s = evaluate(&mut state, &mut sink, 0)?;
        evaluations.push((0, s));
    }

    while state.next_episode < cfg.episodes {
        let ep = state.next_episode;
        let sigma = cfg.noise.sigma(ep, cfg.episodes);
        let mut env = Env::new(cfg.env.clone(), cfg.episode_config(ep, state.curriculum))?;
        let mut obs = Arc::new(ObsFeatures::from_observation(env.observation(), ablation)?);
        let (mut ret, mut updates) = (0.0, 0usize);
        let (mut closs, mut aloss) = (0.0, 0.0);
        let terminal = loop {
            let action = select_action(&state.agent.actor, &obs, sigma, true, &mut state.noise_rng)?;
            let (next, out) = env.step(action)?;
            let next = Arc::new(ObsFeatures::from_observation(&next, ablation)?);
            ret += out.reward.total;
            buffer.push(Transition {
                obs: Arc::clone(&obs),
                action,
                reward: out.reward.total,
                next_obs: Arc::clone(&next),
                terminal: out.terminal.is_absorbing(),
            });
            state.total_steps += 1;
            obs = next;

            let ready = buffer.len() >= cfg.warmup.max(cfg.ddpg.batch_size);
            if ready && state.total_steps % cfg.update_every as u64 == 0 {
                let batch = buffer.sample(cfg.ddpg.batch_size, &mut state.sample_rng)?;
                match ddpg_update(&mut state.agent, &batch, &cfg.ddpg) {
                    Ok(UpdateDiagnostics {
                        critic_loss,
                        actor_loss,
                        ..
                    }) => {
                        closs += critic_loss;
                        aloss += actor_loss;
                        updates += 1;
                    }
                    Err(Error::NonFinite(detail)) => return Err(divergence(&state, &sink, ep, detail)),
                    Err(e) => return Err(e),
                }
            }
            if out.terminal.is_done() {
                break out.terminal;
            }
        };
        sink.emit(TrainLogRecord::Episode {
            episode: ep,
            scene: env.layout().kind,
            outcome: terminal,
            episode_return: ret,
            steps: env.step_count(),
            level: state.curriculum.level,
            sigma,
            updates,
            critic_loss: (updates > 0).then(|| closs / updates as f64),
            actor_loss: (updates > 0).then(|| aloss / updates as f64),
        })?;
        state.next_episode += 1;

        let completed = state.next_episode;
        if completed % cfg.eval_period == 0 || completed == cfg.episodes {
            let s = evaluate(&mut state, &mut sink, completed)?;
            evaluations.push((completed, s));
            if let Some(d) = &sink.dir {
                state.save(&d.join("trainer_state.json"))?;
            }
            sink.flush()?;
            let final_level = !cfg.curriculum || state.curriculum.is_final();
            if let Some(target) = cfg.early_stop_success {
                if final_level && s.success_rate >= target {
                    stopped_early = completed < cfg.episodes;
                    break;
                }
            }
        }
    }
    sink.flush()?;
    Ok(TrainOutcome {
        state,
        log: sink.records,
        evaluations,
        stopped_early,
    })
}
