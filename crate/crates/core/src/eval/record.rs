use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Pose2, Rect};
use crate::sim::{Action, EpisodeConfig, RewardBreakdown, SceneKind, Terminal, DT};

pub const RECORD_SCHEMA_VERSION: u32 = 1;

/// How much per-step data an episode record keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RecordDetail {
    /// Outcome only.
    Summary,
    /// Poses, actions, rewards, attention weights and TAGD displacements.
    #[default]
    Steps,
    /// Additionally pooled scan ranges and TAGD centroids, enough to render.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEntry {
    pub step: usize,
    /// Pose at which the action was chosen.
    pub pose: Pose2,
    pub action: Action,
    pub reward: RewardBreakdown,
    /// Softmax weights per stream; empty when the stream is ablated.
    pub spatial_weights: Vec<f64>,
    pub temporal_weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub previous_spatial_weights: Vec<f64>,
    pub tagd_displacements: Vec<f64>,
    pub pedestrians: Vec<Point2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_ranges: Option<Vec<f64>>,
    /// `(c_prev, c_t)` per group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tagd_centroids: Option<Vec<(Point2, Point2)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub config: EpisodeConfig,
    pub scene: SceneKind,
    pub walls: Vec<Rect>,
    pub robot_path: Vec<Point2>,
    pub pedestrian_half_extent: (f64, f64),
    pub robot_radius: f64,
    pub steps: Vec<StepEntry>,
    pub final_pose: Pose2,
    pub outcome: Terminal,
    pub step_count: usize,
    pub episode_return: f64,
}

impl EpisodeRecord {
    pub fn navigation_time(&self) -> f64 {
        self.step_count as f64 * DT
    }
}

/// One line of the episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RecordLine {
    Header {
        schema_version: u32,
        episode: usize,
        config: EpisodeConfig,
        scene: SceneKind,
        walls: Vec<Rect>,
        robot_path: Vec<Point2>,
        pedestrian_half_extent: (f64, f64),
        robot_radius: f64,
    },
    Step {
        episode: usize,
        #[serde(flatten)]
        entry: StepEntry,
    },
    Outcome {
        episode: usize,
        outcome: Terminal,
        step_count: usize,
        navigation_time: f64,
        episode_return: f64,
        final_pose: Pose2,
    },
}

pub fn write_record(out: &mut impl Write, record: &EpisodeRecord) -> Result<()> {
    let header = RecordLine::Header {
        schema_version: RECORD_SCHEMA_VERSION,
        episode: record.episode,
        config: record.config.clone(),
        scene: record.scene,
        walls: record.walls.clone(),
        robot_path: record.robot_path.clone(),
        pedestrian_half_extent: record.pedestrian_half_extent,
        robot_radius: record.robot_radius,
    };
    serde_json::to_writer(&mut *out, &header)?;
    writeln!(out)?;
    for entry in &record.steps {
        serde_json::to_writer(
            &mut *out,
            &RecordLine::Step {
                episode: record.episode,
                entry: entry.clone(),
            },
        )?;
        writeln!(out)?;
    }
    serde_json::to_writer(
        &mut *out,
        &RecordLine::Outcome {
            episode: record.episode,
            outcome: record.outcome,
            step_count: record.step_count,
            navigation_time: record.navigation_time(),
            episode_return: record.episode_return,
            final_pose: record.final_pose,
        },
    )?;
    writeln!(out)?;
    Ok(())
}

/// Reassembles records from a line stream written by [`write_record`].
pub fn read_records(input: impl BufRead) -> Result<Vec<EpisodeRecord>> {
    let mut done = Vec::new();
    let mut open: Option<EpisodeRecord> = None;
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: RecordLine =
            serde_json::from_str(&line).map_err(|e| Error::Load(format!("record line {}: {e}", lineno + 1)))?;
        match parsed {
            RecordLine::Header {
                schema_version,
                episode,
                config,
                scene,
                walls,
                robot_path,
                pedestrian_half_extent,
                robot_radius,
            } => {
                if schema_version != RECORD_SCHEMA_VERSION {
                    return Err(Error::Load(format!("record schema {schema_version} is not supported")));
                }
                if open.is_some() {
                    return Err(Error::Load(format!("line {}: header before previous outcome", lineno + 1)));
                }
                open = Some(EpisodeRecord {
                    episode,
                    config,
                    scene,
                    walls,
                    robot_path,
                    pedestrian_half_extent,
                    robot_radius,
                    steps: Vec::new(),
                    final_pose: Pose2::new(0.0, 0.0, 0.0),
                    outcome: Terminal::None,
                    step_count: 0,
                    episode_return: 0.0,
                });
            }
            RecordLine::Step { episode, entry } => match open.as_mut() {
                Some(r) if r.episode == episode => r.steps.push(entry),
                _ => return Err(Error::Load(format!("line {}: step outside its episode", lineno + 1))),
            },
            RecordLine::Outcome {
                episode,
                outcome,
                step_count,
                episode_return,
                final_pose,
                ..
            } => match open.take() {
                Some(mut r) if r.episode == episode => {
                    r.outcome = outcome;
                    r.step_count = step_count;
                    r.episode_return = episode_return;
                    r.final_pose = final_pose;
                    done.push(r);
                }
                _ => return Err(Error::Load(format!("line {}: outcome without header", lineno + 1))),
            },
        }
    }
    if open.is_some() {
        return Err(Error::Load("record stream ends inside an episode".into()));
    }
    Ok(done)
}
