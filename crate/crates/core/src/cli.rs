//! The `stnav` command line: train, eval, viz, tagd-demo and robustness.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    export_visualization, read_records, run_eval, run_robustness, run_sweep, tagd_demo, write_record,
    write_visualization, GroupKind, RecordDetail, SuiteConfig, SweepAxis, TagdDemoConfig,
};
use crate::nn::{Ablation, AgentCheckpoint, NetworkConfig};
use crate::rl::{resume, train, TrainerConfig, TrainerState};
use crate::sim::EnvParams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_LOAD: i32 = 4;
pub const EXIT_DIVERGENCE: i32 = 5;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) => EXIT_USAGE,
        Error::Config(_) => EXIT_CONFIG,
        Error::Load(_) => EXIT_LOAD,
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        _ => EXIT_FAILURE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NetworkSize {
    #[default]
    Full,
    Reduced,
}

/// The TOML run configuration. Every section is optional. `ablation` and
/// `network` pick the trainer's network; `[env]` replaces the environment
/// of both `[trainer]` and `[suite]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub ablation: Ablation,
    pub network: NetworkSize,
    pub env: Option<EnvParams>,
    pub trainer: TrainerConfig,
    pub suite: SuiteConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            ablation: Ablation::None,
            network: NetworkSize::Full,
            env: None,
            trainer: TrainerConfig::default(),
            suite: SuiteConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "config schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.resolve();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn resolve(&mut self) {
        self.set_network(self.ablation, self.network);
        if let Some(env) = &self.env {
            self.trainer.env = env.clone();
            self.suite.env = env.clone();
        }
    }

    fn set_network(&mut self, ablation: Ablation, size: NetworkSize) {
        self.ablation = ablation;
        self.network = size;
        self.trainer.network = match size {
            NetworkSize::Full => NetworkConfig::full(ablation),
            NetworkSize::Reduced => NetworkConfig::reduced(ablation),
        };
    }
}

#[derive(Debug, Parser)]
#[command(name = "stnav", version, about = "Lidar-only crowd navigation with spatiotemporal attention")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train an agent; writes a log, checkpoints and a resumable state.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a seeded suite.
    Eval(EvalArgs),
    /// Render one logged episode as SVG plus a weight table.
    Viz(VizArgs),
    /// Print TAGD displacements for a synthetic moving-obstacle corridor.
    TagdDemo(TagdDemoArgs),
    /// Baseline, ICP-disabled and open-space evaluations with deltas.
    Robustness(RobustnessArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_ablation)]
    ablation: Option<Ablation>,
    #[arg(long, value_enum)]
    network: Option<NetworkSize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long, default_value = "runs/train")]
    out_dir: PathBuf,
    /// Continue from a saved trainer state; other options must be absent.
    #[arg(long, conflicts_with_all = ["config", "seed", "ablation", "network", "episodes"])]
    resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SuiteArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// First episode seed of the suite.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Pedestrian speed in m/s (fixed for every episode).
    #[arg(long)]
    ped_speed: Option<f64>,
    /// Dynamic pedestrians per episode.
    #[arg(long = "dyn")]
    n_dynamic: Option<usize>,
    /// Static pedestrians per episode.
    #[arg(long = "stat")]
    n_static: Option<usize>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    suite: SuiteArgs,
    /// Expected ablation of the checkpoint.
    #[arg(long, value_parser = parse_ablation)]
    ablation: Option<Ablation>,
    #[arg(long, value_enum)]
    detail: Option<RecordDetail>,
    /// Sweep pedestrian speed or count instead of a single suite.
    #[arg(long, value_enum)]
    sweep: Option<SweepAxis>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VizArgs {
    /// Episode log written by `eval`.
    #[arg(long)]
    record: PathBuf,
    #[arg(long)]
    episode: Option<usize>,
    /// Step range `a..b`; all steps by default.
    #[arg(long, value_parser = parse_range)]
    steps: Option<std::ops::Range<usize>>,
    #[arg(long, default_value = "runs/viz")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct TagdDemoArgs {
    #[arg(long, default_value_t = 0.6)]
    obstacle_speed: f64,
    #[arg(long, default_value_t = 0.5)]
    robot_speed: f64,
    #[arg(long, default_value_t = 0.3)]
    robot_turn: f64,
    /// Uniform range noise half-width in meters.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 5)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the full report as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct RobustnessArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    suite: SuiteArgs,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_ablation(s: &str) -> std::result::Result<Ablation, String> {
    s.parse::<Ablation>().map_err(|e| e.to_string())
}

fn parse_range(s: &str) -> std::result::Result<std::ops::Range<usize>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected a..b, got {s:?}"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("range start: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("range end: {e}"))?;
    if a >= b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok(a..b)
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit status.
pub fn cli_main<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Viz(a) => cmd_viz(a, out),
        Command::TagdDemo(a) => cmd_tagd_demo(a, out),
        Command::Robustness(a) => cmd_robustness(a, out),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn cmd_train(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let outcome = if let Some(state_path) = &a.resume {
        let state = TrainerState::load(state_path)?;
        writeln!(out, "resuming at episode {}", state.next_episode)?;
        resume(state, Some(&a.out_dir))?
    } else {
        let mut cfg = load_config(a.config.as_deref())?;
        let ablation = a.ablation.unwrap_or(cfg.ablation);
        let size = a.network.unwrap_or(cfg.network);
        cfg.set_network(ablation, size);
        if let Some(seed) = a.seed {
            cfg.trainer.seed = seed;
        }
        if let Some(n) = a.episodes {
            cfg.trainer.episodes = n;
        }
        fs::create_dir_all(&a.out_dir)?;
        fs::write(
            a.out_dir.join("config.toml"),
            toml::to_string(&cfg).map_err(|e| Error::Config(e.to_string()))?,
        )?;
        train(cfg.trainer, Some(&a.out_dir))?
    };
    let s = &outcome.state;
    writeln!(
        out,
        "trained {} episodes ({} steps), curriculum level {}{}",
        s.next_episode,
        s.total_steps,
        s.curriculum.level,
        if outcome.stopped_early { ", stopped early" } else { "" }
    )?;
    if let Some((ep, m)) = outcome.evaluations.last() {
        writeln!(
            out,
            "last eval at episode {ep}: SR {:.3} CR {:.3} TR {:.3}",
            m.success_rate, m.collision_rate, m.timeout_rate
        )?;
    }
    if let Some(b) = &s.best {
        writeln!(out, "best: episode {} level {} SR {:.3}", b.episode, b.level, b.success_rate)?;
    }
    writeln!(out, "outputs in {}", a.out_dir.display())?;
    Ok(())
}

fn suite_from(args: &SuiteArgs) -> Result<SuiteConfig> {
    let cfg = load_config(args.config.as_deref())?;
    let mut suite = cfg.suite;
    if let Some(seed) = args.seed {
        suite.seed_base = seed;
    }
    if let Some(n) = args.episodes {
        suite.episodes = n;
    }
    if let Some(v) = args.ped_speed {
        if !(v >= 0.0) {
            return Err(Error::Usage(format!("--ped-speed must be non-negative, got {v}")));
        }
        suite.ped_speed = (v, v);
    }
    if let Some(n) = args.n_dynamic {
        suite.n_dynamic = (n, n);
    }
    if let Some(n) = args.n_static {
        suite.n_static = (n, n);
    }
    if args.sequential {
        suite.parallel = false;
    }
    suite.validate()?;
    Ok(suite)
}

fn load_checkpoint(path: &Path, expected: Option<Ablation>) -> Result<AgentCheckpoint> {
    let ckpt = AgentCheckpoint::load(path)?;
    if let Some(ab) = expected {
        if ab != ckpt.config.ablation {
            return Err(Error::Load(format!(
                "checkpoint was trained with ablation {} but {} was requested",
                ckpt.config.ablation.name(),
                ab.name()
            )));
        }
    }
    Ok(ckpt)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let ckpt = load_checkpoint(&a.checkpoint, a.ablation)?;
    let mut suite = suite_from(&a.suite)?;
    if let Some(d) = a.detail {
        suite.detail = d;
    }
    if let Some(axis) = a.sweep {
        let contradictory = match axis {
            SweepAxis::Speed => a.suite.ped_speed.is_some(),
            SweepAxis::Count => a.suite.n_dynamic.is_some() || a.suite.ped_speed.is_some(),
        };
        if contradictory {
            return Err(Error::Usage("--sweep varies a value that was also fixed on the command line".into()));
        }
        let points = run_sweep(&ckpt.actor, &suite, axis, &axis.default_values())?;
        writeln!(out, "value\tSR\tCR\tTR\tnav_time_s")?;
        for p in &points {
            let m = p.summary;
            writeln!(
                out,
                "{}\t{:.3}\t{:.3}\t{:.3}\t{}",
                p.value,
                m.success_rate,
                m.collision_rate,
                m.timeout_rate,
                m.mean_nav_time.map_or("-".into(), |t| format!("{t:.2}"))
            )?;
        }
        if let Some(dir) = &a.out_dir {
            write_json(&dir.join("sweep.json"), &points)?;
        }
        return Ok(());
    }

    let report = run_eval(&ckpt.actor, &suite)?;
    writeln!(out, "{}", serde_json::to_string_pretty(&report.summary)?)?;
    if let Some(dir) = &a.out_dir {
        write_json(&dir.join("summary.json"), &report.summary)?;
        let mut w = BufWriter::new(File::create(dir.join("records.jsonl"))?);
        for r in &report.records {
            write_record(&mut w, r)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn cmd_viz(a: VizArgs, out: &mut dyn Write) -> Result<()> {
    let file = File::open(&a.record).map_err(|e| Error::Load(format!("{}: {e}", a.record.display())))?;
    let records = read_records(BufReader::new(file))?;
    let record = match a.episode {
        Some(ep) => records.iter().find(|r| r.episode == ep),
        None => records.first(),
    }
    .ok_or_else(|| Error::Usage("requested episode is not in the record file".into()))?;
    let range = a.steps.unwrap_or(0..record.step_count.max(1));
    let viz = export_visualization(record, range.clone())?;
    let stem = format!("episode{}_steps{}-{}", record.episode, range.start, range.end);
    let (svg, csv) = write_visualization(&viz, &a.out_dir, &stem)?;
    writeln!(out, "{}\n{}", svg.display(), csv.display())?;
    Ok(())
}

fn cmd_tagd_demo(a: TagdDemoArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = TagdDemoConfig {
        obstacle_speed: a.obstacle_speed,
        robot_speed: a.robot_speed,
        robot_turn: a.robot_turn,
        noise: a.noise,
        steps: a.steps,
        seed: a.seed,
    };
    let report = tagd_demo(&cfg)?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
        return Ok(());
    }
    writeln!(out, "step\tgroup\tkind\tdisplacement_m")?;
    for r in report.rows.iter().filter(|r| r.kind != GroupKind::Mixed) {
        let kind = if r.kind == GroupKind::Obstacle { "obstacle" } else { "static" };
        writeln!(out, "{}\t{}\t{kind}\t{:.4}", r.step, r.group, r.displacement)?;
    }
    writeln!(
        out,
        "obstacle displacement {:.4} m/step (min {:.4}, max {:.4}; expected {:.4})",
        report.obstacle_mean, report.obstacle_min, report.obstacle_max, report.expected
    )?;
    writeln!(
        out,
        "static displacement {:.4} m/step (max {:.4})",
        report.static_mean, report.static_max
    )?;
    Ok(())
}

fn cmd_robustness(a: RobustnessArgs, out: &mut dyn Write) -> Result<()> {
    let ckpt = load_checkpoint(&a.checkpoint, None)?;
    let suite = suite_from(&a.suite)?;
    let r = run_robustness(&ckpt.actor, &suite)?;
    writeln!(out, "mode\tSR\tCR\tTR\tdelta_SR")?;
    for (name, m, d) in [
        ("baseline", &r.baseline, 0.0),
        ("icp_disabled", &r.icp_disabled, r.icp_disabled_delta),
        ("open_space", &r.open_space, r.open_space_delta),
    ] {
        writeln!(
            out,
            "{name}\t{:.3}\t{:.3}\t{:.3}\t{:+.3}",
            m.success_rate, m.collision_rate, m.timeout_rate, d
        )?;
    }
    if let Some(dir) = &a.out_dir {
        write_json(&dir.join("robustness.json"), &r)?;
    }
    Ok(())
}
