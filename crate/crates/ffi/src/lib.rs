//! C ABI over the `stnav` library.
//!
//! Environments and agents are opaque heap handles released with their
//! `*_free` function. Every fallible call returns a [`StnavStatus`]; on
//! failure [`stnav_last_error`] describes what went wrong on this thread.
//! Output pointers are written only on success.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use stnav::nn::{AgentCheckpoint, ObsFeatures};
use stnav::scan::{compute_tagds, min_pool, IcpParams, PooledScan, RawScan, TagdParams, D_MAX, N_GROUPS, POOLED_BEAMS, RAW_BEAMS};
use stnav::sim::{Action, Env, EnvParams, EpisodeConfig, Terminal};
use stnav::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StnavStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad argument or an operation not valid in the current state.
    Usage = 2,
    Config = 3,
    Load = 4,
    Divergence = 5,
    /// Buffer or tensor of the wrong length.
    Shape = 6,
    Internal = 7,
    Panic = 8,
}

/// Episode state after a step.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StnavTerminal {
    Running = 0,
    Collision = 1,
    Timeout = 2,
    Goal = 3,
}

impl From<Terminal> for StnavTerminal {
    fn from(t: Terminal) -> Self {
        match t {
            Terminal::None => StnavTerminal::Running,
            Terminal::Collision => StnavTerminal::Collision,
            Terminal::Timeout => StnavTerminal::Timeout,
            Terminal::Goal => StnavTerminal::Goal,
        }
    }
}

/// Opaque simulator episode.
pub struct StnavEnv {
    env: Env,
}

/// Opaque trained policy.
pub struct StnavAgent {
    checkpoint: AgentCheckpoint,
}

pub const STNAV_RAW_BEAMS: usize = 1440;
pub const STNAV_POOLED_BEAMS: usize = 180;
pub const STNAV_N_GROUPS: usize = 30;
const _: () = assert!(STNAV_RAW_BEAMS == RAW_BEAMS && STNAV_POOLED_BEAMS == POOLED_BEAMS && STNAV_N_GROUPS == N_GROUPS);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> StnavStatus {
    match err {
        Error::Usage(_) => StnavStatus::Usage,
        Error::Config(_) => StnavStatus::Config,
        Error::Load(_) => StnavStatus::Load,
        Error::Divergence { .. } => StnavStatus::Divergence,
        Error::Shape(_) => StnavStatus::Shape,
        _ => StnavStatus::Internal,
    }
}

struct Fail(StnavStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> StnavStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StnavStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            StnavStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(StnavStatus::NullPointer, format!("{what} is null"))
}

unsafe fn input<'a>(p: *const f64, len: usize, expected: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != expected {
        return Err(Fail(StnavStatus::Shape, format!("{what} holds {len} values, expected {expected}")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, expected: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < expected {
        return Err(Fail(StnavStatus::Shape, format!("{what} holds {len} values, needs {expected}")));
    }
    Ok(std::slice::from_raw_parts_mut(p, expected))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(StnavStatus::Usage, format!("{what} is not UTF-8")))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn stnav_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn stnav_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New episode with default parameters: uniformly drawn scene, exactly
/// `n_dynamic` moving and `n_static` standing pedestrians at `ped_speed`.
#[no_mangle]
pub unsafe extern "C" fn stnav_env_new(
    seed: u64,
    n_dynamic: u32,
    n_static: u32,
    ped_speed: f64,
    out: *mut *mut StnavEnv,
) -> StnavStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = EpisodeConfig {
            n_dynamic: (n_dynamic as usize, n_dynamic as usize),
            n_static: (n_static as usize, n_static as usize),
            ped_speed: (ped_speed, ped_speed),
            ..EpisodeConfig::new(seed)
        };
        let env = Env::new(EnvParams::default(), config)?;
        *out = Box::into_raw(Box::new(StnavEnv { env }));
        Ok(())
    })
}

/// New episode from JSON. `params_json` (environment parameters) may be
/// null for the defaults; `episode_json` is the episode configuration.
#[no_mangle]
pub unsafe extern "C" fn stnav_env_new_json(
    params_json: *const c_char,
    episode_json: *const c_char,
    out: *mut *mut StnavEnv,
) -> StnavStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params: EnvParams = if params_json.is_null() {
            EnvParams::default()
        } else {
            serde_json::from_str(text(params_json, "params_json")?)
                .map_err(|e| Fail(StnavStatus::Config, format!("params_json: {e}")))?
        };
        let config: EpisodeConfig = serde_json::from_str(text(episode_json, "episode_json")?)
            .map_err(|e| Fail(StnavStatus::Config, format!("episode_json: {e}")))?;
        let env = Env::new(params, config)?;
        *out = Box::into_raw(Box::new(StnavEnv { env }));
        Ok(())
    })
}

/// Releases an environment; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn stnav_env_free(env: *mut StnavEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Advances one control step with `(v, w)`, clipped to the robot bounds.
/// Stepping a finished episode is a usage error.
#[no_mangle]
pub unsafe extern "C" fn stnav_env_step(
    env: *mut StnavEnv,
    v: f64,
    w: f64,
    out_reward: *mut f64,
    out_terminal: *mut StnavTerminal,
) -> StnavStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        if !(v.is_finite() && w.is_finite()) {
            return Err(Fail(StnavStatus::Usage, "action is not finite".into()));
        }
        let (_, outcome) = env.env.step(Action::new(v, w))?;
        if let Some(r) = out_reward.as_mut() {
            *r = outcome.reward.total;
        }
        if let Some(t) = out_terminal.as_mut() {
            *t = outcome.terminal.into();
        }
        Ok(())
    })
}

/// Robot pose `[x, y, heading]` in the world frame.
#[no_mangle]
pub unsafe extern "C" fn stnav_env_pose(env: *const StnavEnv, out: *mut f64, len: usize) -> StnavStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        let o = output(out, len, 3, "out")?;
        let p = env.env.robot().pose;
        o.copy_from_slice(&[p.position.x, p.position.y, p.heading]);
        Ok(())
    })
}

/// Current pooled scan ranges (180 values).
#[no_mangle]
pub unsafe extern "C" fn stnav_env_scan(env: *const StnavEnv, out: *mut f64, len: usize) -> StnavStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        let o = output(out, len, POOLED_BEAMS, "out")?;
        for (dst, p) in o.iter_mut().zip(&env.env.observation().scan.points) {
            *dst = p.polar.r;
        }
        Ok(())
    })
}

/// Current TAGD displacements (30 values).
#[no_mangle]
pub unsafe extern "C" fn stnav_env_tagd_displacements(env: *const StnavEnv, out: *mut f64, len: usize) -> StnavStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        let o = output(out, len, N_GROUPS, "out")?;
        for (dst, t) in o.iter_mut().zip(&env.env.observation().tagds) {
            *dst = t.displacement();
        }
        Ok(())
    })
}

/// Steps taken so far in the episode.
#[no_mangle]
pub unsafe extern "C" fn stnav_env_step_count(env: *const StnavEnv, out: *mut usize) -> StnavStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        let o = out.as_mut().ok_or_else(|| null("out"))?;
        *o = env.env.step_count();
        Ok(())
    })
}

/// Loads a checkpoint file written by the trainer.
#[no_mangle]
pub unsafe extern "C" fn stnav_agent_load(path: *const c_char, out: *mut *mut StnavAgent) -> StnavStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let checkpoint = AgentCheckpoint::load(Path::new(text(path, "path")?))?;
        *out = Box::into_raw(Box::new(StnavAgent { checkpoint }));
        Ok(())
    })
}

/// Releases an agent; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn stnav_agent_free(agent: *mut StnavAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}

/// Deterministic action `(v, w)` for the environment's current observation.
#[no_mangle]
pub unsafe extern "C" fn stnav_agent_act(
    agent: *const StnavAgent,
    env: *const StnavEnv,
    out_v: *mut f64,
    out_w: *mut f64,
) -> StnavStatus {
    guard(|| {
        let agent = agent.as_ref().ok_or_else(|| null("agent"))?;
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        if out_v.is_null() || out_w.is_null() {
            return Err(null("action output"));
        }
        let actor = &agent.checkpoint.actor;
        let features = ObsFeatures::from_observation(env.env.observation(), actor.config.ablation)?;
        let a = actor.act(&features)?;
        *out_v = a.v;
        *out_w = a.w;
        Ok(())
    })
}

/// Min-pools 1,440 raw ranges into 180, clamped to 3.5 m.
#[no_mangle]
pub unsafe extern "C" fn stnav_min_pool(raw: *const f64, raw_len: usize, out: *mut f64, out_len: usize) -> StnavStatus {
    guard(|| {
        let raw = input(raw, raw_len, RAW_BEAMS, "raw")?;
        let o = output(out, out_len, POOLED_BEAMS, "out")?;
        let pooled = min_pool(&RawScan {
            ranges: raw.to_vec(),
            timestamp_step: 0,
        })?;
        for (dst, p) in o.iter_mut().zip(&pooled.points) {
            *dst = p.polar.r;
        }
        Ok(())
    })
}

/// TAGD displacements (30 values) from two consecutive pooled range scans
/// at the standard bearings, with or without ICP alignment.
#[no_mangle]
pub unsafe extern "C" fn stnav_tagd_displacements(
    prev: *const f64,
    prev_len: usize,
    current: *const f64,
    current_len: usize,
    use_icp: bool,
    out: *mut f64,
    out_len: usize,
) -> StnavStatus {
    guard(|| {
        let prev = input(prev, prev_len, POOLED_BEAMS, "prev")?;
        let current = input(current, current_len, POOLED_BEAMS, "current")?;
        let o = output(out, out_len, N_GROUPS, "out")?;
        if prev.iter().chain(current).any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Fail(StnavStatus::Usage, "ranges must be finite and non-negative".into()));
        }
        let prev = PooledScan::from_ranges(prev, 0, D_MAX)?;
        let current = PooledScan::from_ranges(current, 1, D_MAX)?;
        let icp = if use_icp { IcpParams::default() } else { IcpParams::disabled() };
        let result = compute_tagds(&prev, &current, &TagdParams::default(), &icp);
        for (dst, t) in o.iter_mut().zip(&result.tagds) {
            *dst = t.displacement();
        }
        Ok(())
    })
}
