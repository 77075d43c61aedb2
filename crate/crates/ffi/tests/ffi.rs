use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use stnav::nn::{Ablation, AgentCheckpoint, NetworkConfig, ObsFeatures};
use stnav::rl::{Agent, DdpgConfig};
use stnav::scan::{compute_tagds, min_pool, IcpParams, PooledScan, RawScan, TagdParams, D_MAX};
use stnav::sim::{Action, Env, EnvParams, EpisodeConfig};
use stnav_ffi::*;

fn last_error() -> String {
    let p = stnav_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn new_env(seed: u64) -> *mut StnavEnv {
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { stnav_env_new(seed, 2, 1, 0.6, &mut env) }, StnavStatus::Ok);
    assert!(!env.is_null());
    env
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(stnav_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn env_matches_the_library() {
    let env = new_env(11);
    let config = EpisodeConfig {
        n_dynamic: (2, 2),
        n_static: (1, 1),
        ped_speed: (0.6, 0.6),
        ..EpisodeConfig::new(11)
    };
    let mut reference = Env::new(EnvParams::default(), config).unwrap();
    let mut scan = [0.0; STNAV_POOLED_BEAMS];
    let mut tagd = [0.0; STNAV_N_GROUPS];
    let mut pose = [0.0; 3];
    for k in 0..40 {
        let a = Action::new(0.4 + 0.01 * k as f64, 0.3 * ((k % 7) as f64 - 3.0));
        let (mut reward, mut terminal) = (f64::NAN, StnavTerminal::Running);
        assert_eq!(unsafe { stnav_env_step(env, a.v, a.w, &mut reward, &mut terminal) }, StnavStatus::Ok);
        let (obs, out) = reference.step(a).unwrap();
        assert_eq!(reward.to_bits(), out.reward.total.to_bits());
        assert_eq!(terminal, StnavTerminal::from(out.terminal));

        unsafe {
            assert_eq!(stnav_env_scan(env, scan.as_mut_ptr(), scan.len()), StnavStatus::Ok);
            assert_eq!(stnav_env_tagd_displacements(env, tagd.as_mut_ptr(), tagd.len()), StnavStatus::Ok);
            assert_eq!(stnav_env_pose(env, pose.as_mut_ptr(), pose.len()), StnavStatus::Ok);
        }
        assert_eq!(scan.to_vec(), obs.scan.ranges());
        let expected: Vec<f64> = obs.tagds.iter().map(|t| t.displacement()).collect();
        assert_eq!(tagd.to_vec(), expected);
        let p = reference.robot().pose;
        assert_eq!(pose, [p.position.x, p.position.y, p.heading]);
        if terminal != StnavTerminal::Running {
            break;
        }
    }
    let mut steps = 0usize;
    assert_eq!(unsafe { stnav_env_step_count(env, &mut steps) }, StnavStatus::Ok);
    assert_eq!(steps, reference.step_count());
    unsafe { stnav_env_free(env) };
}

#[test]
fn stepping_a_finished_episode_is_usage_error() {
    let env = new_env(3);
    let mut terminal = StnavTerminal::Running;
    // full speed, hard turn: ends in a wall or at the goal well before timeout
    for _ in 0..200 {
        let s = unsafe { stnav_env_step(env, 1.0, 0.0, ptr::null_mut(), &mut terminal) };
        if s != StnavStatus::Ok {
            assert_eq!(s, StnavStatus::Usage);
            assert!(!last_error().is_empty());
            unsafe { stnav_env_free(env) };
            return;
        }
    }
    panic!("episode never ended (last state {terminal:?})");
}

#[test]
fn null_and_short_buffers_are_rejected() {
    unsafe {
        assert_eq!(stnav_env_new(0, 1, 1, 0.5, ptr::null_mut()), StnavStatus::NullPointer);
        assert!(last_error().contains("null"));
        assert_eq!(stnav_env_step(ptr::null_mut(), 0.0, 0.0, ptr::null_mut(), ptr::null_mut()), StnavStatus::NullPointer);

        let env = new_env(1);
        let mut short = [0.0; 10];
        assert_eq!(stnav_env_scan(env, short.as_mut_ptr(), short.len()), StnavStatus::Shape);
        assert_eq!(stnav_env_step(env, f64::NAN, 0.0, ptr::null_mut(), ptr::null_mut()), StnavStatus::Usage);
        stnav_env_free(env);
        stnav_env_free(ptr::null_mut());
        stnav_agent_free(ptr::null_mut());
    }
}

#[test]
fn bad_episode_config_is_config_error() {
    let bad = CString::new(r#"{"seed": 1, "scenes": [], "n_dynamic": [1, 1], "n_static": [0, 0], "ped_speed": [0.5, 0.5]}"#).unwrap();
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { stnav_env_new_json(ptr::null(), bad.as_ptr(), &mut env) }, StnavStatus::Config);
    assert!(env.is_null());
    let garbage = CString::new("{not json").unwrap();
    assert_eq!(unsafe { stnav_env_new_json(ptr::null(), garbage.as_ptr(), &mut env) }, StnavStatus::Config);

    let ok = CString::new(r#"{"seed": 4, "scenes": ["corridor"], "n_dynamic": [0, 0], "n_static": [0, 0], "ped_speed": [0.5, 0.5]}"#).unwrap();
    assert_eq!(unsafe { stnav_env_new_json(ptr::null(), ok.as_ptr(), &mut env) }, StnavStatus::Ok);
    unsafe { stnav_env_free(env) };
}

#[test]
fn min_pool_matches_the_library() {
    let raw: Vec<f64> = (0..STNAV_RAW_BEAMS).map(|k| 0.3 + (k as f64 * 0.37).sin().abs() * 5.0).collect();
    let mut out = [0.0; STNAV_POOLED_BEAMS];
    let s = unsafe { stnav_min_pool(raw.as_ptr(), raw.len(), out.as_mut_ptr(), out.len()) };
    assert_eq!(s, StnavStatus::Ok);
    let expected = min_pool(&RawScan {
        ranges: raw.clone(),
        timestamp_step: 0,
    })
    .unwrap()
    .ranges();
    assert_eq!(out.to_vec(), expected);
    assert!(out.iter().all(|&r| r <= D_MAX));

    let s = unsafe { stnav_min_pool(raw.as_ptr(), 100, out.as_mut_ptr(), out.len()) };
    assert_eq!(s, StnavStatus::Shape);
}

#[test]
fn tagd_matches_the_library() {
    let prev: Vec<f64> = (0..STNAV_POOLED_BEAMS).map(|i| 1.5 + 0.5 * (i as f64 * 0.1).cos()).collect();
    let cur: Vec<f64> = (0..STNAV_POOLED_BEAMS).map(|i| 1.5 + 0.5 * (i as f64 * 0.1 + 0.05).cos()).collect();
    let mut out = [0.0; STNAV_N_GROUPS];
    for use_icp in [true, false] {
        let s = unsafe {
            stnav_tagd_displacements(prev.as_ptr(), prev.len(), cur.as_ptr(), cur.len(), use_icp, out.as_mut_ptr(), out.len())
        };
        assert_eq!(s, StnavStatus::Ok);
        let icp = if use_icp { IcpParams::default() } else { IcpParams::disabled() };
        let expected = compute_tagds(
            &PooledScan::from_ranges(&prev, 0, D_MAX).unwrap(),
            &PooledScan::from_ranges(&cur, 1, D_MAX).unwrap(),
            &TagdParams::default(),
            &icp,
        )
        .displacements();
        assert_eq!(out.to_vec(), expected);
    }
    let same = unsafe {
        stnav_tagd_displacements(prev.as_ptr(), prev.len(), prev.as_ptr(), prev.len(), true, out.as_mut_ptr(), out.len())
    };
    assert_eq!(same, StnavStatus::Ok);
    assert!(out.iter().all(|&d| d == 0.0));
}

#[test]
fn agent_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("agent.json");
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
    let agent = Agent::new(NetworkConfig::reduced(Ablation::None), &DdpgConfig::default(), &mut rng);
    agent.checkpoint().save(&path).unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { stnav_agent_load(c_path.as_ptr(), &mut handle) }, StnavStatus::Ok);
    let env = new_env(8);
    let (mut v, mut w) = (f64::NAN, f64::NAN);
    assert_eq!(unsafe { stnav_agent_act(handle, env, &mut v, &mut w) }, StnavStatus::Ok);

    let reference = Env::new(
        EnvParams::default(),
        EpisodeConfig {
            n_dynamic: (2, 2),
            n_static: (1, 1),
            ped_speed: (0.6, 0.6),
            ..EpisodeConfig::new(8)
        },
    )
    .unwrap();
    let ckpt = AgentCheckpoint::load(&path).unwrap();
    let features = ObsFeatures::from_observation(reference.observation(), Ablation::None).unwrap();
    let a = ckpt.actor.act(&features).unwrap();
    assert_eq!((v.to_bits(), w.to_bits()), (a.v.to_bits(), a.w.to_bits()));
    unsafe {
        stnav_agent_free(handle);
        stnav_env_free(env);
    }

    let missing = CString::new(dir.path().join("none.json").to_str().unwrap()).unwrap();
    let mut h2 = ptr::null_mut();
    assert_eq!(unsafe { stnav_agent_load(missing.as_ptr(), &mut h2) }, StnavStatus::Load);
    assert!(h2.is_null());
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/stnav.h");
    let header = std::fs::read_to_string(&header_path).unwrap();
    for name in [
        "stnav_last_error",
        "stnav_env_new",
        "stnav_env_step",
        "stnav_env_free",
        "stnav_agent_load",
        "stnav_agent_act",
        "stnav_min_pool",
        "stnav_tagd_displacements",
        "typedef struct StnavEnv StnavEnv",
        "STNAV_STATUS_DIVERGENCE = 5",
        "#define STNAV_POOLED_BEAMS 180",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
    // a C compiler is optional in the build environment
    if let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(&header_path).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
