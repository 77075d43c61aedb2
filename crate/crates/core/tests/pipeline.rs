use std::io::BufReader;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stnav::eval::{read_records, run_eval, write_record, RecordDetail, ScriptedPolicy, SuiteConfig};
use stnav::geometry::{Point2, Pose2, Rect};
use stnav::nn::{Ablation, NetworkConfig};
use stnav::rl::{train, TrainerConfig};
use stnav::scan::{icp_align, min_pool, IcpParams, IcpStatus};
use stnav::sim::{raycast_lidar, step_robot, Action, Env, EnvParams, EpisodeConfig, LidarParams, SceneKind, DT};

fn tiny_trainer(seed: u64) -> TrainerConfig {
    let mut cfg = TrainerConfig {
        seed,
        episodes: 6,
        warmup: 64,
        eval_period: 3,
        eval_episodes: 2,
        scenes: vec![SceneKind::Corridor, SceneKind::Office],
        network: NetworkConfig::reduced(Ablation::None),
        ..TrainerConfig::default()
    };
    cfg.ddpg.batch_size = 16;
    cfg
}

#[test]
fn training_is_reproducible() {
    let a = train(tiny_trainer(3), None).unwrap();
    let b = train(tiny_trainer(3), None).unwrap();
    assert_eq!(a.state, b.state);
    assert_eq!(a.log, b.log);
    assert!(a.state.total_steps > 64, "no updates happened");
    let c = train(tiny_trainer(4), None).unwrap();
    assert_ne!(a.state.agent, c.state.agent);
}

#[test]
fn records_round_trip_through_jsonl() {
    let policy = ScriptedPolicy {
        actions: vec![Action::new(0.6, 0.4), Action::new(0.8, -0.2)],
    };
    for detail in [RecordDetail::Summary, RecordDetail::Steps, RecordDetail::Full] {
        let suite = SuiteConfig {
            episodes: 3,
            detail,
            ..SuiteConfig::default()
        };
        let report = run_eval(&policy, &suite).unwrap();
        let mut buf = Vec::new();
        for r in &report.records {
            write_record(&mut buf, r).unwrap();
        }
        let back = read_records(BufReader::new(&buf[..])).unwrap();
        assert_eq!(back, report.records, "{detail:?}");
    }
}

#[test]
fn env_replays_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let script: Vec<Action> = (0..150).map(|_| Action::new(rng.random_range(0.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let config = EpisodeConfig {
        n_dynamic: (3, 3),
        ..EpisodeConfig::new(17)
    };
    let trace = || {
        let mut env = Env::new(EnvParams::default(), config.clone()).unwrap();
        let mut out = Vec::new();
        for &a in &script {
            let (obs, step) = env.step(a).unwrap();
            out.push(serde_json::to_string(&(obs, step.reward)).unwrap());
            if step.terminal.is_done() {
                break;
            }
        }
        out
    };
    assert_eq!(trace(), trace());
}

#[test]
fn icp_tracks_real_robot_motion() {
    // pooled scans of a cluttered room before and after one control step
    let walls = vec![
        Rect::new(-3.0, -2.2, 3.0, -2.0),
        Rect::new(-3.0, 2.0, 3.0, 2.2),
        Rect::new(-3.2, -2.2, -3.0, 2.2),
        Rect::new(3.0, -2.2, 3.2, 2.2),
        Rect::new(0.8, 0.5, 1.2, 1.1),
        Rect::new(-1.5, -1.4, -1.0, -1.0),
    ];
    let lidar = LidarParams::noise_free();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut icp_err, mut raw_err) = (Vec::new(), Vec::new());
    for _ in 0..20 {
        let pose = Pose2::new(rng.random_range(-1.0..0.5), rng.random_range(-0.5..0.5), rng.random_range(-3.0..3.0));
        let next = step_robot(pose, Action::new(rng.random_range(0.0..1.0), rng.random_range(-1.5..1.5)), DT);
        let prev = min_pool(&raycast_lidar(&walls, pose, &lidar, 0, &mut rng)).unwrap();
        let cur = min_pool(&raycast_lidar(&walls, next, &lidar, 1, &mut rng)).unwrap();
        let out = icp_align(&prev, &cur, &IcpParams::default());
        // true map from the previous robot frame into the current one
        let truth = next.to_world().inverse().compose(&pose.to_world());
        assert_ne!(out.status, IcpStatus::Unavailable);
        let probe = Point2::new(1.0, 0.5);
        icp_err.push(out.transform.apply(probe).distance(truth.apply(probe)));
        raw_err.push(probe.distance(truth.apply(probe)));
    }
    // min pooling moves each point to its block center, which bounds how
    // well two differently sampled scans can agree
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&icp_err) < 0.25 * mean(&raw_err), "{icp_err:?}");
    assert!(icp_err.iter().all(|&e| e < 0.06), "{icp_err:?}");
}
