use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::{Actor, ObsFeatures};
use crate::sim::{Action, V_MAX, W_MAX};

/// Gaussian noise scale annealed linearly from `sigma_start` to `sigma_end`
/// over the first `anneal_fraction` of training. Sigma is in units of half
/// the action range, as if both actions were rescaled to [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSchedule {
    pub sigma_start: f64,
    pub sigma_end: f64,
    pub anneal_fraction: f64,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            sigma_start: 0.3,
            sigma_end: 0.05,
            anneal_fraction: 1.0 / 3.0,
        }
    }
}

impl NoiseSchedule {
    pub fn sigma(&self, episode: usize, total_episodes: usize) -> f64 {
        let horizon = self.anneal_fraction * total_episodes as f64;
        if horizon <= 0.0 {
            return self.sigma_end;
        }
        let t = episode as f64 / horizon;
        if t >= 1.0 {
            return self.sigma_end;
        }
        self.sigma_start + (self.sigma_end - self.sigma_start) * t
    }
}

/// Actor output, plus clipped Gaussian noise of scale `sigma` when exploring.
pub fn select_action(actor: &Actor, obs: &ObsFeatures, sigma: f64, explore: bool, rng: &mut impl Rng) -> Result<Action> {
    let a = actor.act(obs)?;
    if !explore || sigma <= 0.0 {
        return Ok(a);
    }
    Ok(perturb(a, sigma, rng))
}

pub fn perturb(a: Action, sigma: f64, rng: &mut impl Rng) -> Action {
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let v = a.v + sigma * 0.5 * V_MAX * unit.sample(rng);
    let w = a.w + sigma * W_MAX * unit.sample(rng);
    Action::new(v, w).clipped()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Ablation, NetworkConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn schedule_endpoints() {
        let s = NoiseSchedule::default();
        assert_eq!(s.sigma(0, 300), 0.3);
        assert!((s.sigma(50, 300) - 0.175).abs() < 1e-12);
        assert_eq!(s.sigma(100, 300), 0.05);
        assert_eq!(s.sigma(299, 300), 0.05);
    }

    #[test]
    fn noise_off_and_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let actor = Actor::init(NetworkConfig::reduced(Ablation::A2), &mut rng);
        let obs = ObsFeatures {
            scan_xy: vec![1.0; 360],
            prev_scan_xy: Vec::new(),
            tagd: Vec::new(),
            waypoints: [0.3; 10],
        };
        let det = actor.act(&obs).unwrap();
        assert_eq!(select_action(&actor, &obs, 0.3, false, &mut rng).unwrap(), det);
        assert_eq!(select_action(&actor, &obs, 0.0, true, &mut rng).unwrap(), det);
        for _ in 0..1000 {
            let a = select_action(&actor, &obs, 2.0, true, &mut rng).unwrap();
            assert!((0.0..=V_MAX).contains(&a.v) && (-W_MAX..=W_MAX).contains(&a.w));
        }
    }
}
