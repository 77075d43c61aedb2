use serde::{Deserialize, Serialize};

use crate::sim::{Terminal, DT};

/// Aggregate outcome rates over a set of evaluated episodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub episodes: usize,
    pub successes: usize,
    pub collisions: usize,
    pub timeouts: usize,
    pub success_rate: f64,
    pub collision_rate: f64,
    /// `1 - (success_rate + collision_rate)`, so the three rates sum to
    /// exactly one in floating point.
    pub timeout_rate: f64,
    /// Mean over successful episodes only (seconds); `None` without successes.
    pub mean_nav_time: Option<f64>,
}

impl MetricsSummary {
    /// `outcomes` pairs each episode's terminal kind with its step count.
    pub fn from_outcomes(outcomes: impl IntoIterator<Item = (Terminal, usize)>) -> Self {
        let (mut g, mut c, mut t, mut time) = (0usize, 0usize, 0usize, 0.0);
        for (terminal, steps) in outcomes {
            match terminal {
                Terminal::Goal => {
                    g += 1;
                    time += steps as f64 * DT;
                }
                Terminal::Collision => c += 1,
                Terminal::Timeout | Terminal::None => t += 1,
            }
        }
        let n = g + c + t;
        let (sr, cr, tr) = if n == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let sr = g as f64 / n as f64;
            let cr = c as f64 / n as f64;
            (sr, cr, 1.0 - (sr + cr))
        };
        Self {
            episodes: n,
            successes: g,
            collisions: c,
            timeouts: t,
            success_rate: sr,
            collision_rate: cr,
            timeout_rate: tr,
            mean_nav_time: (g > 0).then(|| time / g as f64),
        }
    }
}
