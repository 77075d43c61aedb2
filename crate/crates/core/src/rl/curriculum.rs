use serde::{Deserialize, Serialize};

/// Maximum number of dynamic pedestrians per curriculum level.
pub const CURRICULUM_N_DYN: [usize; 3] = [2, 4, 8];
pub const CURRICULUM_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CurriculumState {
    pub level: usize,
}

impl CurriculumState {
    pub fn n_dyn_max(self) -> usize {
        CURRICULUM_N_DYN[self.level]
    }

    pub fn is_final(self) -> bool {
        self.level + 1 == CURRICULUM_N_DYN.len()
    }
}

/// Advances one level when the evaluation success rate strictly exceeds
/// the threshold; never moves back down.
pub fn curriculum_advance(state: CurriculumState, success_rate: f64) -> CurriculumState {
    if success_rate > CURRICULUM_THRESHOLD && !state.is_final() {
        CurriculumState { level: state.level + 1 }
    } else {
        state
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn advance_rules() {
        let s = curriculum_advance(CurriculumState::default(), 0.71);
        assert_eq!((s.level, s.n_dyn_max()), (1, 4));
        assert_eq!(curriculum_advance(CurriculumState { level: 2 }, 0.99).level, 2);
        assert_eq!(curriculum_advance(CurriculumState::default(), 0.70).level, 0);
    }
}
