use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::targets::{generate_target_set, DisplayConfig, Target};
use super::{ExperimentError, Method};
use crate::rng::{derive_rng, stream};

pub const BLOCK_SIZE: usize = 30;
pub const MAIN_BLOCKS: usize = 4;
pub const TRAINING_TRIALS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialPhase {
    Training,
    Main,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedTrial {
    pub phase: TrialPhase,
    /// 1-based block within the phase.
    pub block: u8,
    /// 0-based position within the phase.
    pub trial_index: usize,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodPlan {
    pub method: Method,
    pub training: Vec<PlannedTrial>,
    pub main: Vec<PlannedTrial>,
}

impl MethodPlan {
    /// Training trials followed by the main sequence.
    pub fn all_trials(&self) -> impl Iterator<Item = &PlannedTrial> {
        self.training.iter().chain(self.main.iter())
    }

    pub fn block(&self, block: u8) -> impl Iterator<Item = &PlannedTrial> {
        self.main.iter().filter(move |t| t.block == block)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub subject_index: u32,
    pub seed: u64,
    pub method_order: [Method; 3],
    /// One entry per method, in `method_order`.
    pub methods: Vec<MethodPlan>,
}

impl SessionPlan {
    pub fn for_method(&self, method: Method) -> Option<&MethodPlan> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// The six orders of the three methods, lexicographic over [`Method::ALL`].
pub fn method_permutations() -> [[Method; 3]; 6] {
    let [a, b, c] = Method::ALL;
    [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]
}

fn numbered(targets: &[Target], phase: TrialPhase) -> Vec<PlannedTrial> {
    targets
        .iter()
        .enumerate()
        .map(|(i, t)| PlannedTrial { phase, block: (i / BLOCK_SIZE) as u8 + 1, trial_index: i, target: *t })
        .collect()
}

/// Per-subject plan: counterbalanced method order (permutation number
/// `subject_index mod 6`) and, per method, a seeded shuffle of the canonical
/// target set split into 4 blocks of 30, preceded by 60 training trials.
pub fn plan_session(subject_index: u32, cfg: &DisplayConfig, seed: u64) -> Result<SessionPlan, ExperimentError> {
    let canonical = generate_target_set(cfg, seed)?;
    let method_order = method_permutations()[subject_index as usize % 6];

    let methods = method_order
        .iter()
        .map(|&method| {
            let mut rng = derive_rng(seed, &[stream::PLAN, u64::from(subject_index), method.code()]);
            let mut main = canonical.clone();
            main.shuffle(&mut rng);
            let mut pool = canonical.clone();
            pool.shuffle(&mut rng);
            pool.truncate(TRAINING_TRIALS);
            MethodPlan { method, training: numbered(&pool, TrialPhase::Training), main: numbered(&main, TrialPhase::Main) }
        })
        .collect();

    Ok(SessionPlan { subject_index, seed, method_order, methods })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn six_distinct_orders() {
        let cfg = DisplayConfig::default();
        let orders: HashSet<_> = (0..6).map(|s| plan_session(s, &cfg, 1).unwrap().method_order).collect();
        assert_eq!(orders.len(), 6);
        assert_eq!(plan_session(6, &cfg, 1).unwrap().method_order, plan_session(0, &cfg, 1).unwrap().method_order);
    }

    #[test]
    fn blocks_partition_the_canonical_set() {
        let cfg = DisplayConfig::default();
        let plan = plan_session(3, &cfg, 42).unwrap();
        for mp in &plan.methods {
            let mut seen = HashSet::new();
            for b in 1..=MAIN_BLOCKS as u8 {
                let block: Vec<_> = mp.block(b).collect();
                assert_eq!(block.len(), BLOCK_SIZE);
                seen.extend(block.iter().map(|t| t.target.index));
            }
            assert_eq!(seen.len(), 120);
            assert_eq!(mp.training.len(), TRAINING_TRIALS);
            assert_eq!(mp.training.iter().map(|t| t.block).max(), Some(2));
        }
    }

    #[test]
    fn plans_are_reproducible() {
        let cfg = DisplayConfig::default();
        assert_eq!(plan_session(2, &cfg, 9).unwrap(), plan_session(2, &cfg, 9).unwrap());
        assert_ne!(plan_session(2, &cfg, 9).unwrap().methods[0].main, plan_session(2, &cfg, 10).unwrap().methods[0].main);
    }
}
