//! Non-mode counters and the block-list learned from them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::aggregate::ModeDecision;
use crate::{Error, Result};

/// Rule turning counters into blocked workers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockPolicy {
    /// Block when `counter / max(participation, 1) > tau`.
    Fraction { tau: f64 },
    /// Keep the `j` workers with the largest (nonzero) counters blocked.
    TopJ { j: usize },
    /// Block when the raw counter exceeds `count`.
    Absolute { count: u64 },
}

impl Default for BlockPolicy {
    fn default() -> Self {
        BlockPolicy::Fraction { tau: 0.5 }
    }
}

pub const DEFAULT_PERIOD: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockListState {
    pub counter: Vec<u64>,
    pub participation: Vec<u64>,
    pub blocked: BTreeSet<usize>,
    pub active: BTreeSet<usize>,
    pub period: usize,
    /// Count every responder on skipped iterations as non-mode.
    pub count_skipped: bool,
}

impl BlockListState {
    pub fn new(n_workers: usize, period: usize) -> Self {
        Self {
            counter: vec![0; n_workers],
            participation: vec![0; n_workers],
            blocked: BTreeSet::new(),
            active: (0..n_workers).collect(),
            period: period.max(1),
            count_skipped: false,
        }
    }

    pub fn active_ids(&self) -> Vec<usize> {
        self.active.iter().copied().collect()
    }

    pub fn record_iteration(&mut self, sampled: &[usize], decision: &ModeDecision) -> Result<()> {
        if let Some(&w) = sampled.iter().find(|w| !self.active.contains(w)) {
            return Err(Error::Consistency(format!(
                "worker {w} was sampled but is not active"
            )));
        }
        for &w in sampled {
            self.participation[w] += 1;
        }
        match decision.chosen() {
            Some(group) => {
                for &w in sampled {
                    if !group.members.contains(&w) {
                        self.counter[w] += 1;
                    }
                }
            }
            None if self.count_skipped => {
                for &w in sampled {
                    self.counter[w] += 1;
                }
            }
            None => {}
        }
        Ok(())
    }

    fn ratio(&self, w: usize) -> f64 {
        self.counter[w] as f64 / self.participation[w].max(1) as f64
    }

    /// Blocks workers per `policy` while leaving at least `min_active` active.
    /// Returns the newly blocked ids.
    pub fn apply_policy(&mut self, policy: BlockPolicy, min_active: usize) -> Result<Vec<usize>> {
        if min_active > self.active.len() {
            return Err(Error::Config(format!(
                "min_active {min_active} exceeds the {} active workers",
                self.active.len()
            )));
        }
        let mut candidates: Vec<usize> = match policy {
            BlockPolicy::Fraction { tau } => {
                self.active.iter().copied().filter(|&w| self.ratio(w) > tau).collect()
            }
            BlockPolicy::Absolute { count } => {
                self.active.iter().copied().filter(|&w| self.counter[w] > count).collect()
            }
            BlockPolicy::TopJ { .. } => {
                self.active.iter().copied().filter(|&w| self.counter[w] > 0).collect()
            }
        };
        // strongest evidence first, lower id on ties
        match policy {
            BlockPolicy::Fraction { .. } => candidates.sort_by(|&a, &b| {
                self.ratio(b).total_cmp(&self.ratio(a)).then(a.cmp(&b))
            }),
            _ => candidates.sort_by(|&a, &b| self.counter[b].cmp(&self.counter[a]).then(a.cmp(&b))),
        }
        if let BlockPolicy::TopJ { j } = policy {
            candidates.truncate(j.saturating_sub(self.blocked.len()));
        }
        candidates.truncate(self.active.len() - min_active);
        for &w in &candidates {
            self.active.remove(&w);
            self.blocked.insert(w);
        }
        Ok(candidates)
    }
}

/// Precision and recall of `blocked` against the true adversaries; an empty
/// blocked set has precision 1 and an empty adversary set has recall 1.
pub fn precision_recall(blocked: &BTreeSet<usize>, adversaries: &BTreeSet<usize>) -> (f64, f64) {
    let hit = blocked.intersection(adversaries).count() as f64;
    let precision = if blocked.is_empty() {
        1.0
    } else {
        hit / blocked.len() as f64
    };
    let recall = if adversaries.is_empty() {
        1.0
    } else {
        hit / adversaries.len() as f64
    };
    (precision, recall)
}
