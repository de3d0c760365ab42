//! The distributed Kaczmarz loop with mode aggregation and block-list.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::adversary::{sample_workers, worker_compute, WorkerPool};
use crate::aggregate::{self, group_responses, select_mode, TieBreak};
use crate::blocklist::{BlockListState, BlockPolicy, DEFAULT_PERIOD};
use crate::kaczmarz::{
    error_norm, kaczmarz_step_in_place, row_sampling_distribution, true_coefficient, Problem,
};
use crate::rng::{self, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlocklistConfig {
    pub policy: BlockPolicy,
    pub period: usize,
    /// Defaults to the mode threshold `⌈n(1 - p)⌉`.
    pub min_active: Option<usize>,
    pub count_skipped: bool,
}

impl Default for BlocklistConfig {
    fn default() -> Self {
        Self {
            policy: BlockPolicy::default(),
            period: DEFAULT_PERIOD,
            min_active: None,
            count_skipped: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Workers queried per iteration.
    pub n: usize,
    pub p_threshold: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Exit as soon as the last applied |c| drops to `tol`. When false the run
    /// goes to `max_iter` and the would-be exit is only reported.
    pub stop_on_tol: bool,
    /// `None` disables blocking; counters are still tracked.
    pub blocklist: Option<BlocklistConfig>,
    pub group_tol: f64,
    pub tie_break: TieBreak,
    pub seed: u64,
    /// Keep the sampled worker ids of every iteration in the trace.
    pub keep_samples: bool,
}

impl SolveConfig {
    pub fn new(n: usize, p_threshold: f64, max_iter: usize, seed: u64) -> Self {
        Self {
            n,
            p_threshold,
            max_iter,
            tol: 0.0,
            stop_on_tol: false,
            blocklist: None,
            group_tol: aggregate::DEFAULT_GROUP_TOL,
            tie_break: TieBreak::Random,
            seed,
            keep_samples: true,
        }
    }

    pub fn with_blocklist(mut self, cfg: BlocklistConfig) -> Self {
        self.blocklist = Some(cfg);
        self
    }

    pub fn threshold(&self) -> usize {
        aggregate::mode_threshold(self.n, self.p_threshold)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::Config("tol must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.p_threshold) {
            return Err(Error::Config("p_threshold must lie in [0, 1]".into()));
        }
        if self.group_tol.is_nan() || self.group_tol < 0.0 {
            return Err(Error::Config("grouping tolerance must be nonnegative".into()));
        }
        if let Some(b) = &self.blocklist {
            if b.period == 0 {
                return Err(Error::Config("block-list period must be at least 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IterationOutcome {
    Applied {
        /// Category of the chosen group when all its members share one.
        category: Option<usize>,
        corrupted: bool,
        size: usize,
    },
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub row: usize,
    pub sampled: Vec<usize>,
    pub outcome: IterationOutcome,
    /// |c| of the applied coefficient.
    pub coefficient: Option<f64>,
    pub error_norm: f64,
}

impl IterationRecord {
    pub fn skipped(&self) -> bool {
        matches!(self.outcome, IterationOutcome::Skipped)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    MaxIter,
    Tolerance,
    /// Blocking left fewer active workers than a qualifying group needs.
    InsufficientWorkers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub x: Vec<f64>,
    pub blocklist: BlockListState,
    pub updates: usize,
    pub skips: usize,
    pub corrupted_updates: usize,
    pub status: SolveStatus,
    /// First iteration after which the last applied |c| was at most `tol`.
    pub tol_exit_iteration: Option<usize>,
    /// `(iteration, newly blocked ids)` for every policy application that blocked someone.
    pub block_events: Vec<(usize, Vec<usize>)>,
}

impl SolveTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_error(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.error_norm)
    }
}

/// Loop condition: continue while `|last_applied_c| > tol`.
pub fn residual_stopping_check(last_applied_c: f64, tol: f64) -> bool {
    last_applied_c.abs() > tol
}

/// Runs the full iteration from `x = 0`.
pub fn run(problem: &Problem, pool: &WorkerPool, config: &SolveConfig) -> Result<SolveTrace> {
    config.validate()?;
    if pool.len() < config.n {
        return Err(Error::InsufficientWorkers {
            requested: config.n,
            available: pool.len(),
        });
    }
    let threshold = config.threshold();
    let min_active = config
        .blocklist
        .as_ref()
        .and_then(|b| b.min_active)
        .unwrap_or(threshold.max(1));
    if min_active > pool.len() {
        return Err(Error::Config(format!(
            "min_active {min_active} exceeds the pool of {} workers",
            pool.len()
        )));
    }

    let dist = row_sampling_distribution(&problem.a)?;
    let row_sampler =
        WeightedIndex::new(&dist.probabilities).map_err(|_| Error::DegenerateDistribution)?;
    let mut row_rng = rng::stream(config.seed, Stream::Rows);
    let mut worker_rng = rng::stream(config.seed, Stream::Workers);
    let mut tie_rng = rng::stream(config.seed, Stream::TieBreak);
    let mut noise_rng = rng::stream(config.seed, Stream::AdversaryNoise);

    let period = config.blocklist.as_ref().map_or(DEFAULT_PERIOD, |b| b.period);
    let mut state = BlockListState::new(pool.len(), period);
    state.count_skipped = config.blocklist.as_ref().is_some_and(|b| b.count_skipped);

    let mut x = vec![0.0; problem.cols()];
    let mut last_c = if config.tol > 0.0 { 2.0 * config.tol } else { f64::INFINITY };
    let mut trace = SolveTrace {
        records: Vec::with_capacity(config.max_iter.min(1 << 20)),
        x: Vec::new(),
        blocklist: BlockListState::new(0, period),
        updates: 0,
        skips: 0,
        corrupted_updates: 0,
        status: SolveStatus::MaxIter,
        tol_exit_iteration: None,
        block_events: Vec::new(),
    };

    for j in 0..config.max_iter {
        if config.stop_on_tol && !residual_stopping_check(last_c, config.tol) {
            trace.status = SolveStatus::Tolerance;
            break;
        }
        let active = state.active_ids();
        let n_eff = config.n.min(active.len());
        if n_eff == 0 || n_eff < threshold {
            trace.status = SolveStatus::InsufficientWorkers;
            break;
        }

        let i = row_sampler.sample(&mut row_rng);
        let row = problem.a.row(i);
        let b_i = problem.b[i];
        let sampled = sample_workers(&active, n_eff, &mut worker_rng)?;
        let responses = sampled
            .iter()
            .map(|&w| worker_compute(pool, w, i, row, b_i, &x, &mut noise_rng))
            .collect::<Result<Vec<_>>>()?;
        let groups = group_responses(&responses, config.group_tol)?;
        let decision = select_mode(&groups, config.n, config.p_threshold, config.tie_break, &mut tie_rng);

        let (outcome, coefficient) = match decision.chosen() {
            Some(group) => {
                let c = group.representative;
                let honest = true_coefficient(&x, row, b_i)?;
                let corrupted = (c - honest).abs() > config.group_tol;
                let first = pool.category_of(group.members[0])?;
                let category = group
                    .members
                    .iter()
                    .all(|&w| pool.category_of(w).is_ok_and(|cat| cat == first))
                    .then_some(first);
                kaczmarz_step_in_place(&mut x, row, c)?;
                last_c = c;
                trace.updates += 1;
                trace.corrupted_updates += usize::from(corrupted);
                (
                    IterationOutcome::Applied {
                        category,
                        corrupted,
                        size: group.len(),
                    },
                    Some(c.abs()),
                )
            }
            None => {
                trace.skips += 1;
                (IterationOutcome::Skipped, None)
            }
        };

        state.record_iteration(&sampled, &decision)?;
        if let Some(b) = &config.blocklist {
            if (j + 1) % b.period == 0 {
                let newly = state.apply_policy(b.policy, min_active)?;
                if !newly.is_empty() {
                    trace.block_events.push((j, newly));
                }
            }
        }

        if trace.tol_exit_iteration.is_none() && !residual_stopping_check(last_c, config.tol) {
            trace.tol_exit_iteration = Some(j);
        }
        trace.records.push(IterationRecord {
            iteration: j,
            row: i,
            sampled: if config.keep_samples { sampled } else { Vec::new() },
            outcome,
            coefficient,
            error_norm: error_norm(&x, &problem.x_star)?,
        });
    }

    trace.x = x;
    trace.blocklist = state;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{build_pool, ErrorSpec};
    use crate::kaczmarz::generate_problem;

    #[test]
    fn stopping_check_examples() {
        let tol = 1e-8;
        assert!(residual_stopping_check(2.0 * tol, tol));
        assert!(!residual_stopping_check(0.0, tol));
        assert!(!residual_stopping_check(-0.5 * tol, tol));
    }

    #[test]
    fn all_honest_reduces_to_plain_rk() {
        let problem = generate_problem(100, 10, 0.0, 4).unwrap();
        let pool = build_pool(20, &[], 4).unwrap();
        let mut cfg = SolveConfig::new(5, 0.0, 3000, 4);
        cfg.tol = 1e-12;
        let trace = run(&problem, &pool, &cfg).unwrap();
        assert_eq!(trace.skips, 0);
        assert_eq!(trace.corrupted_updates, 0);
        assert!(trace.final_error() < 1e-10, "{}", trace.final_error());
        assert!(trace.tol_exit_iteration.is_some());
    }

    #[test]
    fn stop_on_tol_exits_early() {
        let problem = generate_problem(100, 10, 0.0, 4).unwrap();
        let pool = build_pool(20, &[], 4).unwrap();
        let mut cfg = SolveConfig::new(5, 0.0, 100_000, 4);
        cfg.tol = 1e-12;
        cfg.stop_on_tol = true;
        let trace = run(&problem, &pool, &cfg).unwrap();
        assert_eq!(trace.status, SolveStatus::Tolerance);
        assert!(trace.iterations() < 100_000);
        assert_eq!(trace.tol_exit_iteration, Some(trace.iterations() - 1));
    }

    #[test]
    fn accounting_and_determinism() {
        let problem = generate_problem(60, 6, 0.0, 9).unwrap();
        let fr: Vec<(f64, ErrorSpec)> = (1..=4).map(|l| (0.1, ErrorSpec::Constant(l as f64))).collect();
        let pool = build_pool(40, &fr, 9).unwrap();
        let cfg = SolveConfig::new(8, 0.4, 500, 9).with_blocklist(BlocklistConfig::default());
        let a = run(&problem, &pool, &cfg).unwrap();
        let b = run(&problem, &pool, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.updates + a.skips, a.iterations());
        assert!(a.records.iter().all(|r| r.sampled.len() <= 8));
        for (at, ids) in &a.block_events {
            for r in a.records.iter().filter(|r| r.iteration > *at) {
                assert!(r.sampled.iter().all(|w| !ids.contains(w)));
            }
        }
    }

    #[test]
    fn rejects_oversized_n() {
        let problem = generate_problem(10, 2, 0.0, 0).unwrap();
        let pool = build_pool(4, &[], 0).unwrap();
        let cfg = SolveConfig::new(5, 0.0, 10, 0);
        assert!(matches!(
            run(&problem, &pool, &cfg),
            Err(Error::InsufficientWorkers { requested: 5, available: 4 })
        ));
    }

    #[test]
    fn halts_when_blocking_starves_the_pool() {
        let problem = generate_problem(30, 3, 0.0, 1).unwrap();
        let pool = build_pool(10, &[(0.5, ErrorSpec::Constant(3.0))], 1).unwrap();
        // threshold 5 but blocking allowed down to 1 active worker
        let mut cfg = SolveConfig::new(10, 0.5, 5000, 1).with_blocklist(BlocklistConfig {
            policy: BlockPolicy::Absolute { count: 0 },
            period: 10,
            min_active: Some(1),
            count_skipped: true,
        });
        cfg.tie_break = TieBreak::Skip;
        let trace = run(&problem, &pool, &cfg).unwrap();
        assert_eq!(trace.status, SolveStatus::InsufficientWorkers);
        assert!(trace.iterations() < 5000);
    }
}
