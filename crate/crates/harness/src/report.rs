//! Seeded batch execution and the report assembled from it.

use std::collections::BTreeSet;

use serde::Serialize;

use rk_core::analysis::{
    convergence_bound, mode_probabilities, to_f64, CategoryCounts, ConvergenceBoundInputs,
    ModeProbabilities,
};
use rk_core::blocklist::precision_recall;
use rk_core::kaczmarz::{generate_problem, Problem};
use rk_core::solver::{run, SolveStatus, SolveTrace};
use rk_core::WorkerPool;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

/// Iterations kept at full resolution before the curve is thinned.
pub const FULL_RESOLUTION: usize = 1000;
/// Stride of the thinned part of the curve.
pub const STRIDE: usize = 10;

/// Whether iteration `j` of a run with `total` iterations is kept.
pub fn keep_point(j: usize, total: usize, full: bool) -> bool {
    full || j < FULL_RESOLUTION || j.is_multiple_of(STRIDE) || j + 1 == total
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub error_norm: f64,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkerRow {
    pub worker: usize,
    pub category: usize,
    pub counter: u64,
    pub participation: u64,
    pub blocked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedReport {
    pub seed: u64,
    pub final_error: f64,
    pub iterations: usize,
    pub updates: usize,
    pub skips: usize,
    pub corrupted_updates: usize,
    pub status: SolveStatus,
    pub tol_exit_iteration: Option<usize>,
    pub blocked: Vec<usize>,
    pub precision: f64,
    pub recall: f64,
    #[serde(skip)]
    pub curve: Vec<CurvePoint>,
    #[serde(skip)]
    pub workers: Vec<WorkerRow>,
}

/// Exact probabilities as `"num/den"` strings with decimal companions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub n: u64,
    pub i0: u64,
    pub counts: Vec<String>,
    pub q_mode_exact: Vec<String>,
    pub q_mode_decimal: Vec<f64>,
    pub q_exact: String,
    pub q: f64,
    pub q_conditional_exact: Vec<String>,
    pub q_conditional: Vec<f64>,
    /// `q̂_mode^ℓ` of one adversarial category, when all of them are the same size.
    pub q_mode_adversary: Option<f64>,
}

impl AnalysisReport {
    pub fn from_probabilities(cc: &CategoryCounts, probs: &ModeProbabilities) -> Self {
        let counts = cc.counts();
        let uniform = counts.len() > 1 && counts[1..].iter().all(|c| *c == counts[1]);
        Self {
            n: cc.n(),
            i0: probs.i0,
            counts: counts.iter().map(ToString::to_string).collect(),
            q_mode_exact: probs.per_category.iter().map(ToString::to_string).collect(),
            q_mode_decimal: probs.per_category_f64(),
            q_exact: probs.q.to_string(),
            q: probs.q_f64(),
            q_conditional_exact: probs.q_conditional.iter().map(ToString::to_string).collect(),
            q_conditional: probs.q_conditional_f64(),
            q_mode_adversary: uniform.then(|| to_f64(&probs.per_category[1])),
        }
    }

    /// `q_0`, the conditional probability that an existing mode is honest.
    pub fn q0(&self) -> f64 {
        self.q_conditional[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundPoint {
    pub iteration: usize,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub analysis: AnalysisReport,
    pub runs: Vec<SeedReport>,
    pub median_final_error: Option<f64>,
    /// Empty when `A` is rank deficient or nothing was simulated.
    #[serde(skip)]
    pub bound: Vec<BoundPoint>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

/// Expected-error bound inputs for `problem` under `config`, starting from `x = 0`.
pub fn bound_inputs(
    config: &ExperimentConfig,
    problem: &Problem,
    probs: &ModeProbabilities,
) -> Result<ConvergenceBoundInputs> {
    Ok(ConvergenceBoundInputs {
        sigma_min_sq: problem.a.sigma_min_sq(),
        frob_sq: problem.a.frobenius_sq(),
        error_norms_sq: config.error_norms_sq()?,
        q_conditional: probs.q_conditional_f64(),
        x0_error_sq: problem.x_star.iter().map(|v| v * v).sum(),
    })
}

fn seed_report(seed: u64, pool: &WorkerPool, trace: &SolveTrace, full: bool) -> Result<SeedReport> {
    let adversaries: BTreeSet<usize> = pool.adversaries().into_iter().collect();
    let (precision, recall) = precision_recall(&trace.blocklist.blocked, &adversaries);
    let total = trace.records.len();
    let curve = trace
        .records
        .iter()
        .filter(|r| keep_point(r.iteration, total, full))
        .map(|r| CurvePoint {
            iteration: r.iteration,
            error_norm: r.error_norm,
            skipped: r.skipped(),
        })
        .collect();
    let state = &trace.blocklist;
    let workers = (0..pool.len())
        .map(|w| {
            Ok(WorkerRow {
                worker: w,
                category: pool.category_of(w)?,
                counter: state.counter[w],
                participation: state.participation[w],
                blocked: state.blocked.contains(&w),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeedReport {
        seed,
        final_error: trace.final_error(),
        iterations: total,
        updates: trace.updates,
        skips: trace.skips,
        corrupted_updates: trace.corrupted_updates,
        status: trace.status,
        tol_exit_iteration: trace.tol_exit_iteration,
        blocked: state.blocked.iter().copied().collect(),
        precision,
        recall,
        curve,
        workers,
    })
}

/// Analytic quantities only; no problem is generated.
pub fn analyze(config: &ExperimentConfig) -> Result<AnalysisReport> {
    let cc = config.category_counts()?;
    Ok(AnalysisReport::from_probabilities(&cc, &mode_probabilities(&cc)))
}

/// Runs the solver once per seed and attaches the analysis and bound curve.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let cc = config.category_counts()?;
    let probs = mode_probabilities(&cc);
    let analysis = AnalysisReport::from_probabilities(&cc, &probs);
    if !config.run.simulate {
        return Ok(RunReport {
            config: config.clone(),
            analysis,
            runs: Vec::new(),
            median_final_error: None,
            bound: Vec::new(),
        });
    }

    let p = &config.problem;
    let problem = generate_problem(p.m, p.d, p.noise, p.seed)?;
    let mut runs = Vec::with_capacity(config.run.seeds.len());
    for &seed in &config.run.seeds {
        let pool = config.build_pool(seed)?;
        let trace = run(&problem, &pool, &config.solve_config(seed))
            .map_err(|source| HarnessError::Run { seed, source })?;
        runs.push(seed_report(seed, &pool, &trace, config.run.full_trace)?);
    }

    let max_iter = config.solve.max_iter;
    let bound = match bound_inputs(config, &problem, &probs) {
        Ok(inp) if inp.alpha() < 1.0 => (0..max_iter)
            .filter(|&j| keep_point(j, max_iter, config.run.full_trace))
            .map(|j| {
                Ok(BoundPoint {
                    iteration: j,
                    bound: convergence_bound(&inp, j as u64)?,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        _ => Vec::new(),
    };

    let finals: Vec<f64> = runs.iter().map(|r| r.final_error).collect();
    Ok(RunReport {
        config: config.clone(),
        analysis,
        median_final_error: median(&finals),
        runs,
        bound,
    })
}
