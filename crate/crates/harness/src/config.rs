//! Experiment documents.
//!
//! A document is TOML with four sections:
//!
//! ```toml
//! [problem]
//! m = 1000          # rows
//! d = 100           # columns
//! noise = 0.0       # one-sided uniform noise on b
//! seed = 0
//!
//! [pool]
//! workers = 100
//! adversary_rate = 0.8
//! categories = 10
//! error = "constant"  # constant | per_row | random
//! error_scale = 1.0
//!
//! [solve]
//! n = 50
//! blocklist = true
//!
//! [run]
//! seeds = [0, 1, 2, 3, 4]
//! ```
//!
//! Only `pool.workers`, `pool.adversary_rate`, `pool.categories` and
//! `solve.n` are required.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use rk_core::adversary::{build_pool, ErrorSpec, WorkerPool};
use rk_core::aggregate::DEFAULT_GROUP_TOL;
use rk_core::analysis::CategoryCounts;
use rk_core::blocklist::DEFAULT_PERIOD;
use rk_core::rng::{self, Stream};
use rk_core::solver::BlocklistConfig;
use rk_core::{BlockPolicy, SolveConfig, TieBreak};

use crate::error::{HarnessError, Result};
use rand::Rng;

pub const DEFAULT_MAX_ITER: usize = 50_000;
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub problem: ProblemSpec,
    pub pool: PoolSpec,
    pub solve: SolveSpec,
    #[serde(default)]
    pub run: RunSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_m() -> usize {
    1000
}

fn default_d() -> usize {
    100
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            m: default_m(),
            d: default_d(),
            noise: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorModel {
    #[default]
    Constant,
    PerRow,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSpec {
    pub workers: usize,
    pub adversary_rate: f64,
    pub categories: usize,
    #[serde(default)]
    pub error: ErrorModel,
    #[serde(default = "one")]
    pub error_scale: f64,
    /// Per-category rates `p_ℓ`; an equal split of `adversary_rate` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fractions: Option<Vec<f64>>,
    /// Constant offsets per category; `ℓ · error_scale` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    Fraction,
    TopJ,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSpec {
    pub n: usize,
    /// Threshold rate `p` in `⌈n(1 - p)⌉`; the pool's adversary rate when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_threshold: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub tol: f64,
    #[serde(default)]
    pub stop_on_tol: bool,
    #[serde(default = "default_group_tol")]
    pub group_tol: f64,
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default)]
    pub blocklist: bool,
    #[serde(default)]
    pub policy: PolicyKind,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_j: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    #[serde(default = "default_period")]
    pub period: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_active: Option<usize>,
    #[serde(default)]
    pub count_skipped: bool,
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

fn default_group_tol() -> f64 {
    DEFAULT_GROUP_TOL
}

fn default_tau() -> f64 {
    0.5
}

fn default_period() -> usize {
    DEFAULT_PERIOD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Keep every iteration of the error curve.
    #[serde(default)]
    pub full_trace: bool,
    /// Run the solver; when false only the analytic quantities are produced.
    #[serde(default = "yes")]
    pub simulate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}

fn yes() -> bool {
    true
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            seeds: default_seeds(),
            full_trace: false,
            simulate: true,
            out: None,
        }
    }
}

/// Line of `key` inside `[section]`, 1-based.
fn line_of(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = trimmed.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn line_of_section(text: &str, section: &str) -> Option<usize> {
    text.lines()
        .position(|l| l.trim() == format!("[{section}]"))
        .map(|i| i + 1)
}

struct Located<'a> {
    text: &'a str,
}

impl Located<'_> {
    fn err(&self, section: &str, key: &str, message: impl Into<String>) -> HarnessError {
        HarnessError::Config {
            line: line_of(self.text, section, key).or_else(|| line_of_section(self.text, section)),
            message: format!("{section}.{key}: {}", message.into()),
        }
    }
}

/// Parses and validates a document, applying every default.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config {
        line: e
            .span()
            .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1),
        message: e.message().trim().to_string(),
    })?;
    config.validate_with(&Located { text })?;
    Ok(config)
}

impl ExperimentConfig {
    /// Validates a config built in code; errors carry no line numbers.
    pub fn validate(&self) -> Result<()> {
        self.validate_with(&Located { text: "" })
    }

    fn validate_with(&self, at: &Located<'_>) -> Result<()> {
        let (pr, pool, solve, run) = (&self.problem, &self.pool, &self.solve, &self.run);
        if pr.m == 0 {
            return Err(at.err("problem", "m", "must be at least 1"));
        }
        if pr.d == 0 {
            return Err(at.err("problem", "d", "must be at least 1"));
        }
        if !(pr.noise >= 0.0 && pr.noise.is_finite()) {
            return Err(at.err("problem", "noise", "must be finite and nonnegative"));
        }
        if pool.workers == 0 {
            return Err(at.err("pool", "workers", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&pool.adversary_rate) {
            return Err(at.err("pool", "adversary_rate", "must lie in [0, 1]"));
        }
        if pool.adversary_rate > 0.0 && pool.categories == 0 {
            return Err(at.err("pool", "categories", "a positive adversary rate needs at least one category"));
        }
        if !(pool.error_scale.is_finite() && pool.error_scale > 0.0) {
            return Err(at.err("pool", "error_scale", "must be positive"));
        }
        if let Some(fr) = &pool.fractions {
            if fr.len() != pool.categories {
                return Err(at.err(
                    "pool",
                    "fractions",
                    format!("{} fractions for {} categories", fr.len(), pool.categories),
                ));
            }
            if fr.iter().any(|f| !(0.0..=1.0).contains(f)) {
                return Err(at.err("pool", "fractions", "each fraction must lie in [0, 1]"));
            }
            let sum: f64 = fr.iter().sum();
            if (sum - pool.adversary_rate).abs() > 1e-9 {
                return Err(at.err(
                    "pool",
                    "fractions",
                    format!("fractions sum to {sum}, not the adversary rate {}", pool.adversary_rate),
                ));
            }
        }
        if let Some(off) = &pool.offsets {
            if pool.error != ErrorModel::Constant {
                return Err(at.err("pool", "offsets", "only valid with error = \"constant\""));
            }
            if off.len() != pool.categories {
                return Err(at.err(
                    "pool",
                    "offsets",
                    format!("{} offsets for {} categories", off.len(), pool.categories),
                ));
            }
            if off.iter().any(|o| *o == 0.0 || !o.is_finite()) {
                return Err(at.err("pool", "offsets", "offsets must be finite and nonzero"));
            }
        }
        if solve.n == 0 {
            return Err(at.err("solve", "n", "must be at least 1"));
        }
        if solve.n > pool.workers {
            return Err(at.err(
                "solve",
                "n",
                format!("n = {} exceeds the {} workers", solve.n, pool.workers),
            ));
        }
        if let Some(p) = solve.p_threshold {
            if !(0.0..=1.0).contains(&p) {
                return Err(at.err("solve", "p_threshold", "must lie in [0, 1]"));
            }
        }
        if solve.max_iter == 0 {
            return Err(at.err("solve", "max_iter", "must be at least 1"));
        }
        if solve.tol.is_nan() || solve.tol < 0.0 {
            return Err(at.err("solve", "tol", "must be nonnegative"));
        }
        if solve.group_tol.is_nan() || solve.group_tol < 0.0 {
            return Err(at.err("solve", "group_tol", "must be nonnegative"));
        }
        if solve.period == 0 {
            return Err(at.err("solve", "period", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&solve.tau) {
            return Err(at.err("solve", "tau", "must lie in [0, 1]"));
        }
        if solve.policy == PolicyKind::TopJ && solve.top_j.is_none() {
            return Err(at.err("solve", "top_j", "required by policy = \"top_j\""));
        }
        if solve.policy == PolicyKind::Absolute && solve.count.is_none() {
            return Err(at.err("solve", "count", "required by policy = \"absolute\""));
        }
        if let Some(min) = solve.min_active {
            if min > pool.workers {
                return Err(at.err("solve", "min_active", "exceeds the number of workers"));
            }
        }
        if run.seeds.is_empty() {
            return Err(at.err("run", "seeds", "at least one seed is required"));
        }
        if run.simulate {
            // rounding realizability, with the offending key reported
            build_pool(self.pool.workers, &self.fractions_with_specs(), 0).map_err(|e| {
                let key = if pool.fractions.is_some() { "fractions" } else { "adversary_rate" };
                at.err("pool", key, e.to_string())
            })?;
        } else {
            self.category_counts().map_err(|e| at.err("pool", "adversary_rate", e.to_string()))?;
        }
        Ok(())
    }

    pub fn fractions(&self) -> Vec<f64> {
        let k = self.pool.categories;
        match &self.pool.fractions {
            Some(f) => f.clone(),
            None => vec![self.pool.adversary_rate / k.max(1) as f64; k],
        }
    }

    /// Error specification of category `l ≥ 1`.
    pub fn error_spec(&self, l: usize) -> ErrorSpec {
        let scale = self.pool.error_scale;
        match self.pool.error {
            ErrorModel::Constant => ErrorSpec::Constant(match &self.pool.offsets {
                Some(off) => off[l - 1],
                None => l as f64 * scale,
            }),
            ErrorModel::PerRow => {
                let mut g = rng::stream(self.problem.seed.wrapping_add(l as u64), Stream::PoolErrors);
                ErrorSpec::PerRow(
                    (0..self.problem.m)
                        .map(|_| g.random_range(-scale..=scale))
                        .collect(),
                )
            }
            ErrorModel::Random => ErrorSpec::Random { magnitude: scale },
        }
    }

    fn fractions_with_specs(&self) -> Vec<(f64, ErrorSpec)> {
        self.fractions()
            .into_iter()
            .enumerate()
            .map(|(i, f)| (f, self.error_spec(i + 1)))
            .collect()
    }

    pub fn build_pool(&self, seed: u64) -> Result<WorkerPool> {
        Ok(build_pool(self.pool.workers, &self.fractions_with_specs(), seed)?)
    }

    pub fn p_threshold(&self) -> f64 {
        self.solve.p_threshold.unwrap_or(self.pool.adversary_rate)
    }

    pub fn solve_config(&self, seed: u64) -> SolveConfig {
        let s = &self.solve;
        let mut cfg = SolveConfig::new(s.n, self.p_threshold(), s.max_iter, seed);
        cfg.tol = s.tol;
        cfg.stop_on_tol = s.stop_on_tol;
        cfg.group_tol = s.group_tol;
        cfg.tie_break = s.tie_break;
        cfg.keep_samples = false;
        if s.blocklist {
            cfg.blocklist = Some(BlocklistConfig {
                policy: self.block_policy(),
                period: s.period,
                min_active: s.min_active,
                count_skipped: s.count_skipped,
            });
        }
        cfg
    }

    pub fn block_policy(&self) -> BlockPolicy {
        let s = &self.solve;
        match s.policy {
            PolicyKind::Fraction => BlockPolicy::Fraction { tau: s.tau },
            PolicyKind::TopJ => BlockPolicy::TopJ { j: s.top_j.unwrap_or(0) },
            PolicyKind::Absolute => BlockPolicy::Absolute { count: s.count.unwrap_or(0) },
        }
    }

    /// Category sizes for the exact analysis.
    ///
    /// Rounded counts are used when they realize `N`; otherwise an equal
    /// split falls back to the exact share `N·p/k`, which may be fractional.
    /// Random-offset workers never agree with one another, so each of them
    /// is its own category.
    pub fn category_counts(&self) -> Result<CategoryCounts> {
        let n = self.solve.n as u64;
        let expand = self.pool.error == ErrorModel::Random;
        let total = self.pool.workers;
        let nf = total as f64;
        let rounded: Vec<usize> = self.fractions().iter().map(|f| (nf * f).round() as usize).collect();
        let honest = (nf * (1.0 - self.pool.adversary_rate)).round() as usize;
        if honest + rounded.iter().sum::<usize>() == total {
            let counts: Vec<u64> = std::iter::once(honest as u64)
                .chain(rounded.iter().flat_map(|&c| {
                    if expand {
                        vec![1u64; c]
                    } else {
                        vec![c as u64]
                    }
                }))
                .collect();
            return Ok(CategoryCounts::new(counts, n)?);
        }
        let adversaries = total - honest;
        if self.pool.fractions.is_some() || expand || (nf * self.pool.adversary_rate - adversaries as f64).abs() > 1e-9 {
            return Err(HarnessError::Config {
                line: None,
                message: format!(
                    "category fractions are not realizable with {total} workers"
                ),
            });
        }
        let k = self.pool.categories;
        let share = BigRational::new(BigInt::from(adversaries), BigInt::from(k));
        let counts = std::iter::once(BigRational::from_integer(BigInt::from(honest)))
            .chain(std::iter::repeat_n(share, k))
            .collect();
        Ok(CategoryCounts::fractional(counts, n)?)
    }

    /// `‖e_ℓ‖²` for every analytic category after the first.
    pub fn error_norms_sq(&self) -> Result<Vec<f64>> {
        let counts = self.category_counts()?;
        let m = self.problem.m;
        if self.pool.error == ErrorModel::Random {
            return Ok(vec![self.error_spec(1).norm_sq(m); counts.k()]);
        }
        Ok((1..=self.pool.categories).map(|l| self.error_spec(l).norm_sq(m)).collect())
    }

    pub fn to_document(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[pool]\nworkers = 100\nadversary_rate = 0.8\ncategories = 10\n\n[solve]\nn = 50\n";

    fn line(err: HarnessError) -> Option<usize> {
        match err {
            HarnessError::Config { line, .. } => line,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.problem, ProblemSpec { m: 1000, d: 100, noise: 0.0, seed: 0 });
        assert_eq!(c.pool.error, ErrorModel::Constant);
        assert_eq!(c.solve.max_iter, 50_000);
        assert_eq!(c.solve.period, 100);
        assert_eq!(c.solve.tau, 0.5);
        assert!(!c.solve.blocklist);
        assert_eq!(c.p_threshold(), 0.8);
        assert_eq!(c.run.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(c.fractions(), vec![0.08; 10]);
        assert_eq!(c.error_spec(3), ErrorSpec::Constant(3.0));
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_line() {
        let doc = format!("{MINIMAL}bogus = 3\n");
        let err = parse_config(&doc).unwrap_err();
        assert_eq!(line(err), Some(8));
    }

    #[test]
    fn fractions_must_sum_to_the_rate() {
        let doc = "[pool]\nworkers = 10\nadversary_rate = 0.4\ncategories = 2\nfractions = [0.1, 0.2]\n[solve]\nn = 3\n";
        let err = parse_config(doc).unwrap_err();
        assert!(err.to_string().contains("fractions sum"), "{err}");
        assert_eq!(line(err), Some(5));
    }

    #[test]
    fn unrealizable_fractions() {
        let doc = "[pool]\nworkers = 100\nadversary_rate = 0.8\ncategories = 15\n[solve]\nn = 5\n";
        let err = parse_config(doc).unwrap_err();
        assert_eq!(line(err), Some(3));
        // the analysis alone accepts the exact 16/3 share
        let doc = format!("{doc}[run]\nsimulate = false\n");
        let c = parse_config(&doc).unwrap();
        assert!(c.category_counts().unwrap().integral().is_none());
    }

    #[test]
    fn n_larger_than_pool() {
        let doc = "[pool]\nworkers = 10\nadversary_rate = 0.2\ncategories = 2\n[solve]\nn = 11\n";
        assert_eq!(line(parse_config(doc).unwrap_err()), Some(6));
    }

    #[test]
    fn malformed_value_reports_line() {
        let doc = "[pool]\nworkers = \"many\"\nadversary_rate = 0.2\ncategories = 2\n[solve]\nn = 1\n";
        assert_eq!(line(parse_config(doc).unwrap_err()), Some(2));
    }

    #[test]
    fn policy_parameters() {
        let doc = format!("{MINIMAL}blocklist = true\npolicy = \"top_j\"\n");
        assert!(parse_config(&doc).is_err());
        let doc = format!("{MINIMAL}blocklist = true\npolicy = \"top_j\"\ntop_j = 80\n");
        let c = parse_config(&doc).unwrap();
        assert_eq!(c.block_policy(), BlockPolicy::TopJ { j: 80 });
        assert!(c.solve_config(1).blocklist.is_some());
    }

    #[test]
    fn documents_round_trip() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&c.to_document()).unwrap(), c);
    }

    #[test]
    fn random_workers_are_singleton_categories() {
        let doc = "[pool]\nworkers = 20\nadversary_rate = 0.5\ncategories = 2\nerror = \"random\"\n[solve]\nn = 5\n";
        let c = parse_config(doc).unwrap();
        let cc = c.category_counts().unwrap();
        assert_eq!(cc.k(), 10);
        assert_eq!(c.error_norms_sq().unwrap().len(), 10);
    }

    #[test]
    fn per_row_errors_are_reproducible() {
        let doc = "[problem]\nm = 30\nd = 5\n[pool]\nworkers = 10\nadversary_rate = 0.2\ncategories = 2\nerror = \"per_row\"\n[solve]\nn = 3\n";
        let c = parse_config(doc).unwrap();
        let (a, b) = (c.error_spec(1), c.error_spec(1));
        assert_eq!(a, b);
        assert_ne!(a, c.error_spec(2));
        match a {
            ErrorSpec::PerRow(v) => assert_eq!(v.len(), 30),
            other => panic!("{other:?}"),
        }
    }
}
