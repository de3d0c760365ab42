//! Worker population: category assignment, sampling, and corrupted responses.

use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::kaczmarz::true_coefficient;
use crate::rng::{self, Stream};
use crate::{Error, Result};

/// How workers of one category corrupt their answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ErrorSpec {
    /// Honest; only valid for category 0.
    None,
    /// The same scalar added to every answer.
    Constant(f64),
    /// `e[row]` added when answering for `row`.
    PerRow(Vec<f64>),
    /// A fresh draw from `Uniform(-magnitude, magnitude)` per answer.
    Random { magnitude: f64 },
}

impl ErrorSpec {
    /// Offsets are shared by all workers of the category for a given row.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, ErrorSpec::Random { .. })
    }

    /// `‖e‖²` over `m` rows; the expected value for random offsets.
    pub fn norm_sq(&self, m: usize) -> f64 {
        match self {
            ErrorSpec::None => 0.0,
            ErrorSpec::Constant(c) => m as f64 * c * c,
            ErrorSpec::PerRow(e) => e.iter().map(|v| v * v).sum(),
            ErrorSpec::Random { magnitude } => m as f64 * magnitude * magnitude / 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySpec {
    pub index: usize,
    pub count: usize,
    pub error: ErrorSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerPool {
    assignment: Vec<usize>,
    categories: Vec<CategorySpec>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Response {
    pub worker: usize,
    pub value: f64,
}

impl WorkerPool {
    /// Builds a pool from explicit counts. Category 0 is honest and takes
    /// `ErrorSpec::None`; `errors` lists the specs of categories `1..=k`.
    pub fn from_counts(counts: &[usize], errors: Vec<ErrorSpec>, seed: u64) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Config("at least the honest category is required".into()));
        }
        if errors.len() + 1 != counts.len() {
            return Err(Error::Config(format!(
                "{} adversarial counts but {} error specs",
                counts.len() - 1,
                errors.len()
            )));
        }
        if let Some(pos) = errors.iter().position(|e| matches!(e, ErrorSpec::None)) {
            return Err(Error::Config(format!(
                "adversarial category {} has no error",
                pos + 1
            )));
        }
        let categories: Vec<CategorySpec> = std::iter::once(ErrorSpec::None)
            .chain(errors)
            .zip(counts)
            .enumerate()
            .map(|(index, (error, &count))| CategorySpec {
                index,
                count,
                error,
            })
            .collect();
        let mut assignment: Vec<usize> = categories
            .iter()
            .flat_map(|c| std::iter::repeat_n(c.index, c.count))
            .collect();
        assignment.shuffle(&mut rng::stream(seed, Stream::PoolAssignment));
        Ok(Self {
            assignment,
            categories,
        })
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn categories(&self) -> &[CategorySpec] {
        &self.categories
    }

    pub fn counts(&self) -> Vec<usize> {
        self.categories.iter().map(|c| c.count).collect()
    }

    pub fn category_of(&self, worker: usize) -> Result<usize> {
        self.assignment
            .get(worker)
            .copied()
            .ok_or(Error::UnknownWorker(worker))
    }

    pub fn adversaries(&self) -> Vec<usize> {
        (0..self.len()).filter(|&w| self.assignment[w] != 0).collect()
    }

    /// Answer of worker `w` given the honest coefficient for `row_index`.
    pub fn respond<R: Rng + ?Sized>(
        &self,
        w: usize,
        row_index: usize,
        honest: f64,
        rng: &mut R,
    ) -> Result<Response> {
        let cat = self.category_of(w)?;
        let value = match &self.categories[cat].error {
            ErrorSpec::None => honest,
            ErrorSpec::Constant(c) => honest + c,
            ErrorSpec::PerRow(e) => {
                let off = e.get(row_index).ok_or_else(|| {
                    Error::Dimension(format!(
                        "per-row error of length {} has no entry for row {row_index}",
                        e.len()
                    ))
                })?;
                honest + off
            }
            ErrorSpec::Random { magnitude } => {
                let unif = Uniform::new_inclusive(-magnitude, *magnitude)
                    .map_err(|e| Error::Config(e.to_string()))?;
                honest + unif.sample(rng)
            }
        };
        Ok(Response { worker: w, value })
    }
}

/// Builds a pool of `n_workers` from per-category adversary fractions.
///
/// Each `N·p_ℓ` is rounded to the nearest integer and the honest share
/// `N·(1 - p)` likewise; the configuration is rejected unless those rounded
/// counts add up to `N` exactly.
pub fn build_pool(n_workers: usize, fractions: &[(f64, ErrorSpec)], seed: u64) -> Result<WorkerPool> {
    let mut p = 0.0;
    for (l, (f, _)) in fractions.iter().enumerate() {
        if !(0.0..=1.0).contains(f) {
            return Err(Error::Config(format!(
                "fraction of category {} must lie in [0, 1], got {f}",
                l + 1
            )));
        }
        p += f;
    }
    if p > 1.0 + 1e-12 {
        return Err(Error::Config(format!("adversary fractions sum to {p} > 1")));
    }
    let nf = n_workers as f64;
    let adv: Vec<usize> = fractions.iter().map(|(f, _)| (nf * f).round() as usize).collect();
    let honest = (nf * (1.0 - p)).round() as usize;
    let total: usize = honest + adv.iter().sum::<usize>();
    if total != n_workers {
        return Err(Error::Config(format!(
            "fractions are not realizable with {n_workers} workers: rounded counts {honest} + {:?} sum to {total}",
            adv
        )));
    }
    let counts: Vec<usize> = std::iter::once(honest).chain(adv).collect();
    WorkerPool::from_counts(
        &counts,
        fractions.iter().map(|(_, e)| e.clone()).collect(),
        seed,
    )
}

/// Uniform sample of `n` distinct ids from `active`, without replacement.
pub fn sample_workers<R: Rng + ?Sized>(active: &[usize], n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n > active.len() {
        return Err(Error::InsufficientWorkers {
            requested: n,
            available: active.len(),
        });
    }
    Ok(rand::seq::index::sample(rng, active.len(), n)
        .into_iter()
        .map(|i| active[i])
        .collect())
}

/// One worker's answer for row `row_index` at iterate `x`.
#[allow(clippy::too_many_arguments)]
pub fn worker_compute<R: Rng + ?Sized>(
    pool: &WorkerPool,
    w: usize,
    row_index: usize,
    row: &[f64],
    b_i: f64,
    x: &[f64],
    rng: &mut R,
) -> Result<Response> {
    pool.category_of(w)?;
    let honest = true_coefficient(x, row, b_i)?;
    pool.respond(w, row_index, honest, rng)
}
