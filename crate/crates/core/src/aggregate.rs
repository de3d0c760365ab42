//! Mode aggregation of the returned step coefficients.
//!
//! Responses are clustered by sorting and cutting wherever two neighbouring
//! values differ by more than the grouping tolerance. A group qualifies when
//! it holds at least `⌈n(1 - p)⌉` responses; among qualifying groups the
//! largest wins, and equal-size winners are resolved at random (or skipped,
//! with [`TieBreak::Skip`]).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::Response;
use crate::{Error, Result};

pub const DEFAULT_GROUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseGroup {
    pub representative: f64,
    pub members: Vec<usize>,
}

impl ResponseGroup {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModeOutcome {
    Chosen(ResponseGroup),
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeDecision {
    pub outcome: ModeOutcome,
    pub qualifying_count: usize,
}

impl ModeDecision {
    pub fn chosen(&self) -> Option<&ResponseGroup> {
        match &self.outcome {
            ModeOutcome::Chosen(g) => Some(g),
            ModeOutcome::Skipped => None,
        }
    }
}

/// What to do when several qualifying groups share the largest size.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    Random,
    Skip,
}

/// Smallest group size that may be used for an update.
pub fn mode_threshold(n: usize, p_threshold: f64) -> usize {
    // guard against 0.7 * 10 = 7.000000000000001 style rounding
    let raw = n as f64 * (1.0 - p_threshold);
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

pub fn group_responses(responses: &[Response], tol: f64) -> Result<Vec<ResponseGroup>> {
    if responses.is_empty() {
        return Err(Error::Data("no responses to group".into()));
    }
    if let Some(r) = responses.iter().find(|r| !r.value.is_finite()) {
        return Err(Error::Data(format!(
            "worker {} returned non-finite value {}",
            r.worker, r.value
        )));
    }
    let mut sorted: Vec<Response> = responses.to_vec();
    sorted.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.worker.cmp(&b.worker)));

    let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    let mut prev = f64::NAN;
    for r in sorted {
        match groups.last_mut() {
            Some((vals, members)) if r.value - prev <= tol => {
                vals.push(r.value);
                members.push(r.worker);
            }
            _ => groups.push((vec![r.value], vec![r.worker])),
        }
        prev = r.value;
    }
    Ok(groups
        .into_iter()
        .map(|(vals, members)| ResponseGroup {
            // the median keeps every member within tolerance when tol = 0
            representative: vals[vals.len() / 2],
            members,
        })
        .collect())
}

pub fn select_mode<R: Rng + ?Sized>(
    groups: &[ResponseGroup],
    n: usize,
    p_threshold: f64,
    tie_break: TieBreak,
    rng: &mut R,
) -> ModeDecision {
    let threshold = mode_threshold(n, p_threshold);
    let qualifying: Vec<&ResponseGroup> = groups.iter().filter(|g| g.len() >= threshold).collect();
    let qualifying_count = qualifying.len();
    let Some(largest) = qualifying.iter().map(|g| g.len()).max() else {
        return ModeDecision {
            outcome: ModeOutcome::Skipped,
            qualifying_count,
        };
    };
    let winners: Vec<&ResponseGroup> = qualifying.into_iter().filter(|g| g.len() == largest).collect();
    let outcome = match (winners.len(), tie_break) {
        (1, _) => ModeOutcome::Chosen(winners[0].clone()),
        (_, TieBreak::Skip) => ModeOutcome::Skipped,
        (k, TieBreak::Random) => ModeOutcome::Chosen(winners[rng.random_range(0..k)].clone()),
    };
    ModeDecision {
        outcome,
        qualifying_count,
    }
}
