//! Independent references for the mode probabilities: exhaustive
//! enumeration for tiny pools and Monte Carlo for larger ones.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::index::sample;

use crate::rng::{self, Stream};
use crate::{Error, Result};

/// Largest number of subsets [`brute_force_mode_probability`] will visit.
pub const MAX_ENUMERATION: u128 = 1_000_000;

/// Category with a strict unique maximum of at least `ceil(n(1-p))` members
/// and at least `ceil(n/(k+1))`, or `None`.
fn winner(hist: &[u64], n: u64, honest: u64, total: u64) -> Option<usize> {
    let k1 = hist.len() as u64;
    // ceil(n(1-p)) with 1-p = honest/total
    let by_rate = (n * honest).div_ceil(total);
    let by_pigeonhole = n.div_ceil(k1);
    let need = by_rate.max(by_pigeonhole);
    let top = *hist.iter().max()?;
    if top < need || hist.iter().filter(|&&h| h == top).count() != 1 {
        return None;
    }
    hist.iter().position(|&h| h == top)
}

fn subset_count(total: u64, n: u64) -> u128 {
    let mut acc: u128 = 1;
    for j in 0..n.min(total - n) as u128 {
        acc = acc * (total as u128 - j) / (j + 1);
        if acc > MAX_ENUMERATION * 1000 {
            return acc;
        }
    }
    acc
}

/// Exact `P[mode = ℓ]` for every category, by visiting every `n`-subset.
pub fn brute_force_mode_probability(counts: &[u64], n: u64) -> Result<Vec<BigRational>> {
    let total: u64 = counts.iter().sum();
    if counts.is_empty() || n == 0 || n > total {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= n <= N, got n = {n}, N = {total}"
        )));
    }
    let subsets = subset_count(total, n);
    if subsets > MAX_ENUMERATION {
        return Err(Error::InstanceTooLarge(format!(
            "{subsets} subsets of size {n} from {total} workers"
        )));
    }
    let label: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(l, &c)| std::iter::repeat_n(l, c as usize))
        .collect();
    let mut wins = vec![0u64; counts.len()];
    let mut idx: Vec<usize> = (0..n as usize).collect();
    let big_n = total as usize;
    let n = n as usize;
    loop {
        let mut hist = vec![0u64; counts.len()];
        for &i in &idx {
            hist[label[i]] += 1;
        }
        if let Some(l) = winner(&hist, n as u64, counts[0], total) {
            wins[l] += 1;
        }
        // next combination in lexicographic order
        let Some(pos) = (0..n).rev().find(|&j| idx[j] != j + big_n - n) else {
            break;
        };
        idx[pos] += 1;
        for j in pos + 1..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
    let denom = BigInt::from(subsets);
    Ok(wins
        .into_iter()
        .map(|w| BigRational::new(BigInt::from(w), denom.clone()))
        .collect())
}

/// Monte Carlo estimate of `P[mode = ℓ]` with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub estimate: Vec<f64>,
    pub stderr: Vec<f64>,
    pub trials: u64,
}

pub fn mc_mode_probability(counts: &[u64], n: u64, trials: u64, seed: u64) -> Result<McEstimate> {
    let total: u64 = counts.iter().sum();
    if counts.is_empty() || n == 0 || n > total {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= n <= N, got n = {n}, N = {total}"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let label: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(l, &c)| std::iter::repeat_n(l, c as usize))
        .collect();
    let mut rng = rng::stream(seed, Stream::MonteCarlo);
    let mut wins = vec![0u64; counts.len()];
    let mut hist = vec![0u64; counts.len()];
    for _ in 0..trials {
        hist.iter_mut().for_each(|h| *h = 0);
        for i in sample(&mut rng, total as usize, n as usize) {
            hist[label[i]] += 1;
        }
        if let Some(l) = winner(&hist, n, counts[0], total) {
            wins[l] += 1;
        }
    }
    let t = trials as f64;
    let estimate: Vec<f64> = wins.iter().map(|&w| w as f64 / t).collect();
    let stderr = estimate.iter().map(|&q| (q * (1.0 - q) / t).sqrt()).collect();
    Ok(McEstimate {
        estimate,
        stderr,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn small_example() {
        let q = brute_force_mode_probability(&[4, 2], 3).unwrap();
        assert_eq!(q, vec![r(16, 20), r(4, 20)]);
    }

    #[test]
    fn all_honest_always_wins() {
        assert_eq!(brute_force_mode_probability(&[6], 3).unwrap(), vec![r(1, 1)]);
    }

    #[test]
    fn refuses_large_instances() {
        assert!(matches!(
            brute_force_mode_probability(&[80, 20], 10),
            Err(Error::InstanceTooLarge(_))
        ));
        assert!(brute_force_mode_probability(&[3, 2], 6).is_err());
    }

    #[test]
    fn single_trial() {
        let est = mc_mode_probability(&[4, 2], 3, 1, 7).unwrap();
        assert_eq!(est.trials, 1);
        assert!(est.estimate.iter().all(|&e| e == 0.0 || e == 1.0));
        assert!(est.estimate.iter().sum::<f64>() <= 1.0);
        assert!(mc_mode_probability(&[4, 2], 3, 0, 7).is_err());
    }

    #[test]
    fn monte_carlo_agrees_with_enumeration() {
        let counts = [6, 3, 3];
        let exact = brute_force_mode_probability(&counts, 5).unwrap();
        let est = mc_mode_probability(&counts, 5, 200_000, 11).unwrap();
        for (l, q) in exact.iter().enumerate() {
            let q = crate::analysis::to_f64(q);
            let sd = (q * (1.0 - q) / 200_000.0).sqrt().max(1e-6);
            assert!((est.estimate[l] - q).abs() < 4.0 * sd, "category {l}");
        }
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let a = mc_mode_probability(&[10, 5, 5], 6, 1000, 3).unwrap();
        let b = mc_mode_probability(&[10, 5, 5], 6, 1000, 3).unwrap();
        assert_eq!(a, b);
    }
}
