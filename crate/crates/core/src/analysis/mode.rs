//! Exact mode distributions when `n` of `N` categorized workers are drawn
//! uniformly without replacement.
//!
//! Category `ℓ` is the mode of a draw when it holds `i ≥ i0` of the sampled
//! workers and every other category holds fewer than `i`. Counting such draws
//! reduces to reading one coefficient of a product of truncated binomial
//! polynomials `q_i^r(x) = Σ_{j<i} binom(N_r, j) x^j`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::combinatorics::{binomial, mul_truncated, to_f64, Count};
use crate::{Error, Result};

/// Worker counts `(N_0, …, N_k)` with `N_0` honest, plus the draw size `n`.
///
/// Counts are exact rationals so that equal splits such as `N·p/k = 16/3`
/// can be evaluated with generalized binomials; the total `N` must be an
/// integer.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryCounts {
    counts: Vec<BigRational>,
    total: u64,
    n: u64,
}

fn rat(v: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

impl CategoryCounts {
    pub fn new(counts: Vec<u64>, n: u64) -> Result<Self> {
        Self::fractional(counts.into_iter().map(rat).collect(), n)
    }

    pub fn fractional(counts: Vec<BigRational>, n: u64) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidArgument("no categories".into()));
        }
        if counts.iter().any(|c| *c < BigRational::zero()) {
            return Err(Error::InvalidArgument("category counts must be nonnegative".into()));
        }
        let sum: BigRational = counts.iter().cloned().sum();
        if !sum.is_integer() {
            return Err(Error::InvalidArgument(format!("total worker count {sum} is not an integer")));
        }
        let total: u64 = sum
            .to_integer()
            .try_into()
            .map_err(|_| Error::InvalidArgument("total worker count out of range".into()))?;
        if n < 1 || n > total {
            return Err(Error::InvalidArgument(format!("need N >= n >= 1, got N={total}, n={n}")));
        }
        Ok(Self { counts, total, n })
    }

    /// `N(1 - p)` honest workers and `N·p/k` in each of `k` categories.
    pub fn equal_split(total: u64, p: &BigRational, k: usize, n: u64) -> Result<Self> {
        if *p < BigRational::zero() || *p > BigRational::one() {
            return Err(Error::InvalidArgument(format!("adversary rate {p} outside [0, 1]")));
        }
        if k == 0 && !p.is_zero() {
            return Err(Error::InvalidArgument("positive adversary rate needs k >= 1".into()));
        }
        let honest = rat(total) * (BigRational::one() - p);
        let mut counts = vec![honest];
        if k > 0 {
            let share = rat(total) * p / rat(k as u64);
            counts.extend(std::iter::repeat_n(share, k));
        }
        Self::fractional(counts, n)
    }

    pub fn counts(&self) -> &[BigRational] {
        &self.counts
    }

    /// Integer counts, when every count is integral.
    pub fn integral(&self) -> Option<Vec<u64>> {
        self.counts
            .iter()
            .map(|c| c.is_integer().then(|| c.to_integer().try_into().ok()).flatten())
            .collect()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of adversarial categories.
    pub fn k(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn adversary_rate(&self) -> BigRational {
        BigRational::one() - &self.counts[0] / rat(self.total)
    }

    /// `max(⌈n/(k+1)⌉, ⌈n(1-p)⌉)`.
    pub fn i0(&self) -> u64 {
        let by_categories = self.n.div_ceil(self.k() as u64 + 1);
        let by_rate = (rat(self.n) * &self.counts[0] / rat(self.total)).ceil().to_integer();
        let by_rate: u64 = by_rate.try_into().unwrap_or(0);
        by_categories.max(by_rate)
    }

    fn check_category(&self, l: usize) -> Result<()> {
        if l >= self.counts.len() {
            return Err(Error::InvalidArgument(format!(
                "category {l} out of range 0..={}",
                self.k()
            )));
        }
        Ok(())
    }
}

/// Coefficient of `x^deg` in `∏_{r≠l} q_i^r(x)`.
fn product_coefficient<C: Count>(counts: &[C], l: usize, i: u64, deg: u64) -> C::Value {
    let max_deg = deg as usize;
    let mut poly = vec![C::Value::one()];
    for (r, c) in counts.iter().enumerate() {
        if r == l {
            continue;
        }
        let q: Vec<C::Value> = (0..i.min(deg + 1)).map(|j| c.choose(j)).collect();
        poly = mul_truncated(&poly, &q, max_deg);
    }
    poly.get(max_deg).cloned().unwrap_or_else(C::Value::zero)
}

/// Number of draws (weighted, for fractional counts) in which `l` is the mode.
fn mode_numerator<C: Count>(counts: &[C], l: usize, n: u64, i0: u64) -> C::Value {
    (i0..=n).fold(C::Value::zero(), |acc, i| {
        let own = counts[l].choose(i);
        if own.is_zero() {
            return acc;
        }
        acc + own * product_coefficient(counts, l, i, n - i)
    })
}

/// Draws of the remaining `n - 1` workers, given one fixed worker of
/// category `l`, in which `l` is the mode. `i` counts the other members of
/// `l`, so the category holds `i + 1` and every rival must stay below that.
fn worker_mode_numerator<C: Count>(counts: &[C], l: usize, n: u64, i0: u64) -> C::Value {
    let others = counts[l].minus_one();
    (i0 - 1..n).fold(C::Value::zero(), |acc, i| {
        let own = others.choose(i);
        if own.is_zero() {
            return acc;
        }
        acc + own * product_coefficient(counts, l, i + 1, n - 1 - i)
    })
}

fn dispatch<F, G>(cc: &CategoryCounts, on_int: F, on_frac: G) -> BigRational
where
    F: Fn(&[u64]) -> BigRational,
    G: Fn(&[BigRational]) -> BigRational,
{
    match cc.integral() {
        Some(ints) => on_int(&ints),
        None => on_frac(cc.counts()),
    }
}

fn binom_rat(a: u64, i: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(binomial(a as i64, i as i64).unwrap_or_default()))
}

/// Coefficient `a_{i,ℓ}` of `x^{n-i}` in `∏_{r≠ℓ} q_i^r(x)`.
pub fn coefficient_a(i: u64, l: usize, cc: &CategoryCounts) -> Result<BigRational> {
    cc.check_category(l)?;
    if i < 1 || i > cc.n {
        return Err(Error::InvalidArgument(format!("index i={i} outside 1..={}", cc.n)));
    }
    let deg = cc.n - i;
    Ok(dispatch(
        cc,
        |c| u64::to_rational(&product_coefficient(c, l, i, deg)),
        |c| product_coefficient(c, l, i, deg),
    ))
}

/// Probability that category `l` is the mode of one draw.
pub fn mode_category_probability(cc: &CategoryCounts, l: usize) -> Result<BigRational> {
    cc.check_category(l)?;
    let (n, i0) = (cc.n, cc.i0());
    let num = dispatch(
        cc,
        |c| u64::to_rational(&mode_numerator(c, l, n, i0)),
        |c| mode_numerator(c, l, n, i0),
    );
    Ok(num / binom_rat(cc.total, n))
}

/// Probability that some category is the mode.
pub fn mode_exists_probability(cc: &CategoryCounts) -> BigRational {
    (0..cc.counts.len())
        .map(|l| mode_category_probability(cc, l).expect("category index in range"))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeProbabilities {
    /// Unconditional probability that each category is the mode.
    pub per_category: Vec<BigRational>,
    /// Probability that a mode exists.
    pub q: BigRational,
    /// `per_category[ℓ] / q`; all zero when `q = 0`.
    pub q_conditional: Vec<BigRational>,
    pub i0: u64,
}

impl ModeProbabilities {
    pub fn per_category_f64(&self) -> Vec<f64> {
        self.per_category.iter().map(to_f64).collect()
    }

    pub fn q_f64(&self) -> f64 {
        to_f64(&self.q)
    }

    pub fn q_conditional_f64(&self) -> Vec<f64> {
        self.q_conditional.iter().map(to_f64).collect()
    }
}

pub fn mode_probabilities(cc: &CategoryCounts) -> ModeProbabilities {
    let per_category: Vec<BigRational> = (0..cc.counts.len())
        .map(|l| mode_category_probability(cc, l).expect("category index in range"))
        .collect();
    let q: BigRational = per_category.iter().cloned().sum();
    let q_conditional = if q.is_zero() {
        vec![BigRational::zero(); per_category.len()]
    } else {
        per_category.iter().map(|p| p / &q).collect()
    };
    ModeProbabilities {
        per_category,
        q,
        q_conditional,
        i0: cc.i0(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerModeProbability {
    /// Probability that a given worker is drawn; equals `n/N`.
    pub p_w: BigRational,
    pub p_mode_given_w: BigRational,
    pub p_joint: BigRational,
}

/// Probabilities for one fixed worker of category `l`.
pub fn worker_mode_probability(cc: &CategoryCounts, l: usize) -> Result<WorkerModeProbability> {
    cc.check_category(l)?;
    if cc.counts[l] < BigRational::one() {
        return Err(Error::InvalidArgument(format!("category {l} has no workers")));
    }
    let (n, i0, total) = (cc.n, cc.i0(), cc.total);
    let p_w = binom_rat(total - 1, n - 1) / binom_rat(total, n);
    let num = dispatch(
        cc,
        |c| u64::to_rational(&worker_mode_numerator(c, l, n, i0)),
        |c| worker_mode_numerator(c, l, n, i0),
    );
    let p_mode_given_w = num / binom_rat(total - 1, n - 1);
    let p_joint = &p_w * &p_mode_given_w;
    Ok(WorkerModeProbability {
        p_w,
        p_mode_given_w,
        p_joint,
    })
}

/// Which per-iteration probabilities feed the non-mode count distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmfForm {
    /// `(1 - P)` and `(1 - 1/N + P)`, as stated; these need not sum to one.
    Verbatim,
    /// Non-mode with probability `n/N - P`, otherwise `1 - n/N + P`.
    Normalized { n: u64 },
}

/// Probability that a worker with joint mode probability `p_joint` fails to
/// be the mode `s` times in `big_s` iterations.
pub fn non_mode_count_pmf(big_s: u64, s: u64, p_joint: f64, total: u64, form: PmfForm) -> Result<f64> {
    if s > big_s {
        return Err(Error::InvalidArgument(format!("s={s} exceeds S={big_s}")));
    }
    let (fail, other) = match form {
        PmfForm::Verbatim => (1.0 - p_joint, 1.0 - 1.0 / total as f64 + p_joint),
        PmfForm::Normalized { n } => {
            let p_w = n as f64 / total as f64;
            (p_w - p_joint, 1.0 - p_w + p_joint)
        }
    };
    let ln_choose: f64 = (1..=s)
        .map(|j| ((big_s - s + j) as f64 / j as f64).ln())
        .sum();
    let pow_ln = |base: f64, e: u64| -> f64 {
        if e == 0 {
            0.0
        } else {
            e as f64 * base.ln()
        }
    };
    Ok((ln_choose + pow_ln(fail, s) + pow_ln(other, big_s - s)).exp())
}

/// `n/N` in lowest terms, the closed form of `binom(N-1, n-1) / binom(N, n)`.
pub fn selection_probability(total: u64, n: u64) -> BigRational {
    let g = total.gcd(&n);
    BigRational::new(BigInt::from(n / g), BigInt::from(total / g))
}
