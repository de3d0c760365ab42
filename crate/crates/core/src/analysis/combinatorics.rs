//! Exact binomials and truncated-polynomial arithmetic.

use std::ops::{Add, Mul};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::{Error, Result};

/// `binom(a, i)`, zero when `a < i`.
pub fn binomial(a: i64, i: i64) -> Result<BigUint> {
    if i < 0 {
        return Err(Error::InvalidArgument(format!("binomial lower index {i} is negative")));
    }
    if a < i {
        return Ok(BigUint::zero());
    }
    let a = a as u64;
    let i = (i as u64).min(a - i as u64);
    let mut acc = BigUint::one();
    for j in 0..i {
        acc *= a - j;
        acc /= j + 1;
    }
    Ok(acc)
}

/// Generalized binomial `a(a-1)…(a-i+1)/i!` for a rational `a`, with the
/// same `binom(a, i) = 0 when a < i` convention.
pub fn binomial_rational(a: &BigRational, i: u64) -> BigRational {
    if *a < BigRational::from_integer(BigInt::from(i)) {
        return BigRational::zero();
    }
    let mut acc = BigRational::one();
    for j in 0..i {
        acc = acc * (a - BigRational::from_integer(BigInt::from(j)))
            / BigRational::from_integer(BigInt::from(j + 1));
    }
    acc
}

/// Coefficients `[binom(N_r, 0), …, binom(N_r, i-1)]`.
pub fn truncation_polynomial(count: u64, i: u64) -> Result<Vec<BigUint>> {
    if i < 1 {
        return Err(Error::InvalidArgument("truncation degree must be at least 1".into()));
    }
    (0..i).map(|j| binomial(count as i64, j as i64)).collect()
}

/// Product of two coefficient lists, dropping every degree above `max_deg`.
pub(crate) fn mul_truncated<T>(a: &[T], b: &[T], max_deg: usize) -> Vec<T>
where
    T: Clone + Zero + Add<Output = T> + Mul<Output = T>,
{
    let len = (a.len() + b.len()).saturating_sub(1).min(max_deg + 1);
    let mut out = vec![T::zero(); len];
    for (i, ai) in a.iter().enumerate().take(len) {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate().take(len - i) {
            out[i + j] = std::mem::replace(&mut out[i + j], T::zero()) + ai.clone() * bj.clone();
        }
    }
    out
}

/// Worker counts that may be integers or, for fractional category shares
/// like `N·p/k = 16/3`, exact rationals.
pub(crate) trait Count: Clone {
    type Value: Clone + Zero + One + Add<Output = Self::Value> + Mul<Output = Self::Value>;
    fn choose(&self, j: u64) -> Self::Value;
    fn minus_one(&self) -> Self;
    fn to_rational(v: &Self::Value) -> BigRational;
}

impl Count for u64 {
    type Value = BigInt;

    fn choose(&self, j: u64) -> BigInt {
        binomial(*self as i64, j as i64)
            .map(BigInt::from)
            .unwrap_or_default()
    }

    fn minus_one(&self) -> Self {
        self.saturating_sub(1)
    }

    fn to_rational(v: &BigInt) -> BigRational {
        BigRational::from_integer(v.clone())
    }
}

impl Count for BigRational {
    type Value = BigRational;

    fn choose(&self, j: u64) -> BigRational {
        binomial_rational(self, j)
    }

    fn minus_one(&self) -> Self {
        self - BigRational::one()
    }

    fn to_rational(v: &BigRational) -> BigRational {
        v.clone()
    }
}

/// Decimal approximation used only for display.
pub fn to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        return v;
    }
    // fall back on a scaled integer division for huge numerators/denominators
    let shift = r.denom().bits().max(r.numer().abs().bits()).saturating_sub(900);
    let num = r.numer() >> shift;
    let den = r.denom() >> shift;
    num.to_f64().unwrap_or(f64::NAN) / den.to_f64().unwrap_or(f64::NAN)
}
