//! Dense linear-algebra primitives for the Kaczmarz iteration.

use std::fmt::Write as _;

use rand::distr::{Distribution, Uniform};
use rand_distr::StandardNormal;

use crate::rng::{self, Stream};
use crate::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(size: usize) -> Self {
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            data[i * size + i] = 1.0;
        }
        Self {
            rows: size,
            cols: size,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "vector of length {} against {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok(self.row_iter().map(|r| dot(r, x)).collect())
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Smallest eigenvalue of `AᵀA`, i.e. the squared smallest singular value.
    pub fn sigma_min_sq(&self) -> f64 {
        let a = nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data);
        let gram = a.transpose() * &a;
        gram.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// A consistent or noisy linear system with known ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub x_star: Vec<f64>,
    /// All zeros for a consistent system.
    pub noise: Vec<f64>,
}

impl Problem {
    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    pub fn is_consistent(&self) -> bool {
        self.noise.iter().all(|&e| e == 0.0)
    }

    /// Plain-text export: `m d`, the rows of A, then b, then x*.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.rows(), self.cols());
        let line = |out: &mut String, vals: &[f64]| {
            let strs: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(out, "{}", strs.join(" "));
        };
        for row in self.a.row_iter() {
            line(&mut out, row);
        }
        line(&mut out, &self.b);
        line(&mut out, &self.x_star);
        out
    }

    /// Inverse of [`Problem::to_text`]. The noise vector is recovered as
    /// `b - A x*`.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty document".into(),
        })?;
        let dims = parse_reals(hline, header)?;
        if dims.len() != 2 || dims.iter().any(|d| d.fract() != 0.0 || *d < 1.0) {
            return Err(Error::Parse {
                line: hline + 1,
                message: "expected header `m d`".into(),
            });
        }
        let (m, d) = (dims[0] as usize, dims[1] as usize);
        let mut next_line = |len: usize, what: &str| -> Result<Vec<f64>> {
            let (idx, l) = lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("missing {what}"),
            })?;
            let vals = parse_reals(idx, l)?;
            if vals.len() != len {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("{what}: expected {len} values, found {}", vals.len()),
                });
            }
            Ok(vals)
        };
        let mut data = Vec::with_capacity(m * d);
        for i in 0..m {
            data.extend(next_line(d, &format!("row {i} of A"))?);
        }
        let a = Matrix::from_vec(m, d, data)?;
        let b = next_line(m, "b")?;
        let x_star = next_line(d, "x_star")?;
        let ax = a.mul_vec(&x_star)?;
        let noise = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        Ok(Self {
            a,
            b,
            x_star,
            noise,
        })
    }
}

fn parse_reals(idx: usize, line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("not a number: {tok:?}"),
            })
        })
        .collect()
}

/// Row-sampling probabilities `‖A_i‖² / ‖A‖_F²`.
#[derive(Debug, Clone, PartialEq)]
pub struct RowDistribution {
    pub probabilities: Vec<f64>,
}

pub fn row_sampling_distribution(a: &Matrix) -> Result<RowDistribution> {
    let norms: Vec<f64> = a.row_iter().map(norm_sq).collect();
    let total: f64 = norms.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::DegenerateDistribution);
    }
    Ok(RowDistribution {
        probabilities: norms.into_iter().map(|n| n / total).collect(),
    })
}

/// Random row-normalized Gaussian system. Noise entries are uniform on
/// `[0, noise_magnitude]`.
pub fn generate_problem(m: usize, d: usize, noise_magnitude: f64, seed: u64) -> Result<Problem> {
    if d == 0 || m < d {
        return Err(Error::Dimension(format!(
            "need m >= d >= 1, got m={m}, d={d}"
        )));
    }
    if !(noise_magnitude >= 0.0 && noise_magnitude.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise magnitude must be a nonnegative real, got {noise_magnitude}"
        )));
    }
    let mut rng = rng::stream(seed, Stream::Problem);
    let mut data = Vec::with_capacity(m * d);
    for _ in 0..m {
        let mut row: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = norm_sq(&row).sqrt();
        // a Gaussian row of exact zeros has probability zero
        row.iter_mut().for_each(|v| *v /= norm);
        data.extend(row);
    }
    let a = Matrix::from_vec(m, d, data)?;
    let x_star: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let noise: Vec<f64> = if noise_magnitude > 0.0 {
        let unif = Uniform::new_inclusive(0.0, noise_magnitude)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        (0..m).map(|_| unif.sample(&mut rng)).collect()
    } else {
        vec![0.0; m]
    };
    let b = a
        .mul_vec(&x_star)?
        .into_iter()
        .zip(&noise)
        .map(|(ax, e)| ax + e)
        .collect();
    Ok(Problem {
        a,
        b,
        x_star,
        noise,
    })
}

/// The coefficient an honest worker returns: `(b_i - <A_i, x>) / ‖A_i‖²`.
pub fn true_coefficient(x: &[f64], row: &[f64], b_i: f64) -> Result<f64> {
    if x.len() != row.len() {
        return Err(Error::Dimension(format!(
            "iterate of length {} against row of length {}",
            x.len(),
            row.len()
        )));
    }
    let nrm = norm_sq(row);
    if nrm == 0.0 {
        return Err(Error::ZeroRow);
    }
    Ok((b_i - dot(row, x)) / nrm)
}

/// `x + c·A_i`.
pub fn kaczmarz_step(x: &[f64], row: &[f64], c: f64) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    kaczmarz_step_in_place(&mut out, row, c)?;
    Ok(out)
}

pub fn kaczmarz_step_in_place(x: &mut [f64], row: &[f64], c: f64) -> Result<()> {
    if x.len() != row.len() {
        return Err(Error::Dimension(format!(
            "iterate of length {} against row of length {}",
            x.len(),
            row.len()
        )));
    }
    for (xi, ai) in x.iter_mut().zip(row) {
        *xi += c * ai;
    }
    Ok(())
}

pub fn error_norm(x: &[f64], x_star: &[f64]) -> Result<f64> {
    if x.len() != x_star.len() {
        return Err(Error::Dimension(format!(
            "iterate of length {} against solution of length {}",
            x.len(),
            x_star.len()
        )));
    }
    Ok(x.iter()
        .zip(x_star)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn generated_rows_are_unit_norm_and_consistent() {
        let p = generate_problem(1000, 100, 0.0, 3).unwrap();
        for row in p.a.row_iter() {
            assert_abs_diff_eq!(norm_sq(row).sqrt(), 1.0, epsilon = 1e-12);
        }
        assert!(p.is_consistent());
        let ax = p.a.mul_vec(&p.x_star).unwrap();
        assert_eq!(ax, p.b);
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = generate_problem(20, 5, 1e-3, 11).unwrap();
        let b = generate_problem(20, 5, 1e-3, 11).unwrap();
        let c = generate_problem(20, 5, 1e-3, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn two_by_two_samples_uniformly() {
        let p = generate_problem(2, 2, 0.0, 99).unwrap();
        let dist = row_sampling_distribution(&p.a).unwrap();
        assert_abs_diff_eq!(dist.probabilities[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(dist.probabilities[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn noise_is_bounded_and_one_sided() {
        let p = generate_problem(10, 3, 1e-4, 7).unwrap();
        let ax = p.a.mul_vec(&p.x_star).unwrap();
        for (bi, axi) in p.b.iter().zip(&ax) {
            let e = bi - axi;
            assert!(e.abs() <= 1e-4 + 1e-15);
        }
        assert!(p.noise.iter().all(|&e| (0.0..=1e-4).contains(&e)));
        assert!(!p.is_consistent());
    }

    #[test]
    fn invalid_dimensions() {
        assert!(matches!(generate_problem(2, 3, 0.0, 0), Err(Error::Dimension(_))));
        assert!(matches!(generate_problem(0, 0, 0.0, 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn sampling_distribution_examples() {
        let id = Matrix::identity(3);
        let d = row_sampling_distribution(&id).unwrap();
        for p in d.probabilities {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
        }
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let d = row_sampling_distribution(&a).unwrap();
        assert_abs_diff_eq!(d.probabilities[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(d.probabilities[1], 0.8, epsilon = 1e-15);

        let p = generate_problem(1000, 100, 0.0, 1).unwrap();
        let d = row_sampling_distribution(&p.a).unwrap();
        assert!(d.probabilities.iter().all(|&p| (p - 1e-3).abs() < 1e-12));

        let zero = Matrix::from_vec(2, 2, vec![0.0; 4]).unwrap();
        assert_eq!(row_sampling_distribution(&zero), Err(Error::DegenerateDistribution));
    }

    #[test]
    fn coefficient_examples() {
        assert_eq!(true_coefficient(&[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap(), 1.0);
        let c = true_coefficient(&[1.0, 1.0], &[0.6, 0.8], 0.0).unwrap();
        assert_abs_diff_eq!(c, -1.4, epsilon = 1e-12);
        assert_eq!(true_coefficient(&[1.0, 1.0], &[0.0, 0.0], 1.0), Err(Error::ZeroRow));

        let p = generate_problem(30, 4, 0.0, 5).unwrap();
        for i in 0..p.rows() {
            let c = true_coefficient(&p.x_star, p.a.row(i), p.b[i]).unwrap();
            assert!(c.abs() < 1e-12);
        }
    }

    #[test]
    fn step_examples() {
        assert_eq!(kaczmarz_step(&[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap(), vec![1.0, 0.0]);
        assert_eq!(kaczmarz_step(&[0.3, -2.0], &[1.0, 0.0], 0.0).unwrap(), vec![0.3, -2.0]);
        let x = kaczmarz_step(&[0.0, 0.0], &[0.6, 0.8], 2.0).unwrap();
        assert_abs_diff_eq!(x[0], 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 1.6, epsilon = 1e-15);
        assert!(matches!(kaczmarz_step(&[0.0], &[1.0, 0.0], 1.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn error_norm_examples() {
        assert_eq!(error_norm(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(error_norm(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert!(error_norm(&[3.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let p = generate_problem(6, 3, 1e-4, 2).unwrap();
        let q = Problem::from_text(&p.to_text()).unwrap();
        assert_eq!(p.a, q.a);
        assert_eq!(p.b, q.b);
        assert_eq!(p.x_star, q.x_star);
        let first = p.to_text().lines().nth(1).unwrap().to_string();
        let tok = first.split_whitespace().next().unwrap();
        let digits = tok.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
        assert!(digits >= 15);
    }

    #[test]
    fn text_rejects_short_rows() {
        let err = Problem::from_text("2 2\n1 0\n0\n1 1\n1 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn sigma_min_of_scaled_identity() {
        let a = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 3.0], vec![0.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(a.sigma_min_sq(), 4.0, epsilon = 1e-12);
    }

    fn vec_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, len)
    }

    proptest! {
        #[test]
        fn step_moves_along_row(x in vec_strategy(4), row in vec_strategy(4), c in -5.0f64..5.0) {
            let y = kaczmarz_step(&x, &row, c).unwrap();
            // y - x = c·row exactly up to rounding of the addition
            for ((yi, xi), ai) in y.iter().zip(&x).zip(&row) {
                prop_assert!(((yi - xi) - c * ai).abs() <= 1e-12 * (1.0 + xi.abs() + (c * ai).abs()));
            }
        }

        #[test]
        fn true_step_projects_and_contracts(seed in 0u64..500, i in 0usize..12, x in vec_strategy(5)) {
            let p = generate_problem(12, 5, 0.0, seed).unwrap();
            let row = p.a.row(i);
            let c = true_coefficient(&x, row, p.b[i]).unwrap();
            let y = kaczmarz_step(&x, row, c).unwrap();
            let residual = p.b[i] - dot(row, &y);
            prop_assert!(residual.abs() <= 1e-12 * (1.0 + p.b[i].abs() + norm_sq(&x).sqrt()));
            let before = error_norm(&x, &p.x_star).unwrap();
            let after = error_norm(&y, &p.x_star).unwrap();
            prop_assert!(after <= before * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn distribution_sums_to_one_and_permutes(rows in proptest::collection::vec(vec_strategy(3), 2..8), shift in 0usize..8) {
            prop_assume!(rows.iter().flatten().any(|v| *v != 0.0));
            let a = Matrix::from_rows(&rows).unwrap();
            let d = row_sampling_distribution(&a).unwrap();
            prop_assert!((d.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(d.probabilities.iter().all(|p| *p >= 0.0));
            let k = shift % rows.len();
            let mut rotated = rows.clone();
            rotated.rotate_left(k);
            let mut expect = d.probabilities.clone();
            expect.rotate_left(k);
            let e = row_sampling_distribution(&Matrix::from_rows(&rotated).unwrap()).unwrap();
            for (p, q) in e.probabilities.iter().zip(&expect) {
                prop_assert!((p - q).abs() < 1e-15);
            }
        }

        #[test]
        fn error_norm_matches_recomputation(x in vec_strategy(6), y in vec_strategy(6)) {
            // independent route: fold squared differences in reverse order
            let mut acc = 0.0f64;
            for k in (0..6).rev() {
                acc = acc.hypot(x[k] - y[k]);
            }
            let got = error_norm(&x, &y).unwrap();
            prop_assert!((got - acc).abs() <= 1e-12 * (1.0 + acc));
        }
    }
}
