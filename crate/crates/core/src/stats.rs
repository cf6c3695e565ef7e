//! Least squares, rank correlation and t-tests.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::beta::beta_reg;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Relative size of a QR pivot below which the design counts as rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_err: f64,
    pub t: f64,
    pub p: f64,
    pub conf95_lo: f64,
    pub conf95_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub coefficients: Vec<Coefficient>,
    pub r_squared: f64,
    pub n: usize,
    pub dof: usize,
    pub intercept: bool,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// Fixed-width table, one coefficient per row.
    pub fn to_text(&self) -> String {
        let width = self.coefficients.iter().map(|c| c.name.len()).max().unwrap_or(0).max(9);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$} {:>12} {:>12} {:>9} {:>10} {:>12} {:>12}",
            "term", "coef", "std err", "t", "P>|t|", "[0.025", "0.975]"
        );
        for c in &self.coefficients {
            let _ = writeln!(
                out,
                "{:<width$} {:>12.6} {:>12.6} {:>9.3} {:>10.3e} {:>12.6} {:>12.6}",
                c.name, c.estimate, c.std_err, c.t, c.p, c.conf95_lo, c.conf95_hi
            );
        }
        let _ = writeln!(out, "R-squared {:.4}   N {}   dof {}", self.r_squared, self.n, self.dof);
        out
    }
}

/// Ordinary least squares of `y` on the given regressor columns.
///
/// With `intercept` a constant column named `const` is prepended and R² is
/// centered; without it R² is computed about zero.
pub fn ols(y: &[f64], columns: &[Vec<f64>], names: &[&str], intercept: bool) -> Result<RegressionResult> {
    let n = y.len();
    if columns.len() != names.len() {
        return Err(Error::Dimension(format!("{} columns but {} names", columns.len(), names.len())));
    }
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::Dimension(format!("column of length {} for {n} observations", c.len())));
    }
    if y.iter().chain(columns.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite regression input".into()));
    }
    let p = columns.len() + usize::from(intercept);
    if p == 0 {
        return Err(Error::Dimension("no regressors".into()));
    }
    if n <= p {
        return Err(Error::InsufficientData(format!("{n} observations for {p} parameters")));
    }
    let mut all_names: Vec<String> = Vec::with_capacity(p);
    if intercept {
        all_names.push("const".into());
    }
    all_names.extend(names.iter().map(|s| s.to_string()));
    let x = DMatrix::from_fn(n, p, |r, c| {
        if intercept {
            if c == 0 {
                1.0
            } else {
                columns[c - 1][r]
            }
        } else {
            columns[c][r]
        }
    });
    let yv = DVector::from_column_slice(y);

    let qr = x.clone().qr();
    let r = qr.r();
    let rmax = r.diagonal().amax();
    if rmax == 0.0 || r.diagonal().iter().any(|d| d.abs() <= RANK_TOL * rmax) {
        return Err(Error::SingularDesign);
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r.solve_upper_triangular(&qty).ok_or(Error::SingularDesign)?;
    let resid = &yv - &x * &beta;
    let rss = resid.norm_squared();
    let dof = n - p;
    let s2 = rss / dof as f64;
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(p, p)).ok_or(Error::SingularDesign)?;
    let cov_diag: Vec<f64> = (0..p).map(|i| r_inv.row(i).norm_squared() * s2).collect();

    let tss = if intercept {
        let mean = y.iter().sum::<f64>() / n as f64;
        y.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
    } else {
        y.iter().map(|v| v * v).sum::<f64>()
    };
    let r_squared = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 1.0 };
    let tcrit = student_t_quantile(0.975, dof as f64)?;

    let coefficients = all_names
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let estimate = beta[i];
            let std_err = cov_diag[i].sqrt();
            let t = if std_err > 0.0 {
                estimate / std_err
            } else if estimate == 0.0 {
                0.0
            } else {
                estimate.signum() * f64::INFINITY
            };
            Coefficient {
                name,
                estimate,
                std_err,
                t,
                p: student_t_two_tailed(t, dof as f64),
                conf95_lo: estimate - tcrit * std_err,
                conf95_hi: estimate + tcrit * std_err,
            }
        })
        .collect();
    Ok(RegressionResult { coefficients, r_squared, n, dof, intercept })
}

/// Simple regression `y = b0 + b1 x`.
pub fn ols_simple(y: &[f64], x: &[f64], name: &str) -> Result<RegressionResult> {
    ols(y, &[x.to_vec()], &[name], true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelation {
    pub rho: f64,
    pub p_two_tailed: f64,
    pub n: usize,
}

/// 1-based ranks with ties given their average rank.
pub fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} vs {} values", x.len(), y.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman correlation of mid-ranks; p from `t = ρ √((n−2)/(1−ρ²))`.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<RankCorrelation> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} vs {} values", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} pairs; need at least 3")));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Numerical("NaN in rank correlation input".into()));
    }
    let rho =
        pearson(&mid_ranks(x), &mid_ranks(y)).map_err(|_| Error::DegenerateInput("ranks have zero variance".into()))?;
    let dof = (n - 2) as f64;
    let p_two_tailed =
        if rho.abs() >= 1.0 { 0.0 } else { student_t_two_tailed(rho * (dof / (1.0 - rho * rho)).sqrt(), dof) };
    Ok(RankCorrelation { rho, p_two_tailed, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub n: usize,
    pub mean: f64,
    pub std_err: f64,
}

/// Two-tailed one-sample t-test of the mean against `mu0`.
pub fn t_test_one_sample(x: &[f64], mu0: f64) -> Result<TTest> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} observations; need at least 2")));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::DegenerateInput("sample variance is zero".into()));
    }
    let std_err = (var / n as f64).sqrt();
    let t = (mean - mu0) / std_err;
    Ok(TTest { t, p: student_t_two_tailed(t, (n - 1) as f64), n, mean, std_err })
}

/// `P(|T| ≥ |t|)` for Student's t with `dof` degrees of freedom.
pub fn student_t_two_tailed(t: f64, dof: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(dof / 2.0, 0.5, dof / (dof + t * t)).clamp(0.0, 1.0)
}

pub fn student_t_cdf(t: f64, dof: f64) -> f64 {
    let tail = 0.5 * student_t_two_tailed(t, dof);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

pub fn student_t_quantile(p: f64, dof: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) || !(dof > 0.0) {
        return Err(Error::Config(format!("quantile needs 0 < p < 1 and dof > 0 (got p={p}, dof={dof})")));
    }
    let dist = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(dist.inverse_cdf(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let r = ols_simple(&y, &x, "x").unwrap();
        assert_abs_diff_eq!(r.coefficients[1].estimate, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.coefficients[0].estimate, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn textbook_regression() {
        // reference fit: slope 0.8, se 0.3464, R² 0.64, slope p 0.1041
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.0, 3.0, 2.0, 5.0, 4.0];
        let r = ols_simple(&y, &x, "x").unwrap();
        let b = &r.coefficients[1];
        assert_abs_diff_eq!(b.estimate, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(b.std_err, 0.3464101615, epsilon = 1e-9);
        assert_abs_diff_eq!(r.r_squared, 0.64, epsilon = 1e-12);
        assert_abs_diff_eq!(b.p, 0.104088, epsilon = 1e-5);
        assert!(b.conf95_lo < b.estimate && b.estimate < b.conf95_hi);
    }

    #[test]
    fn singular_and_short_designs() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let twice: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let y = [1.0, 0.0, 1.0, 0.0];
        assert!(matches!(ols(&y, &[x.to_vec(), twice], &["a", "b"], true), Err(Error::SingularDesign)));
        assert!(matches!(ols(&y[..2], &[x[..2].to_vec()], &["a"], true), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn spearman_basics() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let rev = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert_eq!(spearman(&x, &x).unwrap().rho, 1.0);
        assert_eq!(spearman(&x, &rev).unwrap().rho, -1.0);
        assert_eq!(mid_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert!(matches!(spearman(&x, &[1.0; 5]), Err(Error::DegenerateInput(_))));
        assert!(matches!(spearman(&x[..2], &x[..2]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn t_test_basics() {
        let r = t_test_one_sample(&[-1.0, 1.0], 0.0).unwrap();
        assert_eq!(r.t, 0.0);
        assert_abs_diff_eq!(r.p, 1.0, epsilon = 1e-15);
        assert!(matches!(t_test_one_sample(&[2.0, 2.0, 2.0], 0.0), Err(Error::DegenerateInput(_))));
        assert!(matches!(t_test_one_sample(&[2.0], 0.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn t_table_quantiles() {
        // (dof, two-tailed critical value, alpha) from standard t tables
        let table = [
            (1.0, 12.706, 0.05),
            (2.0, 4.303, 0.05),
            (3.0, 3.182, 0.05),
            (5.0, 2.571, 0.05),
            (10.0, 2.228, 0.05),
            (20.0, 2.086, 0.05),
            (26.0, 2.056, 0.05),
            (30.0, 2.042, 0.05),
            (60.0, 2.000, 0.05),
            (120.0, 1.980, 0.05),
            (1.0, 6.314, 0.10),
            (5.0, 2.015, 0.10),
            (10.0, 1.812, 0.10),
            (26.0, 1.706, 0.10),
            (4.0, 4.604, 0.01),
            (10.0, 3.169, 0.01),
            (26.0, 2.779, 0.01),
            (8.0, 5.041, 0.001),
            (23.0, 3.768, 0.001),
            (50.0, 3.496, 0.001),
        ];
        for (dof, t, alpha) in table {
            let p = student_t_two_tailed(t, dof);
            assert!((p - alpha).abs() < 1e-3, "dof {dof}, t {t}: p {p}");
            let q = student_t_quantile(1.0 - alpha / 2.0, dof).unwrap();
            assert!((q - t).abs() < 2e-3, "dof {dof}: quantile {q}");
        }
        assert_abs_diff_eq!(student_t_cdf(0.0, 7.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(student_t_cdf(-1.5, 7.0) + student_t_cdf(1.5, 7.0), 1.0, epsilon = 1e-14);
    }
}
