//! Two-population matrix games and the replicator vector field.
//!
//! A game is a pair of payoff matrices: `a_payoff` (rows are the A
//! strategies, columns the B strategies) and `b_payoff` (rows B, columns A).
//! States live on the product of the two probability simplices, laid out as
//! `(x_1..x_{n_a}, x_{n_a+1}..x_{n_a+n_b})`.
//!
//! Payoffs are held as exact rationals so that quantities derived at a
//! rational rest point (the rest point itself, the Jacobian there) can be
//! computed without rounding. Floating point is used for everything that
//! evaluates the field at arbitrary states.

use num::rational::{BigRational, Ratio};
use num::{BigInt, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

/// Violations of the simplex constraints smaller than this are repaired
/// (negatives clamped, populations renormalized); larger ones are rejected.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PayoffBimatrix {
    n_a: usize,
    n_b: usize,
    a_payoff: Vec<Vec<Rational>>,
    b_payoff: Vec<Vec<Rational>>,
    labels: Option<Vec<String>>,
    a_float: Vec<f64>,
    b_float: Vec<f64>,
}

impl PayoffBimatrix {
    /// Builds a game from both payoff matrices. `a` is `n_a × n_b`, `b` is `n_b × n_a`.
    pub fn new(a: Vec<Vec<Rational>>, b: Vec<Vec<Rational>>) -> Result<Self> {
        let n_a = a.len();
        if n_a == 0 {
            return Err(Error::Dimension("a_payoff has no rows".into()));
        }
        let n_b = a[0].len();
        if n_b == 0 {
            return Err(Error::Dimension("a_payoff has no columns".into()));
        }
        if a.iter().any(|row| row.len() != n_b) {
            return Err(Error::Dimension("a_payoff rows have unequal length".into()));
        }
        if b.len() != n_b || b.iter().any(|row| row.len() != n_a) {
            return Err(Error::Dimension(format!("b_payoff must be {n_b} x {n_a} to match a_payoff {n_a} x {n_b}")));
        }
        let a_float = a.iter().flatten().map(ratio_to_f64).collect();
        let b_float = b.iter().flatten().map(ratio_to_f64).collect();
        Ok(Self { n_a, n_b, a_payoff: a, b_payoff: b, labels: None, a_float, b_float })
    }

    /// Zero-sum game: B receives the negated transpose of A's payoffs.
    pub fn zero_sum(a: Vec<Vec<Rational>>) -> Result<Self> {
        let n_b = a.first().map_or(0, Vec::len);
        let b = (0..n_b).map(|j| a.iter().map(|row| -row[j]).collect()).collect();
        Self::new(a, b)
    }

    pub fn from_integers(a: &[&[i64]], b: Option<&[&[i64]]>) -> Result<Self> {
        let conv = |m: &[&[i64]]| -> Vec<Vec<Rational>> {
            m.iter().map(|row| row.iter().map(|&v| Rational::from_integer(v)).collect()).collect()
        };
        match b {
            Some(b) => Self::new(conv(a), conv(b)),
            None => Self::zero_sum(conv(a)),
        }
    }

    /// The O'Neill 4×4 zero-sum game.
    pub fn oneill() -> Self {
        let a: [&[i64]; 4] = [&[1, -1, -1, -1], &[-1, -1, 1, 1], &[-1, 1, -1, 1], &[-1, 1, 1, -1]];
        Self::from_integers(&a, None)
            .expect("static payoff table")
            .with_labels(["A1", "A2", "A3", "A4", "B1", "B2", "B3", "B4"].map(String::from).to_vec())
            .expect("eight labels")
    }

    pub fn matching_pennies() -> Self {
        let a: [&[i64]; 2] = [&[1, -1], &[-1, 1]];
        Self::from_integers(&a, None).expect("static payoff table")
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.dim() {
            return Err(Error::Dimension(format!("{} labels for a game with {} strategies", labels.len(), self.dim())));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    /// Dimension of the joint state space, `n_a + n_b`.
    pub fn dim(&self) -> usize {
        self.n_a + self.n_b
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn a_payoff(&self) -> &[Vec<Rational>] {
        &self.a_payoff
    }

    pub fn b_payoff(&self) -> &[Vec<Rational>] {
        &self.b_payoff
    }

    /// A's payoff when A plays `i` against B's `j` (0-based).
    pub fn a_at(&self, i: usize, j: usize) -> f64 {
        self.a_float[i * self.n_b + j]
    }

    /// B's payoff when B plays `j` against A's `i` (0-based).
    pub fn b_at(&self, j: usize, i: usize) -> f64 {
        self.b_float[j * self.n_a + i]
    }

    pub fn is_zero_sum(&self) -> bool {
        (0..self.n_a).all(|i| (0..self.n_b).all(|j| self.b_payoff[j][i] == -self.a_payoff[i][j]))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GameFile = serde_json::from_str(text)?;
        file.into_game()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&GameFile::from_game(self))?)
    }
}

fn ratio_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// On-disk game description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameFile {
    pub n_a: usize,
    pub n_b: usize,
    pub a_payoff: Vec<Vec<serde_json::Number>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_payoff: Option<Vec<Vec<serde_json::Number>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl GameFile {
    pub fn into_game(self) -> Result<PayoffBimatrix> {
        let conv = |m: &[Vec<serde_json::Number>]| -> Result<Vec<Vec<Rational>>> {
            m.iter().map(|row| row.iter().map(|v| parse_decimal(&v.to_string())).collect()).collect()
        };
        let a = conv(&self.a_payoff)?;
        if a.len() != self.n_a || a.iter().any(|r| r.len() != self.n_b) {
            return Err(Error::Dimension(format!(
                "a_payoff shape does not match n_a = {}, n_b = {}",
                self.n_a, self.n_b
            )));
        }
        let game = match &self.b_payoff {
            Some(b) => PayoffBimatrix::new(a, conv(b)?)?,
            None => PayoffBimatrix::zero_sum(a)?,
        };
        match self.labels {
            Some(labels) => game.with_labels(labels),
            None => Ok(game),
        }
    }

    pub fn from_game(game: &PayoffBimatrix) -> Self {
        let conv = |m: &[Vec<Rational>]| -> Vec<Vec<serde_json::Number>> {
            m.iter().map(|row| row.iter().map(rational_to_number).collect()).collect()
        };
        Self {
            n_a: game.n_a,
            n_b: game.n_b,
            a_payoff: conv(&game.a_payoff),
            b_payoff: (!game.is_zero_sum()).then(|| conv(&game.b_payoff)),
            labels: game.labels.clone(),
        }
    }
}

fn rational_to_number(r: &Rational) -> serde_json::Number {
    if r.is_integer() {
        serde_json::Number::from(*r.numer())
    } else {
        serde_json::Number::from_f64(ratio_to_f64(r)).expect("finite payoff")
    }
}

/// Parses a decimal literal (`-1`, `0.25`, `1.5e-2`) into an exact rational.
pub fn parse_decimal(text: &str) -> Result<Rational> {
    let bad = || Error::Parse(format!("not a decimal number: {text:?}"));
    let s = text.trim();
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut numer: i128 = all_digits.trim_start_matches('0').parse().unwrap_or(0);
    let mut scale = exponent - frac_part.len() as i32;
    let mut denom: i128 = 1;
    while scale > 0 {
        numer = numer.checked_mul(10).ok_or_else(bad)?;
        scale -= 1;
    }
    while scale < 0 {
        denom = denom.checked_mul(10).ok_or_else(bad)?;
        scale += 1;
    }
    if negative {
        numer = -numer;
    }
    let r = Ratio::new(numer, denom);
    let n = i64::try_from(*r.numer()).map_err(|_| bad())?;
    let d = i64::try_from(*r.denom()).map_err(|_| bad())?;
    Ok(Rational::new(n, d))
}

/// A point on the product of the two strategy simplices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    x: Vec<f64>,
    n_a: usize,
}

impl StateVector {
    /// Validates `x` as a state with `n_a` A strategies, repairing violations
    /// below [`CLAMP_TOLERANCE`].
    pub fn new(mut x: Vec<f64>, n_a: usize) -> Result<Self> {
        if n_a == 0 || n_a >= x.len() {
            return Err(Error::Dimension(format!(
                "state of length {} cannot hold {} A strategies and at least one B strategy",
                x.len(),
                n_a
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("non-finite component".into()));
        }
        let worst_negative = x.iter().fold(0.0_f64, |acc, &v| acc.max(-v));
        if worst_negative > CLAMP_TOLERANCE {
            return Err(Error::InvalidState(format!("component {:.3e} is negative", -worst_negative)));
        }
        let (a, b) = x.split_at_mut(n_a);
        for (name, pop) in [("A", a), ("B", b)] {
            let sum: f64 = pop.iter().sum();
            if (sum - 1.0).abs() > CLAMP_TOLERANCE {
                return Err(Error::InvalidState(format!("population {name} sums to {sum}")));
            }
            // rescaling a sum that is already 1 up to roundoff would only
            // perturb the last bits
            if pop.iter().all(|&v| v >= 0.0) && (sum - 1.0).abs() <= 1e-14 {
                continue;
            }
            let clamped_sum: f64 = pop.iter().map(|v| v.max(0.0)).sum();
            for v in pop.iter_mut() {
                *v = v.max(0.0) / clamped_sum;
            }
        }
        Ok(Self { x, n_a })
    }

    pub fn from_populations(a: &[f64], b: &[f64]) -> Result<Self> {
        Self::new(a.iter().chain(b).copied().collect(), a.len())
    }

    /// The pure profile `(a, b)` with 0-based strategy indices.
    pub fn vertex(a: usize, b: usize, n_a: usize, n_b: usize) -> Result<Self> {
        if a >= n_a || b >= n_b {
            return Err(Error::Dimension(format!("profile ({a}, {b}) outside {n_a} x {n_b}")));
        }
        let mut x = vec![0.0; n_a + n_b];
        x[a] = 1.0;
        x[n_a + b] = 1.0;
        Ok(Self { x, n_a })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.x
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.x.len() - self.n_a
    }

    pub fn population_a(&self) -> &[f64] {
        &self.x[..self.n_a]
    }

    pub fn population_b(&self) -> &[f64] {
        &self.x[self.n_a..]
    }

    fn check_game(&self, game: &PayoffBimatrix) -> Result<()> {
        if self.n_a != game.n_a || self.n_b() != game.n_b {
            return Err(Error::Dimension(format!(
                "state is {} + {}, game is {} x {}",
                self.n_a,
                self.n_b(),
                game.n_a,
                game.n_b
            )));
        }
        Ok(())
    }
}

/// Clamps small negatives and rescales each population to sum 1, returning
/// the largest pre-repair deviation of a population sum from 1.
pub fn renormalize_populations(x: &mut [f64], n_a: usize) -> f64 {
    let (a, b) = x.split_at_mut(n_a);
    let mut drift = 0.0_f64;
    for pop in [a, b] {
        let raw: f64 = pop.iter().sum();
        drift = drift.max((raw - 1.0).abs());
        let clamped: f64 = pop.iter().map(|v| v.max(0.0)).sum();
        if clamped > 0.0 {
            for v in pop.iter_mut() {
                *v = v.max(0.0) / clamped;
            }
        }
    }
    drift
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffProfile {
    /// Expected payoff of each pure strategy, A strategies first.
    pub u: Vec<f64>,
    pub u_bar_a: f64,
    pub u_bar_b: f64,
}

pub fn expected_payoffs(game: &PayoffBimatrix, s: &StateVector) -> Result<PayoffProfile> {
    s.check_game(game)?;
    let x = s.as_slice();
    let mut u = vec![0.0; game.dim()];
    let (u_bar_a, u_bar_b) = payoffs_into(game, x, &mut u);
    Ok(PayoffProfile { u, u_bar_a, u_bar_b })
}

fn payoffs_into(game: &PayoffBimatrix, x: &[f64], u: &mut [f64]) -> (f64, f64) {
    let (n_a, n_b) = (game.n_a, game.n_b);
    let (xa, xb) = x.split_at(n_a);
    for (i, ui) in u[..n_a].iter_mut().enumerate() {
        *ui = (0..n_b).map(|j| game.a_at(i, j) * xb[j]).sum();
    }
    for j in 0..n_b {
        u[n_a + j] = (0..n_a).map(|i| game.b_at(j, i) * xa[i]).sum();
    }
    let u_bar_a = xa.iter().zip(&u[..n_a]).map(|(p, v)| p * v).sum();
    let u_bar_b = xb.iter().zip(&u[n_a..]).map(|(p, v)| p * v).sum();
    (u_bar_a, u_bar_b)
}

/// Replicator velocity `v_j = x_j (U_j − Ū)` at a validated state.
pub fn replicator_velocity(game: &PayoffBimatrix, s: &StateVector) -> Result<Vec<f64>> {
    s.check_game(game)?;
    let mut v = vec![0.0; game.dim()];
    replicator_field(game, s.as_slice(), &mut v);
    Ok(v)
}

/// Unchecked replicator field on a raw coordinate vector of length `game.dim()`.
pub fn replicator_field(game: &PayoffBimatrix, x: &[f64], out: &mut [f64]) {
    let n_a = game.n_a;
    let (u_bar_a, u_bar_b) = payoffs_into(game, x, out);
    for (k, v) in out.iter_mut().enumerate() {
        let mean = if k < n_a { u_bar_a } else { u_bar_b };
        *v = x[k] * (*v - mean);
    }
}

/// Interior rest point from the indifference conditions, in exact arithmetic.
///
/// B's mixture makes every A strategy earn the same payoff and vice versa.
/// Only square games can have an isolated fully mixed rest point.
pub fn interior_rest_point_exact(game: &PayoffBimatrix) -> Result<Vec<BigRational>> {
    if game.n_a != game.n_b {
        return Err(Error::NoInteriorEquilibrium(format!(
            "{} x {} game has no isolated fully mixed rest point",
            game.n_a, game.n_b
        )));
    }
    let y = indifference_mix(&game.a_payoff)
        .ok_or_else(|| Error::NoInteriorEquilibrium("A-indifference system is singular".into()))?;
    let x = indifference_mix(&game.b_payoff)
        .ok_or_else(|| Error::NoInteriorEquilibrium("B-indifference system is singular".into()))?;
    let point: Vec<BigRational> = x.into_iter().chain(y).collect();
    if point.iter().any(|p| !p.is_positive()) {
        return Err(Error::NoInteriorEquilibrium("indifference solution leaves the simplex interior".into()));
    }
    Ok(point)
}

pub fn interior_rest_point(game: &PayoffBimatrix) -> Result<StateVector> {
    let exact = interior_rest_point_exact(game)?;
    let x = exact.iter().map(big_to_f64).collect();
    StateVector::new(x, game.n_a)
}

/// Opponent mixture `q` solving `M q = v·1`, `Σ q = 1` for a square payoff `M`.
fn indifference_mix(m: &[Vec<Rational>]) -> Option<Vec<BigRational>> {
    let rows = m.len();
    let cols = m[0].len();
    let big = |r: &Rational| BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()));
    // unknowns: q_0..q_{cols-1}, v
    let mut sys: Vec<Vec<BigRational>> = Vec::with_capacity(rows + 1);
    for row in m {
        let mut eq: Vec<BigRational> = row.iter().map(big).collect();
        eq.push(-BigRational::one());
        eq.push(BigRational::zero());
        sys.push(eq);
    }
    let mut sum_eq = vec![BigRational::one(); cols];
    sum_eq.push(BigRational::zero());
    sum_eq.push(BigRational::one());
    sys.push(sum_eq);
    let mut sol = solve_exact(sys)?;
    sol.pop();
    Some(sol)
}

/// Gauss–Jordan elimination on an augmented square system.
pub(crate) fn solve_exact(mut sys: Vec<Vec<BigRational>>) -> Option<Vec<BigRational>> {
    let n = sys.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !sys[r][col].is_zero())?;
        sys.swap(col, pivot);
        let inv = sys[col][col].recip();
        for v in sys[col].iter_mut() {
            *v = &*v * &inv;
        }
        for r in 0..n {
            if r != col && !sys[r][col].is_zero() {
                let factor = sys[r][col].clone();
                let (pivot_row, target) = if r < col {
                    let (lo, hi) = sys.split_at_mut(col);
                    (&hi[0], &mut lo[r])
                } else {
                    let (lo, hi) = sys.split_at_mut(r);
                    (&lo[col], &mut hi[0])
                };
                for (t, p) in target.iter_mut().zip(pivot_row.iter()) {
                    *t = &*t - &factor * p;
                }
            }
        }
    }
    Some(sys.into_iter().map(|row| row[n].clone()).collect())
}

pub fn big_to_f64(r: &BigRational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) => n / d,
        _ => f64::NAN,
    }
}

pub fn rational_to_big(r: &Rational) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn nash() -> StateVector {
        StateVector::new(vec![0.4, 0.2, 0.2, 0.2, 0.4, 0.2, 0.2, 0.2], 4).unwrap()
    }

    #[test]
    fn oneill_payoffs_at_nash() {
        let p = expected_payoffs(&PayoffBimatrix::oneill(), &nash()).unwrap();
        for u in &p.u[..4] {
            assert_abs_diff_eq!(*u, -0.2, epsilon = 1e-15);
        }
        for u in &p.u[4..] {
            assert_abs_diff_eq!(*u, 0.2, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(p.u_bar_a + p.u_bar_b, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn payoffs_against_pure_b1() {
        let s = StateVector::from_populations(&[0.4, 0.2, 0.2, 0.2], &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let p = expected_payoffs(&PayoffBimatrix::oneill(), &s).unwrap();
        assert_eq!(&p.u[..4], &[1.0, -1.0, -1.0, -1.0]);
        assert_abs_diff_eq!(p.u_bar_a, -0.2, epsilon = 1e-15);
    }

    #[test]
    fn velocity_hand_value() {
        let s = StateVector::from_populations(&[0.4, 0.2, 0.2, 0.2], &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let v = replicator_velocity(&PayoffBimatrix::oneill(), &s).unwrap();
        let expected = [0.48, -0.16, -0.16, -0.16, 0.0, 0.0, 0.0, 0.0];
        for (a, b) in v.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn velocity_vanishes_at_nash_and_vertices() {
        let game = PayoffBimatrix::oneill();
        assert!(replicator_velocity(&game, &nash()).unwrap().iter().all(|v| v.abs() < 1e-15));
        for a in 0..4 {
            for b in 0..4 {
                let s = StateVector::vertex(a, b, 4, 4).unwrap();
                assert!(replicator_velocity(&game, &s).unwrap().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn rest_points() {
        let x = interior_rest_point_exact(&PayoffBimatrix::oneill()).unwrap();
        let expected = [2, 1, 1, 1, 2, 1, 1, 1].map(|k| BigRational::new(k.into(), 5.into()));
        assert_eq!(x, expected.to_vec());
        let mp = interior_rest_point(&PayoffBimatrix::matching_pennies()).unwrap();
        assert_eq!(mp.as_slice(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn rest_point_errors() {
        // dominated strategy: equilibrium is pure
        let a: [&[i64]; 2] = [&[2, 2], &[1, 1]];
        let g = PayoffBimatrix::from_integers(&a, None).unwrap();
        assert!(matches!(interior_rest_point(&g), Err(Error::NoInteriorEquilibrium(_))));
        let rect: [&[i64]; 2] = [&[1, 0, 0], &[0, 1, 0]];
        let g = PayoffBimatrix::from_integers(&rect, None).unwrap();
        assert!(matches!(interior_rest_point(&g), Err(Error::NoInteriorEquilibrium(_))));
    }

    #[test]
    fn dimension_mismatch() {
        let s = StateVector::new(vec![0.5, 0.5, 0.5, 0.5], 2).unwrap();
        assert!(matches!(expected_payoffs(&PayoffBimatrix::oneill(), &s), Err(Error::Dimension(_))));
        assert!(matches!(replicator_velocity(&PayoffBimatrix::oneill(), &s), Err(Error::Dimension(_))));
    }

    #[test]
    fn state_clamping_rule() {
        let s = StateVector::new(vec![1.0 + 5e-10, -5e-10, 0.5, 0.5], 2).unwrap();
        assert_eq!(s.as_slice()[1], 0.0);
        assert_abs_diff_eq!(s.population_a().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(StateVector::new(vec![1.01, -0.01, 0.5, 0.5], 2).is_err());
        assert!(StateVector::new(vec![0.6, 0.6, 0.5, 0.5], 2).is_err());
    }

    #[test]
    fn decimal_parsing() {
        assert_eq!(parse_decimal("-1").unwrap(), Rational::from_integer(-1));
        assert_eq!(parse_decimal("0.25").unwrap(), Rational::new(1, 4));
        assert_eq!(parse_decimal("1.5e-2").unwrap(), Rational::new(3, 200));
        assert_eq!(parse_decimal("2E1").unwrap(), Rational::from_integer(20));
        assert!(parse_decimal("abc").is_err());
        assert!(parse_decimal("").is_err());
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let game = PayoffBimatrix::oneill();
        let text = game.to_json().unwrap();
        assert!(!text.contains("b_payoff"));
        assert_eq!(PayoffBimatrix::from_json(&text).unwrap(), game);

        let general = r#"{"n_a":2,"n_b":2,"a_payoff":[[3,0],[5,1]],"b_payoff":[[3,0],[5,1.5]]}"#;
        let g = PayoffBimatrix::from_json(general).unwrap();
        assert!(!g.is_zero_sum());
        assert_eq!(g.b_payoff()[1][1], Rational::new(3, 2));
        assert!(PayoffBimatrix::from_json(r#"{"n_a":2,"n_b":2,"a_payoff":[[1,2,3],[1,2,3]]}"#).is_err());
    }
}
