//! Linearization at the rest point and the eigencycle spectrum.
//!
//! The Jacobian of the replicator field is taken in the raw `n_a + n_b`
//! coordinates (not restricted to the simplex tangent space), so it carries
//! two real eigenvalues transverse to the simplices in addition to the
//! in-manifold modes.
//!
//! For an eigenvector `ξ = (η_1, …, η_s)` the eigencycle of subspace `(m, n)`
//! is the signed area
//!
//! ```text
//! σ^(mn) = π · (Re η_m · Im η_n − Re η_n · Im η_m) = π · Im(conj(η_m) · η_n)
//! ```
//!
//! It is antisymmetric in `(m, n)`, scales with `|c|²` under `ξ → c ξ` and
//! flips sign under conjugation. For the mode `Re(c ξ e^{iωt})` the
//! instantaneous angular momentum in `(m, n)` equals `−ω |c|² σ^(mn) / π`.

use nalgebra::{DMatrix, DVector, Schur, SVD};
use num::rational::BigRational;
use num::{Num, Zero};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::game::{rational_to_big, replicator_field, PayoffBimatrix, StateVector};

/// Central-difference step for the finite-difference Jacobian.
pub const FD_STEP: f64 = 1e-5;
/// Required `‖Jξ − λξ‖` for a unit eigenvector.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-9;
/// Required reconstruction residual for modal coefficients.
pub const MODAL_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    ClosedForm,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix {
    pub j: DMatrix<f64>,
    pub base_point: StateVector,
}

impl JacobianMatrix {
    pub fn dim(&self) -> usize {
        self.j.nrows()
    }
}

/// Partial derivatives of `v_i = x_i (U_i − Ū)` in raw coordinates.
///
/// For an A strategy `i`: `∂v_i/∂x_k = δ_ik (U_i − Ū_A) − x_i U_k` and
/// `∂v_i/∂y_j = x_i (a_ij − Σ_k x_k a_kj)`; B rows are symmetric.
fn jacobian_generic<T, A, B>(n_a: usize, n_b: usize, a: A, b: B, x: &[T]) -> Vec<Vec<T>>
where
    T: Num + Clone,
    A: Fn(usize, usize) -> T,
    B: Fn(usize, usize) -> T,
{
    let dim = n_a + n_b;
    let (xa, xb) = x.split_at(n_a);
    let dot = |w: &[T], f: &dyn Fn(usize) -> T| -> T {
        w.iter().enumerate().fold(T::zero(), |acc, (k, wk)| acc + wk.clone() * f(k))
    };
    let u_a: Vec<T> = (0..n_a).map(|i| dot(xb, &|j| a(i, j))).collect();
    let u_b: Vec<T> = (0..n_b).map(|j| dot(xa, &|i| b(j, i))).collect();
    let mean_a = dot(xa, &|k| u_a[k].clone());
    let mean_b = dot(xb, &|k| u_b[k].clone());
    // column means of the opponent-facing payoffs: Σ_k x_k a_kj and Σ_k y_k b_ki
    let a_col: Vec<T> = (0..n_b).map(|j| dot(xa, &|k| a(k, j))).collect();
    let b_col: Vec<T> = (0..n_a).map(|i| dot(xb, &|k| b(k, i))).collect();

    let mut jac = vec![vec![T::zero(); dim]; dim];
    for i in 0..n_a {
        for k in 0..n_a {
            let mut v = T::zero() - xa[i].clone() * u_a[k].clone();
            if i == k {
                v = v + u_a[i].clone() - mean_a.clone();
            }
            jac[i][k] = v;
        }
        for j in 0..n_b {
            jac[i][n_a + j] = xa[i].clone() * (a(i, j) - a_col[j].clone());
        }
    }
    for j in 0..n_b {
        for i in 0..n_a {
            jac[n_a + j][i] = xb[j].clone() * (b(j, i) - b_col[i].clone());
        }
        for k in 0..n_b {
            let mut v = T::zero() - xb[j].clone() * u_b[k].clone();
            if j == k {
                v = v + u_b[j].clone() - mean_b.clone();
            }
            jac[n_a + j][n_a + k] = v;
        }
    }
    jac
}

/// Exact Jacobian at a rational point (typically the exact rest point).
pub fn jacobian_exact(game: &PayoffBimatrix, point: &[BigRational]) -> Result<Vec<Vec<BigRational>>> {
    if point.len() != game.dim() {
        return Err(Error::Dimension(format!(
            "point of length {} for a game of dimension {}",
            point.len(),
            game.dim()
        )));
    }
    let a = |i: usize, j: usize| rational_to_big(&game.a_payoff()[i][j]);
    let b = |j: usize, i: usize| rational_to_big(&game.b_payoff()[j][i]);
    Ok(jacobian_generic(game.n_a(), game.n_b(), a, b, point))
}

pub fn jacobian_at(game: &PayoffBimatrix, p: &StateVector, mode: JacobianMode) -> Result<JacobianMatrix> {
    if p.n_a() != game.n_a() || p.n_b() != game.n_b() {
        return Err(Error::Dimension(format!(
            "state is {} + {}, game is {} x {}",
            p.n_a(),
            p.n_b(),
            game.n_a(),
            game.n_b()
        )));
    }
    let dim = game.dim();
    let x = p.as_slice();
    let j = match mode {
        JacobianMode::ClosedForm => {
            let rows = jacobian_generic(game.n_a(), game.n_b(), |i, j| game.a_at(i, j), |j, i| game.b_at(j, i), x);
            DMatrix::from_fn(dim, dim, |r, c| rows[r][c])
        }
        JacobianMode::FiniteDifference => {
            let mut j = DMatrix::zeros(dim, dim);
            let mut plus = vec![0.0; dim];
            let mut minus = vec![0.0; dim];
            let mut probe = x.to_vec();
            for c in 0..dim {
                probe[c] = x[c] + FD_STEP;
                replicator_field(game, &probe, &mut plus);
                probe[c] = x[c] - FD_STEP;
                replicator_field(game, &probe, &mut minus);
                probe[c] = x[c];
                for r in 0..dim {
                    j[(r, c)] = (plus[r] - minus[r]) / (2.0 * FD_STEP);
                }
            }
            j
        }
    };
    Ok(JacobianMatrix { j, base_point: p.clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda: Complex64,
    pub xi: Vec<Complex64>,
    /// Label such as `.8i`, `-.2` or `.4i_1` (suffix numbers degenerate partners).
    pub tag: String,
}

impl EigenPair {
    pub fn conjugate(&self) -> EigenPair {
        EigenPair {
            lambda: self.lambda.conj(),
            xi: self.xi.iter().map(|z| z.conj()).collect(),
            tag: conjugate_tag(&self.tag),
        }
    }

    pub fn residual(&self, j: &DMatrix<f64>) -> f64 {
        let n = self.xi.len();
        (0..n)
            .map(|r| {
                let jx: Complex64 = (0..n).map(|c| self.xi[c] * j[(r, c)]).sum();
                (jx - self.lambda * self.xi[r]).norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_real(&self) -> bool {
        self.lambda.im == 0.0
    }
}

fn conjugate_tag(tag: &str) -> String {
    match tag.strip_prefix('-') {
        Some(rest) => rest.to_string(),
        None => format!("-{tag}"),
    }
}

fn short_number(v: f64) -> String {
    let mut s = format!("{:.4}", v.abs());
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    if let Some(rest) = s.strip_prefix("0.") {
        s = format!(".{rest}");
    }
    if v < 0.0 && s != "0" {
        format!("-{s}")
    } else {
        s
    }
}

fn eigen_label(lambda: Complex64, tol: f64) -> String {
    let re0 = lambda.re.abs() <= tol;
    let im0 = lambda.im.abs() <= tol;
    match (re0, im0) {
        (_, true) => short_number(lambda.re),
        (true, false) => format!("{}i", short_number(lambda.im)),
        (false, false) => {
            let sign = if lambda.im < 0.0 { "-" } else { "+" };
            format!("{}{}{}i", short_number(lambda.re), sign, short_number(lambda.im.abs()))
        }
    }
}

/// Complex eigen system of a real Jacobian.
///
/// Eigenvalues come from the real Schur form; each cluster of (numerically)
/// equal eigenvalues gets an orthonormal basis of the null space of
/// `J − λI`. Vectors are unit length with the first largest-modulus
/// component real and positive; degenerate bases are made unique by pivot
/// elimination before orthonormalization. Conjugate eigenvalues receive
/// exactly conjugated vectors. Output is sorted by `Im λ` then `Re λ`,
/// both descending.
pub fn eigen_decompose(j: &JacobianMatrix) -> Result<Vec<EigenPair>> {
    eigen_decompose_matrix(&j.j)
}

pub fn eigen_decompose_matrix(j: &DMatrix<f64>) -> Result<Vec<EigenPair>> {
    let n = j.nrows();
    if n == 0 || j.ncols() != n {
        return Err(Error::Dimension(format!("matrix is {} x {}, expected square", j.nrows(), j.ncols())));
    }
    if j.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let scale = j.amax().max(1.0);
    let schur = Schur::try_new(j.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let raw: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();

    let cluster_tol = 1e-6 * scale;
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    let mut members: Vec<Vec<Complex64>> = Vec::new();
    for lam in raw {
        match members.iter().position(|m| (m[0] - lam).norm() <= cluster_tol) {
            Some(pos) => members[pos].push(lam),
            None => members.push(vec![lam]),
        }
    }
    for m in &members {
        let center = m.iter().sum::<Complex64>() / m.len() as f64;
        clusters.push((center, m.len()));
    }
    // real clusters get an exactly real eigenvalue; conjugate clusters exact conjugates
    let im_tol = cluster_tol;
    for c in clusters.iter_mut() {
        if c.0.im.abs() <= im_tol {
            c.0.im = 0.0;
        }
    }
    let positive: Vec<(Complex64, usize)> = clusters.iter().copied().filter(|c| c.0.im > 0.0).collect();

    let mut out = Vec::with_capacity(n);
    for (lambda, k) in clusters.iter().copied().filter(|c| c.0.im >= 0.0) {
        let basis =
            if lambda.im == 0.0 { real_null_basis(j, lambda.re, k)? } else { complex_null_basis(j, lambda, k)? };
        let basis = canonical_basis(basis);
        let label = eigen_label(lambda, cluster_tol);
        for (idx, xi) in basis.into_iter().enumerate() {
            let tag = if k > 1 { format!("{label}_{}", idx + 1) } else { label.clone() };
            out.push(EigenPair { lambda, xi, tag });
        }
    }
    for neg in clusters.iter().filter(|c| c.0.im < 0.0) {
        let partner = positive
            .iter()
            .find(|p| (p.0 - neg.0.conj()).norm() <= cluster_tol && p.1 == neg.1)
            .ok_or_else(|| Error::Numerical("eigenvalues are not closed under conjugation".into()))?;
        let conj: Vec<EigenPair> = out.iter().filter(|e| e.lambda == partner.0).map(EigenPair::conjugate).collect();
        out.extend(conj);
    }

    for e in &out {
        let r = e.residual(j);
        if !(r <= EIGEN_RESIDUAL_TOL * scale) {
            return Err(Error::Numerical(format!("eigenpair {} has residual {r:.3e}; matrix may be defective", e.tag)));
        }
    }
    out.sort_by(|a, b| {
        b.lambda.im.partial_cmp(&a.lambda.im).unwrap().then(b.lambda.re.partial_cmp(&a.lambda.re).unwrap())
    });
    Ok(out)
}

fn real_null_basis(j: &DMatrix<f64>, lambda: f64, k: usize) -> Result<Vec<Vec<Complex64>>> {
    let n = j.nrows();
    let shifted = j - DMatrix::identity(n, n) * lambda;
    let svd = SVD::try_new(shifted, false, true, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let v_t = svd.v_t.expect("requested V");
    Ok((n - k..n).rev().map(|row| (0..n).map(|c| Complex64::new(v_t[(row, c)], 0.0)).collect()).collect())
}

fn complex_null_basis(j: &DMatrix<f64>, lambda: Complex64, k: usize) -> Result<Vec<Vec<Complex64>>> {
    let n = j.nrows();
    let shifted = DMatrix::from_fn(n, n, |r, c| {
        let v = Complex64::new(j[(r, c)], 0.0);
        if r == c {
            v - lambda
        } else {
            v
        }
    });
    let svd = SVD::try_new(shifted, false, true, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let v_t = svd.v_t.expect("requested V");
    Ok((n - k..n).rev().map(|row| (0..n).map(|c| v_t[(row, c)].conj()).collect()).collect())
}

/// Unit norm, first largest-modulus component real-positive.
pub fn canonicalize(xi: &mut [Complex64]) {
    let norm = xi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return;
    }
    let max = xi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let pivot = xi.iter().position(|z| z.norm() >= max * (1.0 - 1e-9)).unwrap_or(0);
    let phase = xi[pivot].conj() / xi[pivot].norm();
    for z in xi.iter_mut() {
        *z = *z * phase / norm;
    }
    xi[pivot].im = 0.0;
}

/// Deterministic orthonormal basis of the span of `basis`.
fn canonical_basis(mut basis: Vec<Vec<Complex64>>) -> Vec<Vec<Complex64>> {
    let k = basis.len();
    if k == 1 {
        canonicalize(&mut basis[0]);
        return basis;
    }
    let n = basis[0].len();
    // column-pivoted elimination picks pivot rows, then reduce so the basis is
    // the identity on those rows
    let mut work = basis.clone();
    let mut pivots = Vec::with_capacity(k);
    for step in 0..k {
        let mut best = (0.0, 0, 0);
        for (col, v) in work.iter().enumerate().skip(step) {
            for (row, z) in v.iter().enumerate() {
                if pivots.contains(&row) {
                    continue;
                }
                if z.norm() > best.0 * (1.0 + 1e-9) {
                    best = (z.norm(), row, col);
                }
            }
        }
        let (_, row, col) = best;
        work.swap(step, col);
        pivots.push(row);
        let p = work[step][row];
        let pivot_vec: Vec<Complex64> = work[step].iter().map(|z| z / p).collect();
        work[step] = pivot_vec.clone();
        for other in work.iter_mut().skip(step + 1) {
            let f = other[row];
            for (o, pv) in other.iter_mut().zip(&pivot_vec) {
                *o -= f * pv;
            }
        }
    }
    // back-substitute so each vector vanishes on the other pivot rows
    for step in (0..k).rev() {
        for earlier in 0..step {
            let f = work[earlier][pivots[step]];
            let (lo, hi) = work.split_at_mut(step);
            for (o, pv) in lo[earlier].iter_mut().zip(&hi[0]) {
                *o -= f * pv;
            }
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&i| pivots[i]);
    let mut ortho: Vec<Vec<Complex64>> = Vec::with_capacity(k);
    for i in order {
        let mut v = work[i].clone();
        for q in &ortho {
            let proj: Complex64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= proj * qi;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v.iter_mut() {
            *z /= norm;
        }
        canonicalize(&mut v);
        ortho.push(v);
    }
    debug_assert_eq!(ortho.len(), k);
    let _ = n;
    ortho
}

/// A two-dimensional coordinate subspace `(m, n)`, 1-based with `m < n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubspacePair {
    pub m: usize,
    pub n: usize,
}

impl SubspacePair {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || m >= n {
            return Err(Error::Dimension(format!("subspace ({m}, {n}) needs 1 <= m < n")));
        }
        Ok(Self { m, n })
    }

    /// All pairs for dimension `s`, `m` ascending then `n` ascending.
    pub fn enumerate(s: usize) -> Vec<SubspacePair> {
        (1..=s).flat_map(|m| (m + 1..=s).map(move |n| SubspacePair { m, n })).collect()
    }

    pub fn count(s: usize) -> usize {
        s * s.saturating_sub(1) / 2
    }

    /// Position of this pair in [`SubspacePair::enumerate`] for dimension `s`.
    pub fn index(&self, s: usize) -> usize {
        (1..self.m).map(|k| s - k).sum::<usize>() + (self.n - self.m - 1)
    }

    /// Two-digit code (`"15"`) when both indices are single digits, `"m-n"` otherwise.
    pub fn code(&self) -> String {
        if self.n < 10 {
            format!("{}{}", self.m, self.n)
        } else {
            format!("{}-{}", self.m, self.n)
        }
    }

    pub fn parse(code: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad subspace code {code:?}"));
        let code = code.trim();
        let (m, n) = match code.split_once('-') {
            Some((m, n)) => (m.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?),
            None if code.len() == 2 && code.chars().all(|c| c.is_ascii_digit()) => {
                let d: Vec<usize> = code.chars().map(|c| c.to_digit(10).unwrap() as usize).collect();
                (d[0], d[1])
            }
            None => return Err(bad()),
        };
        Self::new(m, n)
    }
}

impl fmt::Display for SubspacePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

/// Signed eigencycle values over all subspaces of an `s`-dimensional space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigencycleSet {
    dim: usize,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<EigenPair>,
}

impl EigencycleSet {
    pub fn from_values(dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != SubspacePair::count(dim) {
            return Err(Error::Dimension(format!(
                "{} values for dimension {dim} (expected {})",
                values.len(),
                SubspacePair::count(dim)
            )));
        }
        Ok(Self { dim, values, source: None })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> Option<&EigenPair> {
        self.source.as_ref()
    }

    pub fn pairs(&self) -> Vec<SubspacePair> {
        SubspacePair::enumerate(self.dim)
    }

    pub fn iter(&self) -> impl Iterator<Item = (SubspacePair, f64)> + '_ {
        SubspacePair::enumerate(self.dim).into_iter().zip(self.values.iter().copied())
    }

    /// Value for any ordered pair (1-based), extended antisymmetrically.
    pub fn get(&self, m: usize, n: usize) -> f64 {
        use std::cmp::Ordering::*;
        match m.cmp(&n) {
            Equal => 0.0,
            Less => self.values[SubspacePair { m, n }.index(self.dim)],
            Greater => -self.values[SubspacePair { m: n, n: m }.index(self.dim)],
        }
    }

    pub fn scaled(&self, factor: f64) -> EigencycleSet {
        EigencycleSet { dim: self.dim, values: self.values.iter().map(|v| v * factor).collect(), source: None }
    }

    fn combine(&self, other: &EigencycleSet, f: impl Fn(f64, f64) -> f64) -> Result<EigencycleSet> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!("eigencycle sets of dimension {} and {}", self.dim, other.dim)));
        }
        Ok(EigencycleSet {
            dim: self.dim,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
            source: None,
        })
    }
}

pub fn eigencycles_of(xi: &[Complex64]) -> EigencycleSet {
    let dim = xi.len();
    let values = SubspacePair::enumerate(dim)
        .into_iter()
        .map(|p| {
            let (a, b) = (xi[p.m - 1], xi[p.n - 1]);
            PI * (a.re * b.im - b.re * a.im)
        })
        .collect();
    EigencycleSet { dim, values, source: None }
}

pub fn eigencycle_set(e: &EigenPair) -> EigencycleSet {
    EigencycleSet { source: Some(e.clone()), ..eigencycles_of(&e.xi) }
}

/// `α = (s2 + s1)/2`, `β = (s2 − s1)/2` for the two members of a degenerate pair.
pub fn alpha_beta_bases(s1: &EigencycleSet, s2: &EigencycleSet) -> Result<(EigencycleSet, EigencycleSet)> {
    let alpha = s2.combine(s1, |b, a| (b + a) / 2.0)?;
    let beta = s2.combine(s1, |b, a| (b - a) / 2.0)?;
    Ok((alpha, beta))
}

/// `π · Im P_nm` for the orthogonal projector `P = Σ ξ_k ξ_kᴴ` onto the span
/// of an orthonormal degenerate basis. Equals the summed eigencycle sets of
/// that basis and does not depend on which orthonormal basis is used.
pub fn projector_cycle_sum(basis: &[EigenPair]) -> Result<EigencycleSet> {
    let dim = basis.first().map(|e| e.xi.len()).ok_or_else(|| Error::Dimension("empty basis".into()))?;
    if basis.iter().any(|e| e.xi.len() != dim) {
        return Err(Error::Dimension("basis vectors of unequal length".into()));
    }
    let values = SubspacePair::enumerate(dim)
        .into_iter()
        .map(|p| {
            let proj: Complex64 = basis.iter().map(|e| e.xi[p.n - 1] * e.xi[p.m - 1].conj()).sum();
            PI * proj.im
        })
        .collect();
    Ok(EigencycleSet { dim, values, source: None })
}

/// Re-expresses a computed degenerate basis so it lines up with reference
/// vectors: each reference is projected onto the computed span (maximum
/// overlap), the projections are orthonormalized in order and canonicalized.
pub fn align_degenerate_basis(basis: &[EigenPair], reference: &[Vec<Complex64>]) -> Result<Vec<EigenPair>> {
    if basis.len() != reference.len() || basis.is_empty() {
        return Err(Error::Dimension(format!(
            "{} basis vectors vs {} reference vectors",
            basis.len(),
            reference.len()
        )));
    }
    let dim = basis[0].xi.len();
    if reference.iter().any(|r| r.len() != dim) {
        return Err(Error::Dimension("reference vector length differs from basis".into()));
    }
    let mut aligned: Vec<Vec<Complex64>> = Vec::with_capacity(basis.len());
    for r in reference {
        let mut v = vec![Complex64::zero(); dim];
        for e in basis {
            let c: Complex64 = e.xi.iter().zip(r).map(|(a, b)| a.conj() * b).sum();
            for (vi, xi) in v.iter_mut().zip(&e.xi) {
                *vi += c * xi;
            }
        }
        for q in &aligned {
            let c: Complex64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= c * qi;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-9 {
            return Err(Error::Numerical("reference vector is orthogonal to the eigenspace".into()));
        }
        for z in v.iter_mut() {
            *z /= norm;
        }
        canonicalize(&mut v);
        aligned.push(v);
    }
    Ok(basis.iter().zip(aligned).map(|(e, xi)| EigenPair { lambda: e.lambda, xi, tag: e.tag.clone() }).collect())
}

/// Result of fitting `reference ≈ factor · computed` with one real factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleFit {
    pub scale: f64,
    pub sign: f64,
    pub max_abs_error: f64,
}

impl ScaleFit {
    pub fn factor(&self) -> f64 {
        self.scale * self.sign
    }
}

/// Least-squares positive scale and global sign mapping `computed` onto `reference`.
pub fn fit_scale_sign(computed: &[f64], reference: &[f64]) -> Result<ScaleFit> {
    if computed.len() != reference.len() {
        return Err(Error::Dimension(format!("{} vs {} values", computed.len(), reference.len())));
    }
    let cc: f64 = computed.iter().map(|c| c * c).sum();
    if cc == 0.0 {
        let max_abs_error = reference.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        return Ok(ScaleFit { scale: 0.0, sign: 1.0, max_abs_error });
    }
    let k = computed.iter().zip(reference).map(|(c, r)| c * r).sum::<f64>() / cc;
    let max_abs_error = computed.iter().zip(reference).fold(0.0_f64, |m, (c, r)| m.max((k * c - r).abs()));
    Ok(ScaleFit { scale: k.abs(), sign: if k < 0.0 { -1.0 } else { 1.0 }, max_abs_error })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalCoefficients {
    pub c: Vec<Complex64>,
}

/// Least-squares expansion of `deviation` in the given eigenvectors.
pub fn modal_decompose(eigs: &[EigenPair], deviation: &[f64]) -> Result<ModalCoefficients> {
    let n = deviation.len();
    let k = eigs.len();
    if k == 0 {
        return Err(Error::Dimension("no eigenvectors supplied".into()));
    }
    if eigs.iter().any(|e| e.xi.len() != n) {
        return Err(Error::Dimension(format!("eigenvectors do not have length {n}")));
    }
    let basis = DMatrix::from_fn(n, k, |r, c| eigs[c].xi[r]);
    let rhs = DVector::from_iterator(n, deviation.iter().map(|&v| Complex64::new(v, 0.0)));
    let svd = SVD::try_new(basis.clone(), true, true, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let sol = svd.solve(&rhs, 1e-12).map_err(|e| Error::Numerical(e.to_string()))?;
    let residual = (&basis * &sol - &rhs).norm();
    let scale = rhs.norm().max(1.0);
    if residual > MODAL_RESIDUAL_TOL * scale {
        return Err(Error::ResidualTooLarge { residual, tolerance: MODAL_RESIDUAL_TOL * scale });
    }
    Ok(ModalCoefficients { c: sol.iter().copied().collect() })
}

/// Removes the per-population mean so both population sums of `v` are zero.
pub fn tangent_project(v: &[f64], n_a: usize) -> Vec<f64> {
    let (a, b) = v.split_at(n_a);
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    a.iter().map(|x| x - ma).chain(b.iter().map(|x| x - mb)).collect()
}

/// Null space basis of a rational matrix, by exact row reduction.
pub fn exact_null_space(m: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut a: Vec<Vec<BigRational>> = m.to_vec();
    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else { continue };
        a.swap(r, p);
        let inv = a[r][c].recip();
        for v in a[r].iter_mut() {
            *v = &*v * &inv;
        }
        let pivot_row = a[r].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (t, pv) in row.iter_mut().zip(&pivot_row) {
                    *t = &*t - &f * pv;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (0..cols)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = vec![BigRational::zero(); cols];
            v[free] = BigRational::from_integer(1.into());
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -a[row][free].clone();
            }
            v
        })
        .collect()
}

/// Exact `σ^(mn)/π` for the simple eigenvalue `iω` of a rational Jacobian.
///
/// `ξ = u + iv` solves `J u = −ω v`, `J v = ω u`; the real null space of that
/// block system is two-dimensional for a simple eigenvalue and any nonzero
/// element gives the eigenvector up to a complex factor, so ratios between
/// subspaces are exact.
pub fn exact_eigencycles_over_pi(j: &[Vec<BigRational>], omega: &BigRational) -> Result<Vec<BigRational>> {
    let n = j.len();
    let mut block = vec![vec![BigRational::zero(); 2 * n]; 2 * n];
    for r in 0..n {
        for c in 0..n {
            block[r][c] = j[r][c].clone();
            block[n + r][n + c] = j[r][c].clone();
        }
        block[r][n + r] = omega.clone();
        block[n + r][r] = -omega.clone();
    }
    let null = exact_null_space(&block);
    if null.len() != 2 {
        return Err(Error::Numerical(format!(
            "i*{omega} has a real null space of dimension {} (expected 2)",
            null.len()
        )));
    }
    let (u, v) = null[0].split_at(n);
    Ok(SubspacePair::enumerate(n).into_iter().map(|p| &u[p.m - 1] * &v[p.n - 1] - &u[p.n - 1] * &v[p.m - 1]).collect())
}

/// Nearest fraction with denominator at most `max_den` within `tol`.
pub fn rationalize(x: f64, max_den: i64, tol: f64) -> Option<BigRational> {
    let (mut h0, mut h1, mut k0, mut k1) = (0_i64, 1_i64, 1_i64, 0_i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let ai = a as i64;
        let (h2, k2) = (ai.checked_mul(h1)?.checked_add(h0)?, ai.checked_mul(k1)?.checked_add(k0)?);
        if k2 > max_den {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (h1 as f64 / k1 as f64 - x).abs() <= tol {
            return Some(BigRational::new(h1.into(), k1.into()));
        }
        let frac = r - a;
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}
