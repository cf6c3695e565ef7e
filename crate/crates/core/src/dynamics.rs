//! Trajectory generators: replicator ODE, exact linearized modes, agent play
//! and modal evolution with random phase shocks.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::game::{renormalize_populations, replicator_field, PayoffBimatrix, StateVector};
use crate::spectral::{tangent_project, EigenPair, SubspacePair};
use crate::tsmetrics::{PlaySeries, Protocol, Round, Session, Trajectory};

pub const DEFAULT_REL_TOL: f64 = 1e-9;
pub const DEFAULT_ABS_TOL: f64 = 1e-12;
/// Maximum accepted steps per integration before giving up.
const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    pub t0: f64,
    pub t1: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub initial: StateVector,
    /// Record states on this spacing; every accepted step when `None`.
    #[serde(default)]
    pub sample_dt: Option<f64>,
}

impl OdeConfig {
    pub fn new(initial: StateVector, t1: f64) -> Self {
        Self {
            t0: 0.0,
            t1,
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: DEFAULT_ABS_TOL,
            max_step: f64::INFINITY,
            initial,
            sample_dt: None,
        }
    }

    pub fn with_sample_dt(mut self, dt: f64) -> Self {
        self.sample_dt = Some(dt);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > self.t0) || !self.t0.is_finite() || !self.t1.is_finite() {
            return Err(Error::Config(format!("time span [{}, {}] is empty", self.t0, self.t1)));
        }
        for (name, tol) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(tol > 0.0 && tol <= 1e-2) {
                return Err(Error::Config(format!("{name} = {tol} outside (0, 1e-2]")));
            }
        }
        if !(self.max_step > 0.0) {
            return Err(Error::Config("max_step must be positive".into()));
        }
        if let Some(dt) = self.sample_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config("sample_dt must be positive".into()));
            }
        }
        Ok(())
    }

    fn stops(&self) -> Vec<f64> {
        match self.sample_dt {
            None => vec![self.t1],
            Some(dt) => {
                let n = ((self.t1 - self.t0) / dt).floor() as usize;
                let mut s: Vec<f64> = (1..=n).map(|k| self.t0 + k as f64 * dt).filter(|&t| t < self.t1).collect();
                s.push(self.t1);
                s
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest population-sum deviation seen before renormalization.
    pub max_drift: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

/// Adaptive Dormand–Prince 5(4) integration of `y' = f(t, y)`.
///
/// Steps are shortened to land exactly on each entry of `stops` (ascending,
/// last entry is the end time), where `record` is called. `after_step` sees
/// every accepted step, may project the state and returns a drift value that
/// is tracked in the statistics.
pub fn dormand_prince<F, P, R>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    stops: &[f64],
    ctl: StepControl,
    mut after_step: P,
    mut record: R,
) -> Result<IntegrationStats>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    P: FnMut(f64, &mut [f64]) -> f64,
    R: FnMut(f64, &[f64]),
{
    let n = y0.len();
    let t_end = *stops.last().ok_or_else(|| Error::Config("no output times".into()))?;
    let mut stats = IntegrationStats::default();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    let scale = |y: &[f64], i: usize, other: f64| ctl.abs_tol + ctl.rel_tol * y[i].abs().max(other.abs());

    // initial step from the size of the derivative
    f(t, &y, &mut k[0]);
    stats.evaluations += 1;
    let d0 = (y.iter().enumerate().map(|(i, v)| (v / scale(&y, i, 0.0)).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d1 = (k[0].iter().enumerate().map(|(i, v)| (v / scale(&y, i, 0.0)).powi(2)).sum::<f64>() / n as f64).sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(ctl.max_step).min(t_end - t0);

    let mut stop_idx = 0;
    while stop_idx < stops.len() && stops[stop_idx] <= t0 {
        stop_idx += 1;
    }
    while stop_idx < stops.len() {
        let target = stops[stop_idx];
        let remaining = target - t;
        let mut hit = false;
        let mut step = h.min(ctl.max_step);
        if step >= remaining * (1.0 - 1e-12) {
            step = remaining;
            hit = true;
        }
        if step <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::Stiffness { t, h: step });
        }
        if stats.accepted > MAX_STEPS {
            return Err(Error::Stiffness { t, h: step });
        }
        f(t, &y, &mut k[0]);
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for j in 0..s {
                    acc += step * A[s][j] * k[j][i];
                }
                tmp[i] = acc;
            }
            f(t + C[s] * step, &tmp, &mut k[s]);
        }
        stats.evaluations += 7;
        y_new[..n].copy_from_slice(&tmp[..n]);
        let mut err = 0.0;
        for i in 0..n {
            let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * step;
            err += (e / scale(&y, i, y_new[i])).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::Numerical(format!("non-finite error estimate at t = {t}")));
        }
        if err <= 1.0 {
            stats.accepted += 1;
            t = if hit { target } else { t + step };
            y.copy_from_slice(&y_new);
            stats.max_drift = stats.max_drift.max(after_step(t, &mut y));
            if hit {
                record(t, &y);
                stop_idx += 1;
            }
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            // a step cut short to hit a stop should not shrink the next one
            h = if hit { h.max(step * grow) } else { step * grow };
        } else {
            stats.rejected += 1;
            h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
    Ok(stats)
}

/// Integrates the replicator field, renormalizing both populations after
/// every step.
pub fn integrate_replicator_with_stats(
    game: &PayoffBimatrix,
    cfg: &OdeConfig,
) -> Result<(Trajectory, IntegrationStats)> {
    cfg.validate()?;
    if cfg.initial.n_a() != game.n_a() || cfg.initial.n_b() != game.n_b() {
        return Err(Error::Dimension(format!(
            "initial state is {} + {}, game is {} x {}",
            cfg.initial.n_a(),
            cfg.initial.n_b(),
            game.n_a(),
            game.n_b()
        )));
    }
    let n_a = game.n_a();
    let every_step = cfg.sample_dt.is_none();
    let stops = cfg.stops();
    let ctl = StepControl { rel_tol: cfg.rel_tol, abs_tol: cfg.abs_tol, max_step: cfg.max_step };
    let mut times = vec![cfg.t0];
    let mut raw = vec![cfg.initial.as_slice().to_vec()];
    let recorded = std::cell::RefCell::new(Vec::<(f64, Vec<f64>)>::new());
    let stats = dormand_prince(
        |_, x, out| replicator_field(game, x, out),
        cfg.t0,
        cfg.initial.as_slice(),
        &stops,
        ctl,
        |t, x| {
            let d = renormalize_populations(x, n_a);
            if every_step {
                recorded.borrow_mut().push((t, x.to_vec()));
            }
            d
        },
        |t, x| {
            if !every_step {
                recorded.borrow_mut().push((t, x.to_vec()));
            }
        },
    )?;
    for (t, x) in recorded.into_inner() {
        times.push(t);
        raw.push(x);
    }
    let states = raw.into_iter().map(|x| StateVector::new(x, n_a)).collect::<Result<Vec<_>>>()?;
    Ok((Trajectory::new(times, states)?, stats))
}

pub fn integrate_replicator(game: &PayoffBimatrix, cfg: &OdeConfig) -> Result<Trajectory> {
    integrate_replicator_with_stats(game, cfg).map(|(t, _)| t)
}

/// Random tangent direction (both population sums zero) of Euclidean norm `scale`.
pub fn random_tangent<R: Rng>(rng: &mut R, n_a: usize, n_b: usize, scale: f64) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..n_a + n_b).map(|_| rng.sample(StandardNormal)).collect();
        let v = tangent_project(&raw, n_a);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x * scale / norm).collect();
        }
    }
}

/// `base + δ`, with `δ` projected onto the tangent space and the result
/// renormalized onto the simplices.
pub fn perturbed_state(base: &StateVector, delta: &[f64]) -> Result<StateVector> {
    if delta.len() != base.dim() {
        return Err(Error::Dimension(format!("perturbation of length {} for dimension {}", delta.len(), base.dim())));
    }
    let d = tangent_project(delta, base.n_a());
    let mut x: Vec<f64> = base.as_slice().iter().zip(&d).map(|(a, b)| a + b).collect();
    renormalize_populations(&mut x, base.n_a());
    StateVector::new(x, base.n_a())
}

/// Relative tolerance for conjugate matching of eigenpairs and coefficients.
const SYMMETRY_TOL: f64 = 1e-9;

fn conjugate_partner(eigs: &[EigenPair], k: usize) -> Option<usize> {
    let e = &eigs[k];
    eigs.iter().position(|o| {
        (o.lambda - e.lambda.conj()).norm() <= SYMMETRY_TOL
            && o.xi.iter().zip(&e.xi).all(|(a, b)| (a - b.conj()).norm() <= SYMMETRY_TOL)
    })
}

/// Checks that `Σ c_k ξ_k e^{λ_k t}` is real for all `t`.
pub fn check_conjugate_symmetry(eigs: &[EigenPair], coeffs: &[Complex64]) -> Result<()> {
    if eigs.len() != coeffs.len() {
        return Err(Error::Dimension(format!("{} eigenpairs, {} coefficients", eigs.len(), coeffs.len())));
    }
    let cmax = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
    for (k, c) in coeffs.iter().enumerate() {
        if c.norm() == 0.0 {
            continue;
        }
        match conjugate_partner(eigs, k) {
            Some(j) if (coeffs[j] - c.conj()).norm() <= SYMMETRY_TOL * cmax => {}
            Some(j) => {
                return Err(Error::Symmetry(format!(
                    "coefficient of {} is {c}, of its conjugate {} is {}",
                    eigs[k].tag, eigs[j].tag, coeffs[j]
                )))
            }
            None => {
                return Err(Error::Symmetry(format!("mode {} has no conjugate partner", eigs[k].tag)));
            }
        }
    }
    Ok(())
}

fn modal_sum(eigs: &[EigenPair], coeffs: &[Complex64], t: f64, derivative: bool) -> Vec<f64> {
    let n = eigs.first().map_or(0, |e| e.xi.len());
    let mut out = vec![0.0; n];
    for (e, c) in eigs.iter().zip(coeffs) {
        if c.norm() == 0.0 {
            continue;
        }
        let mut w = c * (e.lambda * t).exp();
        if derivative {
            w *= e.lambda;
        }
        for (o, xi) in out.iter_mut().zip(&e.xi) {
            *o += (w * xi).re;
        }
    }
    out
}

/// Exact evaluation of `x(t) = base + Σ c_k ξ_k e^{λ_k t}`.
pub fn linearized_modal_trajectory(
    base: &StateVector,
    eigs: &[EigenPair],
    coeffs: &[Complex64],
    times: &[f64],
) -> Result<Trajectory> {
    check_conjugate_symmetry(eigs, coeffs)?;
    if eigs.iter().any(|e| e.xi.len() != base.dim()) {
        return Err(Error::Dimension("eigenvector length differs from state dimension".into()));
    }
    let states = times
        .iter()
        .map(|&t| {
            let d = modal_sum(eigs, coeffs, t, false);
            let x = base.as_slice().iter().zip(&d).map(|(a, b)| a + b).collect();
            StateVector::new(x, base.n_a())
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(times.to_vec(), states)
}

/// Deviation and velocity of the linearized motion at time `t`.
pub fn linearized_modal_state(eigs: &[EigenPair], coeffs: &[Complex64], t: f64) -> (Vec<f64>, Vec<f64>) {
    (modal_sum(eigs, coeffs, t, false), modal_sum(eigs, coeffs, t, true))
}

/// `(x − O) × ẋ` projected onto `(m, n)`, given the deviation `x − O`.
pub fn instantaneous_angular_momentum(deviation: &[f64], velocity: &[f64], pair: SubspacePair) -> f64 {
    let (m, n) = (pair.m - 1, pair.n - 1);
    deviation[m] * velocity[n] - deviation[n] * velocity[m]
}

/// Interaction part of the angular momentum of two superposed real modes
/// `2 Re(c_a ξ_a e^{λ_a t})` and `2 Re(c_b ξ_b e^{λ_b t})`.
pub fn cross_mode_angular_momentum(
    a: &EigenPair,
    ca: Complex64,
    b: &EigenPair,
    cb: Complex64,
    pair: SubspacePair,
    t: f64,
) -> f64 {
    let (m, n) = (pair.m - 1, pair.n - 1);
    let part = |e: &EigenPair, c: Complex64, d: bool| {
        let mut w = c * (e.lambda * t).exp();
        if d {
            w *= e.lambda;
        }
        [2.0 * (w * e.xi[m]).re, 2.0 * (w * e.xi[n]).re]
    };
    let (ua, va) = (part(a, ca, false), part(a, ca, true));
    let (ub, vb) = (part(b, cb, false), part(b, cb, true));
    (ua[0] * vb[1] - ua[1] * vb[0]) + (ub[0] * va[1] - ub[1] * va[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Policy {
    Uniform,
    NoisyBestResponse { eps: f64 },
    WinStayLoseShift { eps: f64 },
}

impl Policy {
    pub fn parse(name: &str, eps: f64) -> Result<Self> {
        match name {
            "uniform" => Ok(Policy::Uniform),
            "nbr" | "noisy-best-response" | "noisy_best_response" => Ok(Policy::NoisyBestResponse { eps }),
            "wsls" | "win-stay-lose-shift" | "win_stay_lose_shift" => Ok(Policy::WinStayLoseShift { eps }),
            other => Err(Error::Config(format!("unknown policy {other:?}"))),
        }
    }

    fn eps(&self) -> f64 {
        match *self {
            Policy::Uniform => 1.0,
            Policy::NoisyBestResponse { eps } | Policy::WinStayLoseShift { eps } => eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub policy: Policy,
    pub rounds: usize,
    pub seed: u64,
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let eps = self.policy.eps();
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Config(format!("exploration rate {eps} outside [0, 1]")));
        }
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        Ok(())
    }
}

/// Index of a maximal entry, ties broken uniformly at random.
fn argmax_random<R: Rng>(rng: &mut R, values: &[f64]) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
    ties[rng.random_range(0..ties.len())]
}

/// One fixed pair of players repeating the game; choices in the output are 1-based.
pub fn simulate_agents(game: &PayoffBimatrix, cfg: &AgentConfig) -> Result<PlaySeries> {
    cfg.validate()?;
    let (n_a, n_b) = (game.n_a(), game.n_b());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut last: Option<(usize, usize)> = None;
    for r in 0..cfg.rounds {
        let (a, b) = match (cfg.policy, last) {
            (Policy::Uniform, _) | (_, None) => (rng.random_range(0..n_a), rng.random_range(0..n_b)),
            (Policy::NoisyBestResponse { eps }, Some((la, lb))) => {
                let a = if rng.random::<f64>() < eps {
                    rng.random_range(0..n_a)
                } else {
                    let u: Vec<f64> = (0..n_a).map(|i| game.a_at(i, lb)).collect();
                    argmax_random(&mut rng, &u)
                };
                let b = if rng.random::<f64>() < eps {
                    rng.random_range(0..n_b)
                } else {
                    let u: Vec<f64> = (0..n_b).map(|j| game.b_at(j, la)).collect();
                    argmax_random(&mut rng, &u)
                };
                (a, b)
            }
            (Policy::WinStayLoseShift { eps }, Some((la, lb))) => {
                let a =
                    if rng.random::<f64>() < eps || game.a_at(la, lb) <= 0.0 { rng.random_range(0..n_a) } else { la };
                let b =
                    if rng.random::<f64>() < eps || game.b_at(lb, la) <= 0.0 { rng.random_range(0..n_b) } else { lb };
                (a, b)
            }
        };
        rounds.push(Round { round: r as u64 + 1, a: a + 1, b: b + 1 });
        last = Some((a, b));
    }
    PlaySeries::new(n_a, n_b, vec![Session { id: "1".into(), rounds }], Protocol::FixedPair)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRestartConfig {
    /// Expected shocks per unit time.
    pub shock_rate: f64,
    pub seed: u64,
}

impl NoiseRestartConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.shock_rate >= 0.0 && self.shock_rate.is_finite()) {
            return Err(Error::Config(format!("shock rate {} must be finite and >= 0", self.shock_rate)));
        }
        Ok(())
    }
}

/// Poisson shock times in `(0, t_end)`.
fn shock_times(rng: &mut ChaCha8Rng, rate: f64, t_end: f64) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    if rate == 0.0 {
        return Ok(out);
    }
    let gap = Exp::new(rate).map_err(|e| Error::Config(e.to_string()))?;
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t >= t_end {
            return Ok(out);
        }
        out.push(t);
    }
}

/// New coefficients with every upper-half-plane mode given a fresh phase
/// uniform on `[−π, π]`; conjugate partners follow.
fn redraw_phases(rng: &mut ChaCha8Rng, eigs: &[EigenPair], coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut out = coeffs.to_vec();
    for (k, e) in eigs.iter().enumerate() {
        if e.lambda.im > 0.0 {
            let theta = rng.random_range(-PI..=PI);
            out[k] = Complex64::from_polar(coeffs[k].norm(), theta);
            if let Some(j) = conjugate_partner(eigs, k) {
                out[j] = out[k].conj();
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyModalRun {
    pub trajectory: Trajectory,
    pub shock_times: Vec<f64>,
}

/// Linearized modal motion restarted with random phases at Poisson shocks.
/// Each segment evolves from its shock time with the redrawn coefficients.
pub fn simulate_with_noise_restarts(
    base: &StateVector,
    eigs: &[EigenPair],
    coeffs: &[Complex64],
    cfg: &NoiseRestartConfig,
    times: &[f64],
) -> Result<NoisyModalRun> {
    cfg.validate()?;
    check_conjugate_symmetry(eigs, coeffs)?;
    let t_end = times.last().copied().unwrap_or(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shocks = shock_times(&mut rng, cfg.shock_rate, t_end)?;
    let mut seg_start = 0.0;
    let mut current = coeffs.to_vec();
    let mut next = 0;
    let mut states = Vec::with_capacity(times.len());
    for &t in times {
        while next < shocks.len() && shocks[next] <= t {
            seg_start = shocks[next];
            current = redraw_phases(&mut rng, eigs, &current);
            next += 1;
        }
        let d = modal_sum(eigs, &current, t - seg_start, false);
        let x = base.as_slice().iter().zip(&d).map(|(a, b)| a + b).collect();
        states.push(StateVector::new(x, base.n_a())?);
    }
    Ok(NoisyModalRun { trajectory: Trajectory::new(times.to_vec(), states)?, shock_times: shocks })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossModeAverage {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
    pub shocks: usize,
}

/// Time average of the cross-mode angular momentum of two modes over
/// `[0, t_end]`, sampled at midpoints of a grid of spacing `dt`, with both
/// phases redrawn at Poisson shocks.
///
/// The standard error uses shock segments as independent blocks, or 100
/// equal blocks when there are fewer than two shocks.
#[allow(clippy::too_many_arguments)]
pub fn cross_mode_average(
    a: &EigenPair,
    ca: Complex64,
    b: &EigenPair,
    cb: Complex64,
    pair: SubspacePair,
    cfg: &NoiseRestartConfig,
    t_end: f64,
    dt: f64,
) -> Result<CrossModeAverage> {
    cfg.validate()?;
    if !(t_end > 0.0 && dt > 0.0 && dt < t_end) {
        return Err(Error::Config("need 0 < dt < t_end".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shocks = shock_times(&mut rng, cfg.shock_rate, t_end)?;
    let steps = (t_end / dt).round() as usize;
    let use_segments = shocks.len() >= 2;
    let block_len = steps.div_ceil(100);
    let (mut ca, mut cb) = (ca, cb);
    let mut seg_start = 0.0;
    let mut next = 0;
    let mut total = 0.0;
    let mut blocks: Vec<(f64, usize)> = vec![(0.0, 0)];
    for i in 0..steps {
        let t = (i as f64 + 0.5) * dt;
        let mut new_block = !use_segments && i > 0 && i % block_len == 0;
        while next < shocks.len() && shocks[next] <= t {
            seg_start = shocks[next];
            ca = Complex64::from_polar(ca.norm(), rng.random_range(-PI..=PI));
            cb = Complex64::from_polar(cb.norm(), rng.random_range(-PI..=PI));
            next += 1;
            new_block |= use_segments;
        }
        if new_block && blocks.last().unwrap().1 > 0 {
            blocks.push((0.0, 0));
        }
        let v = cross_mode_angular_momentum(a, ca, b, cb, pair, t - seg_start);
        total += v;
        let last = blocks.last_mut().unwrap();
        last.0 += v;
        last.1 += 1;
    }
    let mean = total / steps as f64;
    // ratio-estimator standard error over blocks of unequal length
    let k = blocks.len() as f64;
    let nbar = steps as f64 / k;
    let ss: f64 = blocks.iter().map(|(s, cnt)| (s - mean * *cnt as f64).powi(2)).sum();
    let std_err = if k > 1.0 { (ss / (k * (k - 1.0))).sqrt() / nbar } else { f64::NAN };
    Ok(CrossModeAverage { mean, std_err, samples: steps, shocks: shocks.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::interior_rest_point;
    use crate::spectral::{eigen_decompose, jacobian_at, JacobianMode};
    use approx::assert_abs_diff_eq;

    fn setup() -> (PayoffBimatrix, StateVector, Vec<EigenPair>) {
        let game = PayoffBimatrix::oneill();
        let x = interior_rest_point(&game).unwrap();
        let eigs = eigen_decompose(&jacobian_at(&game, &x, JacobianMode::ClosedForm).unwrap()).unwrap();
        (game, x, eigs)
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let ctl = StepControl { rel_tol: 1e-10, abs_tol: 1e-13, max_step: f64::INFINITY };
        let mut end = vec![];
        dormand_prince(
            |_, y, out| {
                out[0] = y[1];
                out[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            &[2.0 * PI],
            ctl,
            |_, _| 0.0,
            |_, y| end = y.to_vec(),
        )
        .unwrap();
        assert_abs_diff_eq!(end[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(end[1], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn rest_point_is_fixed() {
        let (game, x, _) = setup();
        let (traj, stats) = integrate_replicator_with_stats(&game, &OdeConfig::new(x.clone(), 30.0)).unwrap();
        for s in &traj.states {
            for (a, b) in s.as_slice().iter().zip(x.as_slice()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
        assert!(stats.max_drift < 1e-8);
        assert_eq!(traj.times.first(), Some(&0.0));
        assert_eq!(traj.times.last(), Some(&30.0));
    }

    #[test]
    fn step_times_increase() {
        let (game, x, eigs) = setup();
        let d: Vec<f64> = eigs[0].xi.iter().map(|z| 1e-2 * z.re).collect();
        let init = perturbed_state(&x, &d).unwrap();
        let traj = integrate_replicator(&game, &OdeConfig::new(init, 5.0)).unwrap();
        assert!(traj.len() > 3);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn small_orbit_returns_after_one_period() {
        let (game, x, eigs) = setup();
        let d: Vec<f64> = eigs[0].xi.iter().map(|z| 1e-3 * z.re).collect();
        let init = perturbed_state(&x, &d).unwrap();
        let period = 2.0 * PI / 0.8;
        let cfg = OdeConfig::new(init.clone(), period).with_sample_dt(period / 50.0);
        let (traj, stats) = integrate_replicator_with_stats(&game, &cfg).unwrap();
        let end = traj.states.last().unwrap();
        let dist: f64 = end.as_slice().iter().zip(init.as_slice()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(dist < 1e-4, "return distance {dist}");
        assert!(stats.max_drift < 1e-8);
        assert_eq!(traj.len(), 51);
    }

    #[test]
    fn bad_configs() {
        let (game, x, _) = setup();
        let mut cfg = OdeConfig::new(x, 1.0);
        cfg.rel_tol = 0.5;
        assert!(matches!(integrate_replicator(&game, &cfg), Err(Error::Config(_))));
        cfg.rel_tol = 1e-9;
        cfg.t1 = 0.0;
        assert!(matches!(integrate_replicator(&game, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn modal_trajectory_symmetry() {
        let (_, x, eigs) = setup();
        let zero = vec![Complex64::new(0.0, 0.0); 8];
        let t = linearized_modal_trajectory(&x, &eigs, &zero, &[0.0, 1.0, 2.0]).unwrap();
        assert!(t.states.iter().all(|s| s == &x));
        let mut one_sided = zero.clone();
        one_sided[0] = Complex64::new(1e-3, 0.0);
        assert!(matches!(linearized_modal_trajectory(&x, &eigs, &one_sided, &[0.0]), Err(Error::Symmetry(_))));
        one_sided[7] = Complex64::new(1e-3, 0.0);
        linearized_modal_trajectory(&x, &eigs, &one_sided, &[0.0, 0.5]).unwrap();
    }

    #[test]
    fn single_mode_ratio_is_constant() {
        let (_, _, eigs) = setup();
        let c = Complex64::from_polar(1e-3, 0.7);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 8];
        coeffs[0] = c;
        coeffs[7] = c.conj();
        let sigma = crate::spectral::eigencycle_set(&eigs[0]);
        for t in [0.0, 0.3, 2.9, 7.0] {
            let (dev, vel) = linearized_modal_state(&eigs, &coeffs, t);
            for (p, s) in sigma.iter().filter(|(_, s)| s.abs() > 1e-9) {
                let l = instantaneous_angular_momentum(&dev, &vel, p);
                let want = -4.0 * 0.8 * c.norm_sqr() * s / PI;
                assert!((l - want).abs() < 1e-9 * want.abs(), "{p}: {l} vs {want}");
            }
        }
    }

    #[test]
    fn agents_are_deterministic() {
        let game = PayoffBimatrix::oneill();
        for policy in [Policy::Uniform, Policy::NoisyBestResponse { eps: 0.1 }, Policy::WinStayLoseShift { eps: 0.1 }] {
            let cfg = AgentConfig { policy, rounds: 500, seed: 42 };
            let a = simulate_agents(&game, &cfg).unwrap();
            let b = simulate_agents(&game, &cfg).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.rounds(), 500);
        }
        let bad = AgentConfig { policy: Policy::WinStayLoseShift { eps: 1.5 }, rounds: 10, seed: 1 };
        assert!(matches!(simulate_agents(&game, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn best_response_without_noise_cycles() {
        // against a pure B choice the strict best response of A is unique
        let game = PayoffBimatrix::oneill();
        let cfg = AgentConfig { policy: Policy::NoisyBestResponse { eps: 0.0 }, rounds: 50, seed: 3 };
        let s = simulate_agents(&game, &cfg).unwrap();
        let r = &s.sessions()[0].rounds;
        for w in r.windows(2) {
            let u: Vec<f64> = (0..4).map(|i| game.a_at(i, w[0].b - 1)).collect();
            let best = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(u[w[1].a - 1], best);
        }
    }

    #[test]
    fn zero_shock_rate_matches_plain_modes() {
        let (_, x, eigs) = setup();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 8];
        coeffs[0] = Complex64::new(5e-4, 2e-4);
        coeffs[7] = coeffs[0].conj();
        let times: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let cfg = NoiseRestartConfig { shock_rate: 0.0, seed: 9 };
        let run = simulate_with_noise_restarts(&x, &eigs, &coeffs, &cfg, &times).unwrap();
        let plain = linearized_modal_trajectory(&x, &eigs, &coeffs, &times).unwrap();
        assert!(run.shock_times.is_empty());
        assert_eq!(run.trajectory, plain);
    }

    #[test]
    fn shocks_keep_amplitudes() {
        let (_, x, eigs) = setup();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 8];
        coeffs[0] = Complex64::new(5e-4, 0.0);
        coeffs[7] = coeffs[0];
        let times: Vec<f64> = (0..400).map(|i| i as f64 * 0.1).collect();
        let cfg = NoiseRestartConfig { shock_rate: 2.0, seed: 5 };
        let run = simulate_with_noise_restarts(&x, &eigs, &coeffs, &cfg, &times).unwrap();
        assert!(!run.shock_times.is_empty());
        // a pure 0.8i mode keeps the A1 deviation on a circle of fixed radius
        let radius = 2.0 * 5e-4 * eigs[0].xi[0].norm();
        for s in &run.trajectory.states {
            assert!((s.as_slice()[0] - x.as_slice()[0]).abs() <= radius * (1.0 + 1e-9));
        }
    }
}
