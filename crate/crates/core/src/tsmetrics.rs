//! Cycle measurements on play series and trajectories.
//!
//! The angular momentum of a series in the coordinate plane `(m, n)` is
//!
//! ```text
//! L = 1/(N−1) · Σ_t (x(t) − O) × (x(t+1) − x(t))
//! ```
//!
//! with `×` the planar cross product. Multi-session data is averaged with
//! transition-count weights and no transition ever joins two sessions.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::game::StateVector;
use crate::spectral::SubspacePair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    #[default]
    FixedPair,
    RandomMatch,
}

impl FromStr for Protocol {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed-pair" => Ok(Protocol::FixedPair),
            "random-match" => Ok(Protocol::RandomMatch),
            other => Err(Error::Parse(format!("unknown protocol {other:?}"))),
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::FixedPair => "fixed-pair",
            Protocol::RandomMatch => "random-match",
        })
    }
}

/// One round of play, choices 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub round: u64,
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub rounds: Vec<Round>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaySeries {
    n_a: usize,
    n_b: usize,
    sessions: Vec<Session>,
    protocol: Protocol,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlayRecord {
    session: String,
    round: u64,
    a_choice: usize,
    b_choice: usize,
}

impl PlaySeries {
    pub fn new(n_a: usize, n_b: usize, sessions: Vec<Session>, protocol: Protocol) -> Result<Self> {
        if n_a == 0 || n_b == 0 {
            return Err(Error::Dimension("strategy counts must be positive".into()));
        }
        if sessions.is_empty() {
            return Err(Error::InsufficientData("series has no sessions".into()));
        }
        for s in &sessions {
            if s.rounds.is_empty() {
                return Err(Error::InsufficientData(format!("session {:?} is empty", s.id)));
            }
            for w in s.rounds.windows(2) {
                if w[1].round <= w[0].round {
                    return Err(Error::Parse(format!(
                        "session {:?}: round {} follows round {}",
                        s.id, w[1].round, w[0].round
                    )));
                }
            }
            for r in &s.rounds {
                if !(1..=n_a).contains(&r.a) || !(1..=n_b).contains(&r.b) {
                    return Err(Error::InvalidState(format!(
                        "session {:?} round {}: choice ({}, {}) outside 1..{} x 1..{}",
                        s.id, r.round, r.a, r.b, n_a, n_b
                    )));
                }
            }
        }
        Ok(Self { n_a, n_b, sessions, protocol })
    }

    /// Single session from `(a, b)` choices numbered from round 1.
    pub fn from_choices(n_a: usize, n_b: usize, choices: &[(usize, usize)]) -> Result<Self> {
        let rounds = choices.iter().enumerate().map(|(i, &(a, b))| Round { round: i as u64 + 1, a, b }).collect();
        Self::new(n_a, n_b, vec![Session { id: "1".into(), rounds }], Protocol::FixedPair)
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn dim(&self) -> usize {
        self.n_a + self.n_b
    }

    pub fn sessions(&self) -> &[Session] {
        &self.sessions
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn rounds(&self) -> usize {
        self.sessions.iter().map(|s| s.rounds.len()).sum()
    }

    pub fn transitions(&self) -> usize {
        self.sessions.iter().map(|s| s.rounds.len() - 1).sum()
    }

    /// Reads `session,round,a_choice,b_choice` rows. Sessions keep the order
    /// of their first appearance.
    pub fn from_csv<R: Read>(reader: R, n_a: usize, n_b: usize, protocol: Protocol) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut sessions: Vec<Session> = Vec::new();
        for rec in rdr.deserialize() {
            let rec: PlayRecord = rec?;
            let pos = *index.entry(rec.session.clone()).or_insert_with(|| {
                sessions.push(Session { id: rec.session.clone(), rounds: Vec::new() });
                sessions.len() - 1
            });
            sessions[pos].rounds.push(Round { round: rec.round, a: rec.a_choice, b: rec.b_choice });
        }
        Self::new(n_a, n_b, sessions, protocol)
    }

    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for s in &self.sessions {
            for r in &s.rounds {
                wtr.serialize(PlayRecord { session: s.id.clone(), round: r.round, a_choice: r.a, b_choice: r.b })?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<StateVector>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::Dimension(format!("{} times for {} states", times.len(), states.len())));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidState("times must be strictly increasing".into()));
        }
        if let Some(first) = states.first() {
            if states.iter().any(|s| s.n_a() != first.n_a() || s.dim() != first.dim()) {
                return Err(Error::Dimension("states of mixed shape".into()));
            }
        }
        Ok(Self { times, states })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.dim())
    }

    /// Projection onto coordinates `(m, n)` (1-based).
    pub fn project(&self, pair: SubspacePair) -> Vec<[f64; 2]> {
        self.states.iter().map(|s| [s.as_slice()[pair.m - 1], s.as_slice()[pair.n - 1]]).collect()
    }

    /// Writes `t,x1..xs`.
    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("x{i}")));
        wtr.write_record(&header)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut row = vec![fmt_f64(*t)];
            row.extend(s.as_slice().iter().map(|v| fmt_f64(*v)));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn from_csv<R: Read>(reader: R, n_a: usize) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut times = Vec::new();
        let mut states = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|f| f.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number {f:?}"))))
                .collect::<Result<_>>()?;
            if vals.len() < 2 {
                return Err(Error::Parse("trajectory row needs t and at least one coordinate".into()));
            }
            times.push(vals[0]);
            states.push(StateVector::new(vals[1..].to_vec(), n_a)?);
        }
        Self::new(times, states)
    }
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// One-hot embedding of each round: `e_a ⊕ e_b`.
pub fn encode_states(series: &PlaySeries) -> Trajectory {
    let mut times = Vec::with_capacity(series.rounds());
    let mut states = Vec::with_capacity(series.rounds());
    let mut t = 0.0;
    for s in series.sessions() {
        for r in &s.rounds {
            t += 1.0;
            times.push(t);
            states.push(vertex(series, r));
        }
    }
    Trajectory { times, states }
}

/// One trajectory per session, times equal to round numbers.
pub fn encode_sessions(series: &PlaySeries) -> Vec<Trajectory> {
    series
        .sessions()
        .iter()
        .map(|s| Trajectory {
            times: s.rounds.iter().map(|r| r.round as f64).collect(),
            states: s.rounds.iter().map(|r| vertex(series, r)).collect(),
        })
        .collect()
}

fn vertex(series: &PlaySeries, r: &Round) -> StateVector {
    StateVector::vertex(r.a - 1, r.b - 1, series.n_a(), series.n_b()).expect("choices validated on construction")
}

#[inline]
fn cross_step(p: [f64; 2], q: [f64; 2], o: [f64; 2]) -> f64 {
    let (rx, ry) = (p[0] - o[0], p[1] - o[1]);
    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
    rx * dy - ry * dx
}

/// Running sums of the cross-product terms for planar points.
pub fn accumulated_angular_momentum_points(points: &[[f64; 2]], origin: [f64; 2]) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!("{} points; need at least 2", points.len())));
    }
    let mut acc = 0.0;
    Ok(points
        .windows(2)
        .map(|w| {
            acc += cross_step(w[0], w[1], origin);
            acc
        })
        .collect())
}

pub fn angular_momentum_points(points: &[[f64; 2]], origin: [f64; 2]) -> Result<f64> {
    let acc = accumulated_angular_momentum_points(points, origin)?;
    Ok(acc[acc.len() - 1] / (points.len() - 1) as f64)
}

fn origin_in(origin: &StateVector, pair: SubspacePair) -> [f64; 2] {
    [origin.as_slice()[pair.m - 1], origin.as_slice()[pair.n - 1]]
}

fn check_pair(dim: usize, origin: &StateVector, pair: SubspacePair) -> Result<()> {
    if origin.dim() != dim {
        return Err(Error::Dimension(format!("origin has dimension {}, data {dim}", origin.dim())));
    }
    if pair.n > dim {
        return Err(Error::Dimension(format!("subspace {pair} outside dimension {dim}")));
    }
    Ok(())
}

pub fn angular_momentum(traj: &Trajectory, origin: &StateVector, pair: SubspacePair) -> Result<f64> {
    if traj.len() < 2 {
        return Err(Error::InsufficientData(format!("trajectory of length {}", traj.len())));
    }
    check_pair(traj.dim(), origin, pair)?;
    angular_momentum_points(&traj.project(pair), origin_in(origin, pair))
}

pub fn accumulated_angular_momentum(traj: &Trajectory, origin: &StateVector, pair: SubspacePair) -> Result<Vec<f64>> {
    if traj.len() < 2 {
        return Err(Error::InsufficientData(format!("trajectory of length {}", traj.len())));
    }
    check_pair(traj.dim(), origin, pair)?;
    accumulated_angular_momentum_points(&traj.project(pair), origin_in(origin, pair))
}

/// Running sum across sessions laid end to end; each session contributes
/// only its own transitions.
pub fn accumulated_angular_momentum_sessions(
    sessions: &[Trajectory],
    origin: &StateVector,
    pair: SubspacePair,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut offset = 0.0;
    for s in sessions.iter().filter(|s| s.len() >= 2) {
        let part = accumulated_angular_momentum(s, origin, pair)?;
        out.extend(part.iter().map(|v| v + offset));
        offset = *out.last().unwrap();
    }
    if out.is_empty() {
        return Err(Error::InsufficientData("no session has two rounds".into()));
    }
    Ok(out)
}

/// Transition-weighted mean of per-session angular momentum.
pub fn angular_momentum_sessions(sessions: &[Trajectory], origin: &StateVector, pair: SubspacePair) -> Result<f64> {
    let acc = accumulated_angular_momentum_sessions(sessions, origin, pair)?;
    Ok(acc[acc.len() - 1] / acc.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularMomentumTable {
    dim: usize,
    values: Vec<f64>,
    /// Standard errors; absent for tables read from files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    std_errors: Option<Vec<f64>>,
    origin: Vec<f64>,
    transitions: usize,
}

impl AngularMomentumTable {
    pub fn from_values(dim: usize, values: Vec<f64>, origin: Vec<f64>) -> Result<Self> {
        if values.len() != SubspacePair::count(dim) {
            return Err(Error::Dimension(format!("{} values for dimension {dim}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite angular momentum".into()));
        }
        Ok(Self { dim, values, std_errors: None, origin, transitions: 0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn std_errors(&self) -> Option<&[f64]> {
        self.std_errors.as_deref()
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn transitions(&self) -> usize {
        self.transitions
    }

    pub fn get(&self, pair: SubspacePair) -> f64 {
        self.values[pair.index(self.dim)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (SubspacePair, f64)> + '_ {
        SubspacePair::enumerate(self.dim).into_iter().zip(self.values.iter().copied())
    }

    /// `pair,L` rows with two-digit pair codes.
    pub fn to_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["pair", "L"])?;
        for (p, v) in self.iter() {
            wtr.write_record([p.code(), fmt_f64(v)])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn from_csv<R: Read>(reader: R, dim: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut values = vec![f64::NAN; SubspacePair::count(dim)];
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Parse(format!("expected pair,L; got {} fields", rec.len())));
            }
            let p = SubspacePair::parse(&rec[0])?;
            if p.n > dim {
                return Err(Error::Dimension(format!("pair {p} outside dimension {dim}")));
            }
            values[p.index(dim)] = rec[1].parse().map_err(|_| Error::Parse(format!("bad value {:?}", &rec[1])))?;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InsufficientData("table is missing subspaces".into()));
        }
        Self::from_values(dim, values, Vec::new())
    }
}

/// Angular momentum of every subspace from session trajectories, with
/// standard errors.
///
/// Consecutive cross-product terms share a state so they are 1-dependent;
/// the variance of the mean uses the lag-0 and lag-1 autocovariances
/// pooled over sessions.
pub fn angular_momentum_table_sessions(sessions: &[Trajectory], origin: &StateVector) -> Result<AngularMomentumTable> {
    let dim = origin.dim();
    let n: usize = sessions.iter().map(|s| s.len().saturating_sub(1)).sum();
    if n == 0 {
        return Err(Error::InsufficientData("no transitions in the data".into()));
    }
    for s in sessions {
        if s.dim() != dim && !s.is_empty() {
            return Err(Error::Dimension(format!("session of dimension {} vs origin {dim}", s.dim())));
        }
    }
    let pairs = SubspacePair::enumerate(dim);
    let mut values = Vec::with_capacity(pairs.len());
    let mut ses = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let o = origin_in(origin, pair);
        let terms: Vec<Vec<f64>> = sessions
            .iter()
            .filter(|s| s.len() >= 2)
            .map(|s| s.project(pair).windows(2).map(|w| cross_step(w[0], w[1], o)).collect())
            .collect();
        let mean = terms.iter().flatten().sum::<f64>() / n as f64;
        let mut g0 = 0.0;
        let mut g1 = 0.0;
        for t in &terms {
            g0 += t.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
            g1 += t.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>();
        }
        let var_sum = g0 + 2.0 * g1;
        let var_sum = if var_sum > 0.0 { var_sum } else { g0 };
        values.push(mean);
        ses.push(var_sum.sqrt() / n as f64);
    }
    Ok(AngularMomentumTable { dim, values, std_errors: Some(ses), origin: origin.as_slice().to_vec(), transitions: n })
}

pub fn angular_momentum_table(series: &PlaySeries, origin: &StateVector) -> Result<AngularMomentumTable> {
    if origin.n_a() != series.n_a() || origin.n_b() != series.n_b() {
        return Err(Error::Dimension(format!(
            "origin is {} + {}, series is {} x {}",
            origin.n_a(),
            origin.n_b(),
            series.n_a(),
            series.n_b()
        )));
    }
    if series.transitions() == 0 {
        return Err(Error::InsufficientData("series has no transitions".into()));
    }
    angular_momentum_table_sessions(&encode_sessions(series), origin)
}

/// State space used for net transit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransitMode {
    /// One state per dimension; every active dimension at `t` links to every
    /// active dimension at `t+1`.
    #[default]
    Occupancy,
    /// One state per dimension; links only within each population.
    WithinPopulation,
    /// One state per joint profile `(a−1)·n_b + b`.
    JointProfile,
}

impl FromStr for TransitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "occupancy" => Ok(TransitMode::Occupancy),
            "within-population" => Ok(TransitMode::WithinPopulation),
            "joint-profile" | "joint" => Ok(TransitMode::JointProfile),
            other => Err(Error::Parse(format!("unknown transit mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetTransitMatrix {
    /// Net current `T_mn = ρ_m A_mn − ρ_n A_nm`.
    pub t: Vec<Vec<f64>>,
    /// Visit frequencies over the origins of counted transitions.
    pub rho: Vec<f64>,
    /// Row-normalized transition counts; zero rows for never-left states.
    pub a: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

impl NetTransitMatrix {
    pub fn size(&self) -> usize {
        self.t.len()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.size();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.t[i][j] + self.t[j][i]).abs());
            }
        }
        worst
    }
}

/// Net transit of a chain given as one state list per session (0-based states).
///
/// Each entry of a session is the set of states occupied at that step; a
/// step to the next entry counts one transition for every (from, to) pair.
pub fn net_transit_chain(sessions: &[Vec<Vec<usize>>], n_states: usize) -> Result<NetTransitMatrix> {
    let mut counts = vec![vec![0.0_f64; n_states]; n_states];
    let mut total = 0.0;
    for s in sessions {
        for w in s.windows(2) {
            for &from in &w[0] {
                for &to in &w[1] {
                    if from >= n_states || to >= n_states {
                        return Err(Error::InvalidState(format!("state outside 0..{n_states}")));
                    }
                    counts[from][to] += 1.0;
                    total += 1.0;
                }
            }
        }
    }
    if total == 0.0 {
        return Err(Error::InsufficientData("need at least two rounds in one session".into()));
    }
    let out: Vec<f64> = counts.iter().map(|row| row.iter().sum()).collect();
    let rho: Vec<f64> = out.iter().map(|c| c / total).collect();
    let a: Vec<Vec<f64>> = counts
        .iter()
        .zip(&out)
        .map(|(row, &o)| row.iter().map(|&c| if o > 0.0 { c / o } else { 0.0 }).collect())
        .collect();
    // ρ_m A_mn is C_mn / total, so T is exactly antisymmetric
    let t = (0..n_states).map(|m| (0..n_states).map(|n| (counts[m][n] - counts[n][m]) / total).collect()).collect();
    let labels = (1..=n_states).map(|i| i.to_string()).collect();
    Ok(NetTransitMatrix { t, rho, a, labels })
}

/// Single-session chain with one state per step.
pub fn net_transit_states(states: &[usize], n_states: usize) -> Result<NetTransitMatrix> {
    let seq = states.iter().map(|&s| vec![s]).collect();
    net_transit_chain(&[seq], n_states)
}

pub fn net_transit(series: &PlaySeries, mode: TransitMode) -> Result<NetTransitMatrix> {
    if series.transitions() == 0 {
        return Err(Error::InsufficientData("series has no transitions".into()));
    }
    let (n_a, n_b) = (series.n_a(), series.n_b());
    match mode {
        TransitMode::Occupancy => {
            let chains: Vec<Vec<Vec<usize>>> = series
                .sessions()
                .iter()
                .map(|s| s.rounds.iter().map(|r| vec![r.a - 1, n_a + r.b - 1]).collect())
                .collect();
            net_transit_chain(&chains, n_a + n_b)
        }
        TransitMode::WithinPopulation => {
            let mut chains = Vec::with_capacity(2 * series.sessions().len());
            for s in series.sessions() {
                chains.push(s.rounds.iter().map(|r| vec![r.a - 1]).collect());
                chains.push(s.rounds.iter().map(|r| vec![n_a + r.b - 1]).collect());
            }
            net_transit_chain(&chains, n_a + n_b)
        }
        TransitMode::JointProfile => {
            let chains: Vec<Vec<Vec<usize>>> = series
                .sessions()
                .iter()
                .map(|s| s.rounds.iter().map(|r| vec![(r.a - 1) * n_b + (r.b - 1)]).collect())
                .collect();
            let mut m = net_transit_chain(&chains, n_a * n_b)?;
            m.labels = (1..=n_a).flat_map(|a| (1..=n_b).map(move |b| format!("{a}{b}"))).collect();
            Ok(m)
        }
    }
}
