//! Reference data bundled with the crate, pinned by SHA-256.
//!
//! Any correction to a transcribed file must bump [`FIXTURE_VERSION`] along
//! with the pinned digest.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::game::PayoffBimatrix;
use crate::spectral::{EigencycleSet, SubspacePair};
use crate::tsmetrics::Protocol;

pub const FIXTURE_VERSION: u32 = 1;

pub const GAME_FILE: &str = "oneill.json";
pub const EIGEN_TABLE_FILE: &str = "eigen_table.json";
pub const L_TABLE_FILE: &str = "l_table.csv";
pub const EXPERIMENTS_FILE: &str = "experiments.csv";
pub const REFERENCE_FILE: &str = "reference_results.json";

/// `(file name, embedded text, SHA-256 hex)`.
const EMBEDDED: [(&str, &str, &str); 5] = [
    (
        GAME_FILE,
        include_str!("../fixtures/oneill.json"),
        "e87cff9d5629dcb56eea70db0e2f9e69d0397329480e288aa797f38935ca7037",
    ),
    (
        EIGEN_TABLE_FILE,
        include_str!("../fixtures/eigen_table.json"),
        "6d9b5082d34d3e8deb6902f3b37ef9f4322e9a1c526d00dcdadaea80733f35fb",
    ),
    (
        L_TABLE_FILE,
        include_str!("../fixtures/l_table.csv"),
        "0124dee8e1fe3133e320fdfa7326d35b5f99ea598ba71e9b652d6a0b0898019c",
    ),
    (
        EXPERIMENTS_FILE,
        include_str!("../fixtures/experiments.csv"),
        "9ce3a00dda2eca6211ff7bca4990d5ff635ac5abd4593211064c5ca99ea80e0d",
    ),
    (
        REFERENCE_FILE,
        include_str!("../fixtures/reference_results.json"),
        "3d4df84f07226deeac5343629cb4d6690e86fe78c3f3fd05d130b22ad82d0145",
    ),
];

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_names() -> impl Iterator<Item = &'static str> {
    EMBEDDED.iter().map(|(n, _, _)| *n)
}

pub fn pinned_digest(name: &str) -> Option<&'static str> {
    EMBEDDED.iter().find(|(n, _, _)| *n == name).map(|(_, _, d)| *d)
}

/// Embedded text of a fixture after checking its digest.
pub fn embedded(name: &str) -> Result<&'static str> {
    let (_, text, digest) = EMBEDDED
        .iter()
        .find(|(n, _, _)| *n == name)
        .ok_or_else(|| Error::Fixture(format!("no fixture named {name:?}")))?;
    check_digest(name, text, digest)?;
    Ok(text)
}

fn check_digest(name: &str, text: &str, digest: &str) -> Result<()> {
    let got = sha256_hex(text.as_bytes());
    if got != digest {
        return Err(Error::Fixture(format!("{name}: checksum {got} does not match pinned {digest}")));
    }
    Ok(())
}

/// Eigenvalues, eigenvectors and eigencycle values of the reference game.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenTable {
    pub columns: Vec<String>,
    pub eigenvalues: Vec<Complex64>,
    pub eigenvectors: Vec<Vec<Complex64>>,
    pub pairs: Vec<SubspacePair>,
    /// One row per pair, one entry per column.
    pub eigencycles: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct EigenTableFile {
    version: u32,
    columns: Vec<String>,
    eigenvalues: Vec<[f64; 2]>,
    eigenvectors: Vec<Vec<[f64; 2]>>,
    pairs: Vec<String>,
    eigencycles: Vec<Vec<f64>>,
}

impl EigenTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: EigenTableFile = serde_json::from_str(text)?;
        if f.version != FIXTURE_VERSION {
            return Err(Error::Fixture(format!("eigen table version {} (expected {FIXTURE_VERSION})", f.version)));
        }
        let k = f.columns.len();
        if f.eigenvalues.len() != k || f.eigenvectors.len() != k {
            return Err(Error::Fixture("eigen table column counts disagree".into()));
        }
        let dim = f.eigenvectors.first().map_or(0, |v| v.len());
        if f.eigenvectors.iter().any(|v| v.len() != dim) {
            return Err(Error::Fixture("eigenvectors of unequal length".into()));
        }
        let pairs = f.pairs.iter().map(|p| SubspacePair::parse(p)).collect::<Result<Vec<_>>>()?;
        if pairs != SubspacePair::enumerate(dim) {
            return Err(Error::Fixture("eigencycle rows are not the standard subspace order".into()));
        }
        if f.eigencycles.len() != pairs.len() || f.eigencycles.iter().any(|r| r.len() != k) {
            return Err(Error::Fixture("eigencycle block has the wrong shape".into()));
        }
        let c = |z: &[f64; 2]| Complex64::new(z[0], z[1]);
        Ok(Self {
            columns: f.columns,
            eigenvalues: f.eigenvalues.iter().map(c).collect(),
            eigenvectors: f.eigenvectors.iter().map(|v| v.iter().map(c).collect()).collect(),
            pairs,
            eigencycles: f.eigencycles,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvectors.first().map_or(0, |v| v.len())
    }

    pub fn column_index(&self, tag: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == tag)
            .ok_or_else(|| Error::Fixture(format!("eigen table has no column {tag:?}")))
    }

    pub fn eigencycle_column(&self, tag: &str) -> Result<EigencycleSet> {
        let k = self.column_index(tag)?;
        EigencycleSet::from_values(self.dim(), self.eigencycles.iter().map(|r| r[k]).collect())
    }

    pub fn eigenvector(&self, tag: &str) -> Result<&[Complex64]> {
        Ok(&self.eigenvectors[self.column_index(tag)?])
    }

    /// Conjugate columns negate each other and real eigenvalues carry no cycles.
    pub fn check_conventions(&self) -> Result<()> {
        for (k, tag) in self.columns.iter().enumerate() {
            let lam = self.eigenvalues[k];
            if lam.im == 0.0 {
                if self.eigencycles.iter().any(|r| r[k] != 0.0) {
                    return Err(Error::Fixture(format!("real column {tag} has nonzero eigencycles")));
                }
                continue;
            }
            let partner = if let Some(rest) = tag.strip_prefix('-') { rest.to_string() } else { format!("-{tag}") };
            let j = self.column_index(&partner)?;
            if self.eigenvalues[j] != lam.conj() {
                return Err(Error::Fixture(format!("{partner} is not the conjugate of {tag}")));
            }
            if self.eigencycles.iter().any(|r| r[k] != -r[j]) {
                return Err(Error::Fixture(format!("columns {tag} and {partner} are not negatives")));
            }
        }
        Ok(())
    }
}

/// Measured angular momentum per subspace and experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LTable {
    pub experiments: Vec<String>,
    pub pairs: Vec<SubspacePair>,
    /// One row per pair, one entry per experiment.
    pub values: Vec<Vec<f64>>,
}

impl LTable {
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("pair") || headers.len() < 2 {
            return Err(Error::Parse("table header must be pair,<experiment>...".into()));
        }
        let experiments: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut pairs = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != headers.len() {
                return Err(Error::Parse(format!("row has {} fields, header {}", rec.len(), headers.len())));
            }
            pairs.push(SubspacePair::parse(&rec[0])?);
            values.push(
                rec.iter()
                    .skip(1)
                    .map(|v| v.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {v:?}"))))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        if pairs.is_empty() {
            return Err(Error::InsufficientData("table has no rows".into()));
        }
        Ok(Self { experiments, pairs, values })
    }

    /// Writes the table; `decimals` fixes the number format, otherwise the
    /// shortest round-tripping form is used.
    pub fn to_csv<W: Write>(&self, writer: W, decimals: Option<usize>) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["pair".to_string()];
        header.extend(self.experiments.iter().cloned());
        wtr.write_record(&header)?;
        for (p, row) in self.pairs.iter().zip(&self.values) {
            let mut rec = vec![p.code()];
            rec.extend(row.iter().map(|v| match decimals {
                Some(d) => format!("{v:.d$}"),
                None => format!("{v:?}"),
            }));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.experiments
            .iter()
            .position(|e| e == name)
            .ok_or_else(|| Error::Fixture(format!("table has no experiment {name:?}")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.column_index(name)?;
        Ok(self.values.iter().map(|r| r[k]).collect())
    }

    pub fn value(&self, pair: SubspacePair, experiment: &str) -> Result<f64> {
        let k = self.column_index(experiment)?;
        let row = self
            .pairs
            .iter()
            .position(|p| *p == pair)
            .ok_or_else(|| Error::Fixture(format!("table has no pair {pair}")))?;
        Ok(self.values[row][k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub experiment: String,
    pub rounds: u64,
    pub protocol: Protocol,
    pub sessions: u32,
}

pub fn experiments_from_csv<R: Read>(reader: R) -> Result<Vec<Experiment>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<Experiment>, _>>()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankConsistency {
    pub rho: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaRegression {
    pub slope_t: Vec<f64>,
    pub slope_p: Vec<f64>,
    pub const_t: Vec<f64>,
    pub const_p: Vec<f64>,
    pub r_squared: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledRegression {
    pub pooled: Vec<String>,
    pub terms: Vec<String>,
    pub coef: Vec<f64>,
    pub std_err: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanTest {
    pub pairs: Vec<String>,
    pub n: usize,
    pub p: f64,
}

/// Summary statistics reported for the reference experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceResults {
    pub version: u32,
    pub experiments: Vec<String>,
    pub rank_consistency: RankConsistency,
    pub sigma_regressions: BTreeMap<String, SigmaRegression>,
    pub pooled_regression: PooledRegression,
    pub fine_structure_tests: BTreeMap<String, MeanTest>,
}

#[derive(Debug, Clone)]
pub struct FixtureSet {
    pub game: PayoffBimatrix,
    pub eigen_table: EigenTable,
    pub l_table: LTable,
    pub experiments: Vec<Experiment>,
    pub reference: ReferenceResults,
}

impl FixtureSet {
    /// The copies compiled into the library.
    pub fn embedded() -> Result<Self> {
        Self::from_texts(|name| embedded(name).map(str::to_string))
    }

    /// Files from a directory, each checked against its pinned digest.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        Self::from_texts(|name| {
            let path = dir.join(name);
            let text =
                std::fs::read_to_string(&path).map_err(|e| Error::Fixture(format!("{}: {e}", path.display())))?;
            check_digest(name, &text, pinned_digest(name).expect("known fixture"))?;
            Ok(text)
        })
    }

    fn from_texts(mut load: impl FnMut(&str) -> Result<String>) -> Result<Self> {
        let game = PayoffBimatrix::from_json(&load(GAME_FILE)?)?;
        let eigen_table = EigenTable::from_json(&load(EIGEN_TABLE_FILE)?)?;
        eigen_table.check_conventions()?;
        let l_table = LTable::from_csv(load(L_TABLE_FILE)?.as_bytes())?;
        let experiments = experiments_from_csv(load(EXPERIMENTS_FILE)?.as_bytes())?;
        let reference: ReferenceResults = serde_json::from_str(&load(REFERENCE_FILE)?)?;
        if reference.version != FIXTURE_VERSION {
            return Err(Error::Fixture(format!("reference results version {}", reference.version)));
        }
        Ok(Self { game, eigen_table, l_table, experiments, reference })
    }

    pub fn rounds(&self, experiment: &str) -> Result<u64> {
        self.experiments
            .iter()
            .find(|e| e.experiment == experiment)
            .map(|e| e.rounds)
            .ok_or_else(|| Error::Fixture(format!("no experiment {experiment:?}")))
    }
}

/// Writes the embedded fixture files into `dir`.
pub fn write_embedded(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, text, _) in EMBEDDED {
        std::fs::write(dir.join(name), text)?;
    }
    Ok(())
}
