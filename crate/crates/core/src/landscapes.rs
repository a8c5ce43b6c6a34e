//! Ground-truth fitness functions and the budgeted oracle around them.
//!
//! A [`Landscape`] is a pure function of the sequence. Wrapping one in a
//! [`FitnessOracle`] adds query accounting; [`NoisyOracle`] adds truncated
//! Gaussian noise whose scale is set by a signal-to-noise ratio relative to
//! the variance of the initial data.

use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::rng::{stream, unit_hash};
use crate::seq::{parse_sequence, AminoAcid, SeqError, Sequence, ALPHABET_SIZE};
use crate::surrogate::{check_len, Prediction, Surrogate, SurrogateError};

#[derive(Debug, Error)]
pub enum LandscapeError {
    #[error("NK landscape needs 0 <= k < L, got k = {k}, L = {len}")]
    InvalidK { k: usize, len: usize },
    #[error("invalid landscape: {0}")]
    Invalid(String),
    #[error("sequence {0} is not in the table")]
    UnknownSequence(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate sequence {sequence} on line {line}")]
    DuplicateKey { sequence: String, line: usize },
    #[error("variance must be non-negative and finite, got {0}")]
    NegativeVariance(f64),
    #[error("could only find {found} distinct mutants, {wanted} requested")]
    ExhaustedSpace { wanted: usize, found: usize },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// A deterministic ground-truth fitness function.
pub trait Landscape: Send + Sync {
    fn sequence_len(&self) -> usize;

    fn fitness(&self, x: &Sequence) -> Result<f64, LandscapeError>;

    /// The global maximiser, when it is cheap to compute.
    fn optimum(&self) -> Option<(Sequence, f64)> {
        None
    }
}

fn check(len: usize, x: &Sequence) -> Result<(), LandscapeError> {
    if x.len() != len {
        return Err(SeqError::LengthMismatch {
            expected: len,
            got: x.len(),
        }
        .into());
    }
    Ok(())
}

/// Independent per-site weights: `f(x) = sum_i w[i][x_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveLandscape {
    weights: Vec<[f64; ALPHABET_SIZE]>,
}

impl AdditiveLandscape {
    pub fn new(weights: Vec<[f64; ALPHABET_SIZE]>) -> Result<Self, LandscapeError> {
        if weights.is_empty() {
            return Err(LandscapeError::Invalid("additive landscape needs L >= 1".into()));
        }
        if weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(LandscapeError::Invalid("weights must be finite".into()));
        }
        Ok(AdditiveLandscape { weights })
    }

    /// Weights drawn uniformly from `[0, 1)`.
    pub fn random(len: usize, seed: u64) -> Result<Self, LandscapeError> {
        let weights = (0..len)
            .map(|i| std::array::from_fn(|a| unit_hash(seed, &[0xadd, i as u64, a as u64])))
            .collect();
        Self::new(weights)
    }

    pub fn weights(&self) -> &[[f64; ALPHABET_SIZE]] {
        &self.weights
    }
}

impl Landscape for AdditiveLandscape {
    fn sequence_len(&self) -> usize {
        self.weights.len()
    }

    fn fitness(&self, x: &Sequence) -> Result<f64, LandscapeError> {
        check(self.weights.len(), x)?;
        Ok(x.iter().zip(&self.weights).map(|(a, w)| w[a.index()]).sum())
    }

    fn optimum(&self) -> Option<(Sequence, f64)> {
        let mut best = Vec::with_capacity(self.weights.len());
        let mut total = 0.0;
        for w in &self.weights {
            // first maximum in alphabet order
            let (a, v) = w
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (a, &v)| if v > acc.1 { (a, v) } else { acc });
            best.push(AminoAcid::from_index(a).expect("index < 20"));
            total += v;
        }
        Some((Sequence::new(best).ok()?, total))
    }
}

/// Kauffman NK landscape over the 20-letter alphabet.
///
/// Site `i` contributes a value that depends on its own residue and those at
/// `k` other sites. The `L x 20^(k+1)` contribution table is never stored:
/// entries are hashed from `(seed, site, residue tuple)` on demand, which is
/// the same as drawing the whole table up front from `U[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NkLandscape {
    len: usize,
    k: usize,
    seed: u64,
    neighbors: Vec<Vec<usize>>,
}

impl NkLandscape {
    pub fn new(len: usize, k: usize, seed: u64) -> Result<Self, LandscapeError> {
        if len == 0 || k >= len {
            return Err(LandscapeError::InvalidK { k, len });
        }
        let mut rng = stream(seed, &[0x4e4b]);
        let neighbors = (0..len)
            .map(|i| {
                sample(&mut rng, len - 1, k)
                    .into_iter()
                    .map(|j| if j >= i { j + 1 } else { j })
                    .collect()
            })
            .collect();
        Ok(NkLandscape {
            len,
            k,
            seed,
            neighbors,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Neighbours of each site, excluding the site itself.
    pub fn neighbors(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn contribution(&self, site: usize, x: &Sequence) -> f64 {
        let r = x.residues();
        let code = self.neighbors[site]
            .iter()
            .fold(r[site].index() as u64, |acc, &j| acc * ALPHABET_SIZE as u64 + r[j].index() as u64);
        unit_hash(self.seed, &[site as u64, code])
    }

    /// For `k = 0`, the equivalent additive landscape.
    pub fn to_additive(&self) -> Option<AdditiveLandscape> {
        if self.k != 0 {
            return None;
        }
        let n = self.len as f64;
        let weights = (0..self.len)
            .map(|i| std::array::from_fn(|a| unit_hash(self.seed, &[i as u64, a as u64]) / n))
            .collect();
        AdditiveLandscape::new(weights).ok()
    }
}

impl Landscape for NkLandscape {
    fn sequence_len(&self) -> usize {
        self.len
    }

    fn fitness(&self, x: &Sequence) -> Result<f64, LandscapeError> {
        check(self.len, x)?;
        Ok((0..self.len).map(|i| self.contribution(i, x)).sum::<f64>() / self.len as f64)
    }
}

/// Exact lookup over a measured set.
#[derive(Debug, Clone, PartialEq)]
pub struct TableLandscape {
    len: usize,
    table: HashMap<Sequence, f64>,
}

impl TableLandscape {
    /// Reads `sequence,fitness` rows. Unknown columns after those two are
    /// ignored; duplicate sequences are an error even with equal fitness.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, LandscapeError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let parse_err = |line: usize, message: String| LandscapeError::Parse { line, message };
        let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(si), Some(fi)) = (col("sequence"), col("fitness")) else {
            return Err(parse_err(1, "header must contain `sequence` and `fitness`".into()));
        };
        let mut table = HashMap::new();
        let mut len = None;
        for (n, row) in rdr.records().enumerate() {
            let line = n + 2;
            let row = row.map_err(|e| parse_err(line, e.to_string()))?;
            let text = row.get(si).unwrap_or_default();
            let x = parse_sequence(text).map_err(|e| parse_err(line, e.to_string()))?;
            let y: f64 = row
                .get(fi)
                .unwrap_or_default()
                .parse()
                .map_err(|e| parse_err(line, format!("fitness: {e}")))?;
            if !y.is_finite() {
                return Err(parse_err(line, "fitness must be finite".into()));
            }
            match len {
                None => len = Some(x.len()),
                Some(l) if l != x.len() => {
                    return Err(parse_err(line, format!("length {} differs from {l}", x.len())))
                }
                _ => {}
            }
            if table.insert(x, y).is_some() {
                return Err(LandscapeError::DuplicateKey {
                    sequence: text.to_string(),
                    line,
                });
            }
        }
        let len = len.ok_or_else(|| parse_err(1, "no rows".into()))?;
        Ok(TableLandscape { len, table })
    }

    pub fn from_path(path: &Path) -> Result<Self, LandscapeError> {
        let file = std::fs::File::open(path).map_err(|source| LandscapeError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv(file)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn sequences(&self) -> impl Iterator<Item = &Sequence> {
        self.table.keys()
    }
}

impl Landscape for TableLandscape {
    fn sequence_len(&self) -> usize {
        self.len
    }

    fn fitness(&self, x: &Sequence) -> Result<f64, LandscapeError> {
        check(self.len, x)?;
        self.table
            .get(x)
            .copied()
            .ok_or_else(|| LandscapeError::UnknownSequence(x.to_string()))
    }

    fn optimum(&self) -> Option<(Sequence, f64)> {
        self.table
            .iter()
            .max_by(|a, b| a.1.total_cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(x, y)| (x.clone(), *y))
    }
}

/// Serializable description of a landscape, for configs and replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LandscapeSpec {
    Nk { length: usize, k: usize, seed: u64 },
    Additive { length: usize, seed: u64 },
    Table { path: PathBuf },
}

impl LandscapeSpec {
    pub fn build(&self) -> Result<Arc<dyn Landscape>, LandscapeError> {
        Ok(match self {
            LandscapeSpec::Nk { length, k, seed } => Arc::new(NkLandscape::new(*length, *k, *seed)?),
            LandscapeSpec::Additive { length, seed } => Arc::new(AdditiveLandscape::random(*length, *seed)?),
            LandscapeSpec::Table { path } => Arc::new(TableLandscape::from_path(path)?),
        })
    }
}

/// A landscape behind a query counter. Every `evaluate` call is one query.
pub struct FitnessOracle {
    landscape: Arc<dyn Landscape>,
    queries: AtomicU64,
}

impl FitnessOracle {
    pub fn new(landscape: Arc<dyn Landscape>) -> Self {
        FitnessOracle {
            landscape,
            queries: AtomicU64::new(0),
        }
    }

    pub fn evaluate(&self, x: &Sequence) -> Result<f64, LandscapeError> {
        self.queries.fetch_add(1, Ordering::SeqCst);
        self.landscape.fitness(x)
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::SeqCst)
    }

    pub fn landscape(&self) -> &Arc<dyn Landscape> {
        &self.landscape
    }

    pub fn sequence_len(&self) -> usize {
        self.landscape.sequence_len()
    }
}

/// `sqrt(Var(D0) * 10^(-snr_db / 10))`.
pub fn noise_sigma(snr_db: f64, base_variance: f64) -> Result<f64, LandscapeError> {
    if !(base_variance >= 0.0) || !base_variance.is_finite() {
        return Err(LandscapeError::NegativeVariance(base_variance));
    }
    Ok((base_variance * 10f64.powf(-snr_db / 10.0)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyOracleConfig {
    pub snr_db: f64,
    pub base_variance: f64,
    pub seed: u64,
}

/// `max(0, f(x) + eps)` with `eps ~ N(0, sigma^2)` drawn fresh per query.
///
/// The noise for the `n`-th query comes from stream `(seed, n)`, so the
/// output sequence is reproducible as long as queries arrive in the same
/// order.
pub struct NoisyOracle {
    base: Arc<dyn Landscape>,
    sigma: f64,
    seed: u64,
    queries: AtomicU64,
}

impl NoisyOracle {
    pub fn new(base: Arc<dyn Landscape>, cfg: &NoisyOracleConfig) -> Result<Self, LandscapeError> {
        Ok(NoisyOracle {
            base,
            sigma: noise_sigma(cfg.snr_db, cfg.base_variance)?,
            seed: cfg.seed,
            queries: AtomicU64::new(0),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn evaluate(&self, x: &Sequence) -> Result<f64, LandscapeError> {
        let n = self.queries.fetch_add(1, Ordering::SeqCst);
        let y = self.base.fitness(x)?;
        let eps = if self.sigma > 0.0 {
            Normal::new(0.0, self.sigma)
                .expect("sigma is finite and positive")
                .sample(&mut stream(self.seed, &[n]))
        } else {
            0.0
        };
        Ok((y + eps).max(0.0))
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::SeqCst)
    }
}

/// An ensemble of noisy copies of the ground truth used in place of a
/// trained surrogate. Members draw independent noise.
pub struct NoisyEnsemble {
    members: Vec<NoisyOracle>,
    len: usize,
}

impl NoisyEnsemble {
    pub fn new(
        base: Arc<dyn Landscape>,
        snr_db: f64,
        base_variance: f64,
        members: usize,
        seed: u64,
    ) -> Result<Self, LandscapeError> {
        if members == 0 {
            return Err(LandscapeError::Invalid("noisy ensemble needs at least one member".into()));
        }
        let len = base.sequence_len();
        let members = (0..members as u64)
            .map(|m| {
                let cfg = NoisyOracleConfig {
                    snr_db,
                    base_variance,
                    seed: crate::rng::mix(seed, &[m]),
                };
                NoisyOracle::new(base.clone(), &cfg)
            })
            .collect::<Result<_, _>>()?;
        Ok(NoisyEnsemble { members, len })
    }

    pub fn members(&self) -> &[NoisyOracle] {
        &self.members
    }
}

impl Surrogate for NoisyEnsemble {
    fn sequence_len(&self) -> usize {
        self.len
    }

    fn predict_batch(&self, xs: &[Sequence]) -> Result<Vec<Prediction>, SurrogateError> {
        xs.iter()
            .map(|x| {
                check_len(self.len, x)?;
                let outputs = self
                    .members
                    .iter()
                    .map(|m| m.evaluate(x))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| SurrogateError::Other(e.to_string()))?;
                Ok(Prediction::from_members(&outputs))
            })
            .collect()
    }
}

/// A uniformly random sequence of length `len`.
pub fn random_sequence<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Sequence, SeqError> {
    Sequence::new(
        (0..len)
            .map(|_| AminoAcid::from_index(rng.random_range(0..ALPHABET_SIZE)).expect("index < 20"))
            .collect(),
    )
}

/// `x_start` plus `size - 1` distinct mutants carrying 1..=`max_mutations`
/// substitutions, labelled with the landscape directly (these labels do not
/// count against any oracle budget).
pub fn seed_dataset<R: Rng + ?Sized>(
    landscape: &dyn Landscape,
    x_start: &Sequence,
    size: usize,
    max_mutations: usize,
    rng: &mut R,
) -> Result<Dataset, LandscapeError> {
    if size == 0 {
        return Err(LandscapeError::Invalid("initial dataset size must be at least 1".into()));
    }
    let len = x_start.len();
    let max_mutations = max_mutations.min(len);
    if size > 1 && max_mutations == 0 {
        return Err(LandscapeError::ExhaustedSpace { wanted: size, found: 1 });
    }
    let mut data = Dataset::new();
    let mut seen: HashSet<Sequence> = HashSet::from([x_start.clone()]);
    data.push(x_start.clone(), landscape.fitness(x_start)?, 0)?;
    let max_attempts = 50 * size + 1000;
    let mut attempts = 0;
    while data.len() < size {
        if attempts == max_attempts {
            return Err(LandscapeError::ExhaustedSpace {
                wanted: size,
                found: data.len(),
            });
        }
        attempts += 1;
        let n = rng.random_range(1..=max_mutations);
        let mut x = x_start.clone();
        for p in sample(rng, len, n) {
            let old = x_start.residues()[p].index();
            // one of the 19 other residues
            let new = (old + rng.random_range(1..ALPHABET_SIZE)) % ALPHABET_SIZE;
            x.set(p, AminoAcid::from_index(new).expect("index < 20"))?;
        }
        if seen.insert(x.clone()) {
            let y = landscape.fitness(&x)?;
            data.push(x, y, 0)?;
        }
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::hamming;

    fn s(x: &str) -> Sequence {
        parse_sequence(x).unwrap()
    }

    #[test]
    fn nk_k0_is_mean_of_site_tables() {
        let nk = NkLandscape::new(2, 0, 5).unwrap();
        let x = s("AA");
        let expected = (unit_hash(5, &[0, 0]) + unit_hash(5, &[1, 0])) / 2.0;
        assert_eq!(nk.fitness(&x).unwrap(), expected);
    }

    #[test]
    fn nk_k0_equals_additive() {
        let nk = NkLandscape::new(12, 0, 9).unwrap();
        let add = nk.to_additive().unwrap();
        let mut rng = stream(1, &[]);
        for _ in 0..1000 {
            let x = random_sequence(12, &mut rng).unwrap();
            assert!((nk.fitness(&x).unwrap() - add.fitness(&x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn nk_is_deterministic() {
        let a = NkLandscape::new(20, 3, 4).unwrap();
        let b = NkLandscape::new(20, 3, 4).unwrap();
        let mut rng = stream(2, &[]);
        for _ in 0..100 {
            let x = random_sequence(20, &mut rng).unwrap();
            assert_eq!(a.fitness(&x).unwrap(), b.fitness(&x).unwrap());
        }
    }

    #[test]
    fn nk_full_epistasis_moves_every_site() {
        let len = 6;
        let nk = NkLandscape::new(len, len - 1, 3).unwrap();
        let x = s("ACDEFG");
        let mut y = x.clone();
        y.set(2, AminoAcid::from_char('W').unwrap()).unwrap();
        for i in 0..len {
            assert_ne!(nk.contribution(i, &x), nk.contribution(i, &y), "site {i}");
        }
        for (i, n) in nk.neighbors().iter().enumerate() {
            assert_eq!(n.len(), len - 1);
            assert!(!n.contains(&i));
        }
    }

    #[test]
    fn nk_rejects_bad_k() {
        assert!(matches!(NkLandscape::new(4, 4, 0), Err(LandscapeError::InvalidK { .. })));
    }

    #[test]
    fn additive_optimum_is_per_site_argmax() {
        let add = AdditiveLandscape::random(8, 1).unwrap();
        let (best, y) = add.optimum().unwrap();
        assert_eq!(add.fitness(&best).unwrap(), y);
        let mut rng = stream(3, &[]);
        for _ in 0..500 {
            let x = random_sequence(8, &mut rng).unwrap();
            assert!(add.fitness(&x).unwrap() <= y);
        }
    }

    #[test]
    fn table_lookup_and_errors() {
        let t = TableLandscape::from_csv("sequence,fitness\nAA,1.0\nAC,2.0\n".as_bytes()).unwrap();
        assert_eq!(t.fitness(&s("AC")).unwrap(), 2.0);
        assert!(matches!(t.fitness(&s("AD")), Err(LandscapeError::UnknownSequence(_))));
        assert_eq!(t.optimum().unwrap().1, 2.0);
        let dup = TableLandscape::from_csv("sequence,fitness\nAA,1.0\nAA,3.0\n".as_bytes());
        assert!(matches!(dup, Err(LandscapeError::DuplicateKey { line: 3, .. })));
        let bad = TableLandscape::from_csv("sequence,fitness\nAA,x\n".as_bytes());
        assert!(matches!(bad, Err(LandscapeError::Parse { line: 2, .. })));
        let mixed = TableLandscape::from_csv("sequence,fitness\nAA,1\nAAA,2\n".as_bytes());
        assert!(matches!(mixed, Err(LandscapeError::Parse { line: 3, .. })));
    }

    #[test]
    fn oracle_counts_queries() {
        let oracle = FitnessOracle::new(Arc::new(AdditiveLandscape::random(3, 0).unwrap()));
        for _ in 0..7 {
            oracle.evaluate(&s("ACD")).unwrap();
        }
        assert_eq!(oracle.query_count(), 7);
    }

    #[test]
    fn noise_scale_formula() {
        assert_eq!(noise_sigma(0.0, 4.0).unwrap(), 2.0);
        assert!((noise_sigma(10.0, 1.0).unwrap() - 10f64.powf(-0.5)).abs() < 1e-12);
        assert!(noise_sigma(1e6, 5.0).unwrap() < 1e-100);
        assert!(noise_sigma(0.0, -1.0).is_err());
    }

    struct Constant(f64);

    impl Landscape for Constant {
        fn sequence_len(&self) -> usize {
            3
        }
        fn fitness(&self, _: &Sequence) -> Result<f64, LandscapeError> {
            Ok(self.0)
        }
    }

    #[test]
    fn noisy_oracle_truncates_and_matches_moments() {
        let cfg = |v| NoisyOracleConfig {
            snr_db: 0.0,
            base_variance: v,
            seed: 11,
        };
        let neg = NoisyOracle::new(Arc::new(Constant(-3.0)), &cfg(1e-4)).unwrap();
        assert_eq!(neg.evaluate(&s("AAA")).unwrap(), 0.0);

        let sigma = 0.5;
        let noisy = NoisyOracle::new(Arc::new(Constant(20.0)), &cfg(sigma * sigma)).unwrap();
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| noisy.evaluate(&s("AAA")).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se_mean = sigma / (n as f64).sqrt();
        let se_std = sigma / (2.0 * n as f64).sqrt();
        assert!((mean - 20.0).abs() < 3.0 * se_mean, "mean {mean}");
        assert!((var.sqrt() - sigma).abs() < 3.0 * se_std, "std {}", var.sqrt());
        assert_eq!(noisy.query_count(), n as u64);
    }

    #[test]
    fn high_snr_is_noise_free() {
        let add = Arc::new(AdditiveLandscape::random(3, 2).unwrap());
        let cfg = NoisyOracleConfig {
            snr_db: 400.0,
            base_variance: 1.0,
            seed: 0,
        };
        let noisy = NoisyOracle::new(add.clone(), &cfg).unwrap();
        let x = s("KLM");
        assert!((noisy.evaluate(&x).unwrap() - add.fitness(&x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn seeded_dataset_shape() {
        let add = AdditiveLandscape::random(10, 0).unwrap();
        let x0 = s("ACDEFGHIKL");
        let single = seed_dataset(&add, &x0, 1, 3, &mut stream(0, &[])).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.records()[0].fitness, add.fitness(&x0).unwrap());

        let d = seed_dataset(&add, &x0, 200, 3, &mut stream(1, &[])).unwrap();
        assert_eq!(d.len(), 200);
        let unique: HashSet<_> = d.sequences().collect();
        assert_eq!(unique.len(), 200);
        for x in d.sequences().skip(1) {
            let h = hamming(x, &x0).unwrap();
            assert!((1..=3).contains(&h));
        }
        // independent variance computation
        let ys = d.fitnesses();
        let m = ys.iter().sum::<f64>() / ys.len() as f64;
        let v = ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / ys.len() as f64;
        assert!((d.fitness_variance() - v).abs() < 1e-12);
    }

    #[test]
    fn seeded_dataset_exhaustion() {
        let add = AdditiveLandscape::random(1, 0).unwrap();
        // only 19 single mutants exist
        let r = seed_dataset(&add, &s("A"), 30, 1, &mut stream(0, &[]));
        assert!(matches!(r, Err(LandscapeError::ExhaustedSpace { found: 20, .. })));
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = LandscapeSpec::Nk {
            length: 50,
            k: 2,
            seed: 1,
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(text, r#"{"kind":"nk","length":50,"k":2,"seed":1}"#);
        let back: LandscapeSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.build().unwrap().sequence_len(), 50);
    }
}
