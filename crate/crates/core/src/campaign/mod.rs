//! The active-learning loop.
//!
//! Each round fits a surrogate on everything labelled so far, starts from
//! the best labelled sequence, picks masks by alanine scanning, fills them
//! with the constrained sampler, and spends up to `K` oracle queries on the
//! best new candidates.

pub mod metrics;
pub mod properties;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, Record};
use crate::landscapes::{FitnessOracle, LandscapeError, NoisyEnsemble};
use crate::masking::{random_masking, targeted_masking, MaskingConfig, MaskingError};
use crate::prior::SequencePrior;
use crate::rng::{mix, stream};
use crate::seq::{MaskedSequence, Sequence};
use crate::smc::{constrained_smc, SmcConfig, SmcError, SmcMode, StepTrace};
use crate::surrogate::{fit, Surrogate, SurrogateError, TrainingConfig};

pub use metrics::{metrics_report, MetricsError, MetricsReport};
pub use properties::{physicochemical, validity, PropertyVector};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("invalid campaign config: {0}")]
    InvalidConfig(String),
    #[error("initial dataset is empty")]
    EmptyDataset,
    #[error("oracle budget exceeded: {used} queries, budget {budget}")]
    BudgetExceeded { used: u64, budget: u64 },
    #[error(transparent)]
    Masking(#[from] MaskingError),
    #[error(transparent)]
    Smc(#[from] SmcError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

/// Components that the ablation variants switch off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    pub use_smc_resampling: bool,
    pub use_targeted_masking: bool,
    pub use_raa_constraint: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Variant::Full.ablation()
    }
}

/// The full method and its four reduced forms. Each variant removes one
/// more component than the last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    NoSmc,
    RandomMasking,
    NoSmcRandomMasking,
    NoSmcRandomMaskingNoRaa,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::NoSmc,
        Variant::RandomMasking,
        Variant::NoSmcRandomMasking,
        Variant::NoSmcRandomMaskingNoRaa,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoSmc => "no_smc",
            Variant::RandomMasking => "random_masking",
            Variant::NoSmcRandomMasking => "no_smc_random_masking",
            Variant::NoSmcRandomMaskingNoRaa => "no_smc_random_masking_no_raa",
        }
    }

    pub fn ablation(self) -> Ablation {
        let (smc, targeted, raa) = match self {
            Variant::Full => (true, true, true),
            Variant::NoSmc => (false, true, true),
            Variant::RandomMasking => (true, false, true),
            Variant::NoSmcRandomMasking => (false, false, true),
            Variant::NoSmcRandomMaskingNoRaa => (false, false, false),
        };
        Ablation {
            use_smc_resampling: smc,
            use_targeted_masking: targeted,
            use_raa_constraint: raa,
        }
    }
}

/// Replaces the trained surrogate with an ensemble of noisy copies of the
/// ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateNoise {
    pub snr_db: f64,
    pub members: usize,
}

impl Default for SurrogateNoise {
    fn default() -> Self {
        SurrogateNoise {
            snr_db: 60.0,
            members: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub rounds_n: usize,
    /// Oracle queries per round. Overrides `smc.oracle_budget_k`.
    pub oracle_budget_k: usize,
    /// `batch_b` is taken from `smc.particle_count_b`.
    pub masking: MaskingConfig,
    pub smc: SmcConfig,
    pub surrogate: TrainingConfig,
    pub surrogate_noise: Option<SurrogateNoise>,
    pub ablation: Ablation,
    pub seed: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            rounds_n: 10,
            oracle_budget_k: 128,
            masking: MaskingConfig::default(),
            smc: SmcConfig::default(),
            surrogate: TrainingConfig::default(),
            surrogate_noise: None,
            ablation: Ablation::default(),
            seed: 0,
        }
    }
}

impl CampaignConfig {
    /// Makes the coupled settings agree and fills length-dependent defaults.
    pub fn resolved(&self, len: usize) -> CampaignConfig {
        let mut c = self.clone();
        c.smc.oracle_budget_k = c.oracle_budget_k;
        c.masking.batch_b = c.smc.particle_count_b;
        c.masking = c.masking.resolved(len);
        c
    }

    pub fn validate(&self, len: usize) -> Result<(), CampaignError> {
        let c = self.resolved(len);
        c.masking.validate(len)?;
        c.smc.validate()?;
        if c.surrogate_noise.is_none() {
            c.surrogate.validate()?;
        }
        if let Some(n) = &c.surrogate_noise {
            if n.members == 0 || !n.snr_db.is_finite() {
                return Err(CampaignError::InvalidConfig(
                    "surrogate_noise needs members >= 1 and a finite snr_db".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub sequence: Sequence,
    /// Surrogate UCB at selection time.
    pub score: f64,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub x_start: Sequence,
    pub x_start_fitness: f64,
    /// Masked positions of each particle, 1-based.
    pub masks: Vec<Vec<usize>>,
    pub candidates: Vec<Candidate>,
    pub best_so_far: f64,
    pub oracle_queries: u64,
    /// Candidates whose residues leave the charge class of `x_start`.
    pub constraint_violations: usize,
    pub fallback_draws: usize,
    pub uniform_weight_steps: usize,
    pub smc_steps: Vec<StepTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub rounds: Vec<RoundTrace>,
    pub dataset: Dataset,
    pub report: MetricsReport,
    pub initial_best: f64,
    pub oracle_queries: u64,
    pub constraint_violations: usize,
}

impl CampaignResult {
    pub fn best_so_far(&self) -> Vec<f64> {
        std::iter::once(self.initial_best)
            .chain(self.rounds.iter().map(|r| r.best_so_far))
            .collect()
    }
}

// stream tags
const FIT: u64 = 1;
const MASK: u64 = 2;
const SMC: u64 = 3;
const NOISE: u64 = 4;

/// Positions where `x` leaves the charge class of `reference`.
pub fn charge_mismatches(x: &Sequence, reference: &Sequence) -> usize {
    x.iter()
        .zip(reference.iter())
        .filter(|(a, b)| a.charge_class() != b.charge_class())
        .count()
}

/// Runs `cfg.rounds_n` rounds starting from `initial`.
pub fn run_campaign(
    cfg: &CampaignConfig,
    oracle: &FitnessOracle,
    prior: &dyn SequencePrior,
    initial: Dataset,
) -> Result<CampaignResult, CampaignError> {
    let len = initial.sequence_len().ok_or(CampaignError::EmptyDataset)?;
    if oracle.sequence_len() != len {
        return Err(CampaignError::InvalidConfig(format!(
            "oracle length {} does not match dataset length {len}",
            oracle.sequence_len()
        )));
    }
    cfg.validate(len)?;
    let cfg = cfg.resolved(len);
    let base_variance = initial.fitness_variance();
    let initial_start = initial.best().expect("non-empty").clone();
    let reference: Vec<Sequence> = initial.sequences().cloned().collect();
    let queries_before = oracle.query_count();
    let mode = SmcMode {
        resample: cfg.ablation.use_smc_resampling,
        constrain: cfg.ablation.use_raa_constraint,
    };

    let mut data = initial;
    let mut rounds = Vec::with_capacity(cfg.rounds_n);
    for n in 1..=cfg.rounds_n {
        let round = n as u64;
        let surrogate: Box<dyn Surrogate> = match &cfg.surrogate_noise {
            Some(noise) => Box::new(NoisyEnsemble::new(
                oracle.landscape().clone(),
                noise.snr_db,
                base_variance,
                noise.members,
                mix(cfg.seed, &[round, NOISE]),
            )?),
            None => {
                let train = TrainingConfig {
                    seed: mix(cfg.seed, &[round, FIT, cfg.surrogate.seed]),
                    ..cfg.surrogate.clone()
                };
                Box::new(fit(&data, &train)?)
            }
        };

        let start: Record = data.best().expect("non-empty").clone();
        let mut mask_rng = stream(cfg.seed, &[round, MASK, cfg.masking.seed]);
        let proposals = if cfg.ablation.use_targeted_masking {
            targeted_masking(&start.sequence, surrogate.as_ref(), &cfg.masking, &mut mask_rng)?
        } else {
            random_masking(&start.sequence, &cfg.masking, &mut mask_rng)?
        };
        let batch: Vec<MaskedSequence> = proposals.iter().map(|p| p.masked.clone()).collect();

        let exclude = |x: &Sequence| data.contains(x);
        let out = constrained_smc(
            &batch,
            &start.sequence,
            prior,
            surrogate.as_ref(),
            &cfg.smc,
            mode,
            &exclude,
            &mut stream(cfg.seed, &[round, SMC, cfg.smc.seed]),
        )?;

        let mut candidates = Vec::with_capacity(out.candidates.len());
        let mut violations = 0;
        for c in out.candidates {
            if data.contains(&c.sequence) {
                continue;
            }
            violations += (charge_mismatches(&c.sequence, &start.sequence) > 0) as usize;
            let y = oracle.evaluate(&c.sequence)?;
            data.push(c.sequence.clone(), y, n)?;
            candidates.push(Candidate {
                sequence: c.sequence,
                score: c.score,
                fitness: y,
            });
        }
        let used = oracle.query_count() - queries_before;
        let budget = (n * cfg.oracle_budget_k) as u64;
        if used > budget {
            return Err(CampaignError::BudgetExceeded { used, budget });
        }
        let best_so_far = data.best().expect("non-empty").fitness;
        log::info!(
            "round {n}: {} candidates, best {:.4}, {} queries",
            candidates.len(),
            best_so_far,
            used
        );
        rounds.push(RoundTrace {
            round: n,
            x_start: start.sequence,
            x_start_fitness: start.fitness,
            masks: proposals
                .iter()
                .map(|p| p.positions.iter().map(|i| i + 1).collect())
                .collect(),
            candidates,
            best_so_far,
            oracle_queries: used,
            constraint_violations: violations,
            fallback_draws: out.fallback_draws,
            uniform_weight_steps: out.uniform_weight_steps,
            smc_steps: out.trace,
        });
    }

    let generated = data.since_round(1);
    let pool: Vec<&Record> = if generated.is_empty() {
        data.records().iter().collect()
    } else {
        generated
    };
    let report = metrics_report(&pool, &initial_start.sequence, Some(&reference))?;
    Ok(CampaignResult {
        constraint_violations: rounds.iter().map(|r| r.constraint_violations).sum(),
        oracle_queries: oracle.query_count() - queries_before,
        initial_best: initial_start.fitness,
        rounds,
        dataset: data,
        report,
    })
}

fn output_err(path: &Path, e: impl std::fmt::Display) -> CampaignError {
    CampaignError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes `trace.jsonl`, `rounds.csv`, `dataset.csv` and `report.json`.
pub fn write_outputs(dir: &Path, result: &CampaignResult) -> Result<(), CampaignError> {
    fs::create_dir_all(dir).map_err(|e| output_err(dir, e))?;

    let path = dir.join("trace.jsonl");
    let mut w = BufWriter::new(fs::File::create(&path).map_err(|e| output_err(&path, e))?);
    for r in &result.rounds {
        serde_json::to_writer(&mut w, r).map_err(|e| output_err(&path, e))?;
        writeln!(w).map_err(|e| output_err(&path, e))?;
    }
    w.flush().map_err(|e| output_err(&path, e))?;

    let path = dir.join("rounds.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| output_err(&path, e))?;
    w.write_record(["round", "x_start_fitness", "best_so_far", "evaluated", "oracle_queries"])
        .map_err(|e| output_err(&path, e))?;
    for r in &result.rounds {
        w.write_record([
            r.round.to_string(),
            r.x_start_fitness.to_string(),
            r.best_so_far.to_string(),
            r.candidates.len().to_string(),
            r.oracle_queries.to_string(),
        ])
        .map_err(|e| output_err(&path, e))?;
    }
    w.flush().map_err(|e| output_err(&path, e))?;

    let path = dir.join("dataset.csv");
    let file = fs::File::create(&path).map_err(|e| output_err(&path, e))?;
    result.dataset.write_csv(file)?;

    write_json(&dir.join("report.json"), &result.report)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CampaignError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| output_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| output_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::landscapes::{seed_dataset, AdditiveLandscape, Landscape, NkLandscape};
    use crate::prior::UniformPrior;
    use crate::seq::parse_sequence;

    fn small(seed: u64) -> CampaignConfig {
        CampaignConfig {
            rounds_n: 3,
            oracle_budget_k: 8,
            smc: SmcConfig {
                particle_count_b: 16,
                audit: true,
                ..Default::default()
            },
            masking: MaskingConfig {
                scans_s: 4,
                ..Default::default()
            },
            surrogate: TrainingConfig {
                max_updates: 50,
                hidden_width: 8,
                ..Default::default()
            },
            seed,
            ..Default::default()
        }
    }

    fn setup(len: usize) -> (Arc<dyn Landscape>, Dataset) {
        let land: Arc<dyn Landscape> = Arc::new(NkLandscape::new(len, 1, 3).unwrap());
        let x0 = crate::landscapes::random_sequence(len, &mut stream(1, &[])).unwrap();
        let d0 = seed_dataset(land.as_ref(), &x0, 40, 3, &mut stream(2, &[])).unwrap();
        (land, d0)
    }

    #[test]
    fn zero_rounds_make_no_queries() {
        let (land, d0) = setup(12);
        let oracle = FitnessOracle::new(land);
        let cfg = CampaignConfig {
            rounds_n: 0,
            ..small(0)
        };
        let res = run_campaign(&cfg, &oracle, &UniformPrior, d0.clone()).unwrap();
        assert_eq!(oracle.query_count(), 0);
        assert_eq!(res.report.pool_size, d0.len());
        assert_eq!(res.report.max_fitness, d0.best().unwrap().fitness);
    }

    #[test]
    fn budget_monotonicity_and_constraint() {
        let (land, d0) = setup(15);
        let oracle = FitnessOracle::new(land);
        let res = run_campaign(&small(4), &oracle, &UniformPrior, d0.clone()).unwrap();
        assert!(res.oracle_queries <= 3 * 8);
        assert_eq!(res.oracle_queries as usize, res.dataset.len() - d0.len());
        assert!(res.best_so_far().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(res.constraint_violations, 0);
        for r in &res.rounds {
            for c in &r.candidates {
                assert_eq!(charge_mismatches(&c.sequence, &r.x_start), 0);
            }
        }
    }

    #[test]
    fn same_seed_same_result() {
        let (land, d0) = setup(10);
        let run = |seed| {
            let oracle = FitnessOracle::new(land.clone());
            serde_json::to_string(&run_campaign(&small(seed), &oracle, &UniformPrior, d0.clone()).unwrap()).unwrap()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn noisy_surrogate_needs_no_training_data() {
        let land: Arc<dyn Landscape> = Arc::new(AdditiveLandscape::random(8, 0).unwrap());
        let x0 = parse_sequence("ACDEFGHI").unwrap();
        let d0 = seed_dataset(land.as_ref(), &x0, 3, 2, &mut stream(0, &[])).unwrap();
        let cfg = CampaignConfig {
            surrogate_noise: Some(SurrogateNoise::default()),
            ..small(1)
        };
        let oracle = FitnessOracle::new(land);
        let res = run_campaign(&cfg, &oracle, &UniformPrior, d0).unwrap();
        assert_eq!(res.rounds.len(), 3);
    }

    #[test]
    fn variants_compose() {
        assert_eq!(Variant::ALL.len(), 5);
        let iii = Variant::NoSmcRandomMasking.ablation();
        let (i, ii) = (Variant::NoSmc.ablation(), Variant::RandomMasking.ablation());
        assert_eq!(iii.use_smc_resampling, i.use_smc_resampling);
        assert_eq!(iii.use_targeted_masking, ii.use_targeted_masking);
        let iv = Variant::NoSmcRandomMaskingNoRaa.ablation();
        assert_eq!(
            iv,
            Ablation {
                use_raa_constraint: false,
                ..iii
            }
        );
        assert_eq!(
            iv,
            Ablation {
                use_smc_resampling: false,
                use_targeted_masking: false,
                use_raa_constraint: false
            }
        );
    }

    #[test]
    fn resolved_couples_settings() {
        let mut cfg = CampaignConfig::default();
        cfg.smc.particle_count_b = 32;
        cfg.oracle_budget_k = 7;
        let r = cfg.resolved(50);
        assert_eq!(r.masking.batch_b, 32);
        assert_eq!(r.smc.oracle_budget_k, 7);
        assert_eq!((r.masking.n_min, r.masking.n_max), (Some(3), Some(10)));
    }

    #[test]
    fn outputs_are_written() {
        let (land, d0) = setup(10);
        let oracle = FitnessOracle::new(land);
        let res = run_campaign(&small(2), &oracle, &UniformPrior, d0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_outputs(dir.path(), &res).unwrap();
        let trace = fs::read_to_string(dir.path().join("trace.jsonl")).unwrap();
        assert_eq!(trace.lines().count(), 3);
        let back = Dataset::read_csv(fs::File::open(dir.path().join("dataset.csv")).unwrap()).unwrap();
        assert_eq!(back.len(), res.dataset.len());
        let report: MetricsReport =
            serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(report.pool_size, res.report.pool_size);
        assert!((report.max_fitness - res.report.max_fitness).abs() < 1e-12);
    }
}
