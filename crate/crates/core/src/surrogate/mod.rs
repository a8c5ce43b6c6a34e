//! Ensemble surrogate providing a predictive mean and spread, and the UCB score.

mod mlp;

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::rng::stream;
use crate::seq::{Sequence, ALPHABET_SIZE};

pub use mlp::Mlp;
use mlp::Adam;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("need at least {needed} records to fit, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("sequence length {got} does not match surrogate length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("surrogate failure: {0}")]
    Other(String),
}

/// Predictive mean and spread for one sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub std: f64,
}

impl Prediction {
    /// Mean and population standard deviation of member outputs.
    pub fn from_members(outputs: &[f64]) -> Prediction {
        let n = outputs.len();
        if n == 0 {
            return Prediction { mean: 0.0, std: 0.0 };
        }
        if outputs.iter().all(|&v| v == outputs[0]) {
            return Prediction {
                mean: outputs[0],
                std: 0.0,
            };
        }
        let mean = outputs.iter().sum::<f64>() / n as f64;
        let var = outputs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        Prediction {
            mean,
            std: var.sqrt(),
        }
    }

    pub fn ucb(&self, k: f64) -> f64 {
        ucb(self.mean, self.std, k)
    }
}

/// Upper confidence bound `mean + k * std`.
#[inline]
pub fn ucb(mean: f64, std: f64, k: f64) -> f64 {
    mean + k * std
}

/// Anything that scores complete sequences with a mean and an uncertainty.
pub trait Surrogate: Send + Sync {
    fn sequence_len(&self) -> usize;

    fn predict_batch(&self, xs: &[Sequence]) -> Result<Vec<Prediction>, SurrogateError>;

    fn predict(&self, x: &Sequence) -> Result<Prediction, SurrogateError> {
        Ok(self.predict_batch(std::slice::from_ref(x))?[0])
    }
}

pub(crate) fn check_len(expected: usize, x: &Sequence) -> Result<(), SurrogateError> {
    if x.len() != expected {
        return Err(SurrogateError::LengthMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

/// Surrogate backed by a plain function with zero uncertainty. Handy for
/// exact-landscape experiments and tests.
pub struct FnSurrogate<F> {
    len: usize,
    f: F,
}

impl<F> FnSurrogate<F>
where
    F: Fn(&Sequence) -> f64 + Send + Sync,
{
    pub fn new(len: usize, f: F) -> Self {
        FnSurrogate { len, f }
    }
}

impl<F> Surrogate for FnSurrogate<F>
where
    F: Fn(&Sequence) -> f64 + Send + Sync,
{
    fn sequence_len(&self) -> usize {
        self.len
    }

    fn predict_batch(&self, xs: &[Sequence]) -> Result<Vec<Prediction>, SurrogateError> {
        xs.iter()
            .map(|x| {
                check_len(self.len, x)?;
                Ok(Prediction {
                    mean: (self.f)(x),
                    std: 0.0,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub ensemble_size: usize,
    pub learning_rate: f64,
    pub l2_penalty: f64,
    pub batch_size: usize,
    pub max_updates: usize,
    pub validation_fraction: f64,
    pub patience: usize,
    pub hidden_width: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            ensemble_size: 3,
            learning_rate: 1e-4,
            l2_penalty: 1e-4,
            batch_size: 256,
            max_updates: 3000,
            validation_fraction: 0.10,
            patience: 10,
            hidden_width: 64,
            optimizer: Optimizer::Adam,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), SurrogateError> {
        let bad = |m: &str| Err(SurrogateError::InvalidConfig(m.into()));
        if self.ensemble_size < 2 {
            return bad("ensemble_size must be at least 2");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        if self.patience == 0 || self.batch_size == 0 || self.max_updates == 0 || self.hidden_width == 0 {
            return bad("patience, batch_size, max_updates and hidden_width must be positive");
        }
        if !(self.learning_rate > 0.0) || self.l2_penalty < 0.0 {
            return bad("learning_rate must be positive and l2_penalty non-negative");
        }
        Ok(())
    }
}

pub const MIN_TRAINING_RECORDS: usize = 10;

/// Trained ensemble of MLP members. Targets are standardised before
/// training; predictions are reported on the original scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateEnsemble {
    sequence_len: usize,
    config: TrainingConfig,
    target_mean: f64,
    target_scale: f64,
    members: Vec<Mlp>,
}

impl SurrogateEnsemble {
    pub fn members(&self) -> &[Mlp] {
        &self.members
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    /// True when the ensemble is the constant fallback for all-equal targets.
    pub fn is_degenerate(&self) -> bool {
        self.members.is_empty()
    }

    pub fn feature_length(&self) -> usize {
        self.sequence_len * ALPHABET_SIZE
    }

    /// Raw member outputs on the original fitness scale.
    pub fn member_outputs(&self, x: &Sequence) -> Result<Vec<f64>, SurrogateError> {
        check_len(self.sequence_len, x)?;
        let active: Vec<usize> = x.feature_indices().collect();
        Ok(self
            .members
            .iter()
            .map(|m| self.target_mean + self.target_scale * m.forward(&active))
            .collect())
    }

    pub fn save<W: Write>(&self, w: W) -> Result<(), SurrogateError> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            sequence_len: self.sequence_len,
            target_mean: self.target_mean,
            target_scale: self.target_scale,
            config: self.config.clone(),
            members: self
                .members
                .iter()
                .map(|m| MemberWeights {
                    hidden: m.hidden(),
                    params: m.params().to_vec(),
                })
                .collect(),
        };
        serde_json::to_writer(w, &ck).map_err(|e| SurrogateError::Checkpoint(e.to_string()))
    }

    pub fn load<R: Read>(r: R) -> Result<Self, SurrogateError> {
        let ck: Checkpoint =
            serde_json::from_reader(r).map_err(|e| SurrogateError::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(SurrogateError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        let input_len = ck.sequence_len * ALPHABET_SIZE;
        let members = ck
            .members
            .into_iter()
            .map(|m| {
                Mlp::from_params(input_len, m.hidden, m.params)
                    .ok_or_else(|| SurrogateError::Checkpoint("weight array has wrong length".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SurrogateEnsemble {
            sequence_len: ck.sequence_len,
            config: ck.config,
            target_mean: ck.target_mean,
            target_scale: ck.target_scale,
            members,
        })
    }
}

impl Surrogate for SurrogateEnsemble {
    fn sequence_len(&self) -> usize {
        self.sequence_len
    }

    fn predict_batch(&self, xs: &[Sequence]) -> Result<Vec<Prediction>, SurrogateError> {
        xs.iter()
            .map(|x| {
                let outputs = self.member_outputs(x)?;
                Ok(if self.is_degenerate() {
                    Prediction {
                        mean: self.target_mean,
                        std: 0.0,
                    }
                } else {
                    Prediction::from_members(&outputs)
                })
            })
            .collect()
    }
}

const CHECKPOINT_FORMAT: &str = "prospero-ensemble";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    sequence_len: usize,
    target_mean: f64,
    target_scale: f64,
    config: TrainingConfig,
    members: Vec<MemberWeights>,
}

#[derive(Serialize, Deserialize)]
struct MemberWeights {
    hidden: usize,
    params: Vec<f64>,
}

type Example = (Vec<usize>, f64);

/// Trains the ensemble on `data`.
///
/// The data is shuffled with `cfg.seed` and the trailing
/// `validation_fraction` held out. Member `m` trains on a bootstrap resample
/// of the rest with seed `cfg.seed + m`, checking validation loss once per
/// epoch and keeping its best weights.
pub fn fit(data: &Dataset, cfg: &TrainingConfig) -> Result<SurrogateEnsemble, SurrogateError> {
    cfg.validate()?;
    if data.len() < MIN_TRAINING_RECORDS {
        return Err(SurrogateError::InsufficientData {
            needed: MIN_TRAINING_RECORDS,
            got: data.len(),
        });
    }
    let sequence_len = data.sequence_len().unwrap_or(0);
    let ys = data.fitnesses();
    let n = ys.len() as f64;
    let target_mean = ys.iter().sum::<f64>() / n;
    let target_scale = (ys.iter().map(|y| (y - target_mean).powi(2)).sum::<f64>() / n).sqrt();

    if ys.iter().all(|&y| y == ys[0]) {
        log::warn!("all {} training targets are equal; using a constant surrogate", ys.len());
        return Ok(SurrogateEnsemble {
            sequence_len,
            config: cfg.clone(),
            target_mean: ys[0],
            target_scale: 0.0,
            members: Vec::new(),
        });
    }

    let mut examples: Vec<Example> = data
        .records()
        .iter()
        .map(|r| {
            (
                r.sequence.feature_indices().collect(),
                (r.fitness - target_mean) / target_scale,
            )
        })
        .collect();
    examples.shuffle(&mut stream(cfg.seed, &[0x5eed]));
    let n_val = ((examples.len() as f64 * cfg.validation_fraction).round() as usize)
        .clamp(1, examples.len() - 1);
    let (train, val) = examples.split_at(examples.len() - n_val);

    let input_len = sequence_len * ALPHABET_SIZE;
    let members = (0..cfg.ensemble_size)
        .map(|m| train_member(train, val, input_len, sequence_len, cfg, cfg.seed + m as u64))
        .collect();

    Ok(SurrogateEnsemble {
        sequence_len,
        config: cfg.clone(),
        target_mean,
        target_scale,
        members,
    })
}

fn train_member(
    train: &[Example],
    val: &[Example],
    input_len: usize,
    active_per_input: usize,
    cfg: &TrainingConfig,
    seed: u64,
) -> Mlp {
    let mut rng = stream(seed, &[]);
    let mut net = Mlp::new(input_len, cfg.hidden_width, active_per_input, &mut rng);
    let mut order: Vec<usize> = (0..train.len()).map(|_| rng.random_range(0..train.len())).collect();
    let val_batch: Vec<(&[usize], f64)> = val.iter().map(|(x, y)| (x.as_slice(), *y)).collect();

    let mut grad = vec![0.0; net.params().len()];
    let mut adam = Adam::new(grad.len());
    let mut best = (net.loss(&val_batch, 0.0), net.params().to_vec());
    let mut stale = 0;
    let mut updates = 0;
    let mut batch: Vec<(&[usize], f64)> = Vec::with_capacity(cfg.batch_size);

    'epochs: loop {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| (train[i].0.as_slice(), train[i].1)));
            net.loss_and_gradient(&batch, cfg.l2_penalty, &mut grad);
            match cfg.optimizer {
                Optimizer::Adam => adam.step(net.params_mut(), &grad, cfg.learning_rate),
                Optimizer::Sgd => {
                    for (p, g) in net.params_mut().iter_mut().zip(&grad) {
                        *p -= cfg.learning_rate * g;
                    }
                }
            }
            updates += 1;
            if updates >= cfg.max_updates {
                break 'epochs;
            }
        }
        let loss = net.loss(&val_batch, 0.0);
        if loss < best.0 {
            best = (loss, net.params().to_vec());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let loss = net.loss(&val_batch, 0.0);
    if loss < best.0 {
        best = (loss, net.params().to_vec());
    }
    net.params_mut().copy_from_slice(&best.1);
    log::debug!("member seed {seed}: {updates} updates, val loss {:.4}", best.0);
    net
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::{AminoAcid, Sequence};

    fn random_seq<R: Rng>(len: usize, rng: &mut R) -> Sequence {
        Sequence::new(
            (0..len)
                .map(|_| AminoAcid::from_index(rng.random_range(0..20)).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn ucb_examples() {
        assert_eq!(ucb(1.0, 0.5, 1.0), 1.5);
        assert!((ucb(1.0, 0.5, 0.1) - 1.05).abs() < 1e-15);
        assert_eq!(ucb(3.0, 0.0, 7.0), 3.0);
        assert!(ucb(1.0, 0.5, 0.2) > ucb(1.0, 0.5, 0.1));
    }

    #[test]
    fn member_statistics() {
        assert_eq!(
            Prediction::from_members(&[1.0, 1.0, 1.0]),
            Prediction { mean: 1.0, std: 0.0 }
        );
        let p = Prediction::from_members(&[0.0, 1.0, 2.0]);
        assert_eq!(p.mean, 1.0);
        assert!((p.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Prediction::from_members(&[0.1; 3]).std, 0.0);
    }

    #[test]
    fn constant_targets_give_constant_predictor() {
        let mut rng = stream(4, &[]);
        let mut d = Dataset::new();
        while d.len() < 20 {
            let x = random_seq(5, &mut rng);
            if !d.contains(&x) {
                d.push(x, 2.5, 0).unwrap();
            }
        }
        let ens = fit(&d, &TrainingConfig::default()).unwrap();
        assert!(ens.is_degenerate());
        let p = ens.predict(&random_seq(5, &mut rng)).unwrap();
        assert_eq!(p, Prediction { mean: 2.5, std: 0.0 });
    }

    #[test]
    fn too_little_data_is_rejected() {
        let mut rng = stream(4, &[]);
        let mut d = Dataset::new();
        for i in 0..9 {
            d.push(random_seq(5, &mut rng), i as f64, 0).unwrap();
        }
        assert!(matches!(
            fit(&d, &TrainingConfig::default()),
            Err(SurrogateError::InsufficientData { .. })
        ));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let c = TrainingConfig {
            validation_fraction: 1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = TrainingConfig {
            ensemble_size: 1,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn length_mismatch() {
        let s = FnSurrogate::new(3, |_| 0.0);
        let mut rng = stream(1, &[]);
        assert!(matches!(
            s.predict(&random_seq(4, &mut rng)),
            Err(SurrogateError::LengthMismatch { expected: 3, got: 4 })
        ));
    }
}
