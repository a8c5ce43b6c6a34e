//! Charge-constrained sequential Monte Carlo over masked positions.
//!
//! Each particle is a partially masked copy of the starting sequence. At
//! every unmasking step an incomplete particle fills its next masked
//! position from the prior restricted to the wild-type charge class, then a
//! speculative rollout completes the rest so the surrogate can score it. The
//! weight of a particle is its clamped UCB score divided by the perplexity
//! of the unconstrained prior over its masked positions, and the whole
//! population is resampled multinomially. Rollouts from the last `n_keep`
//! steps are buffered; the best unique ones become oracle candidates.

pub mod posterior;

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prior::{constrained_sample, PriorError, SequencePrior};
use crate::rng::{mix, stream};
use crate::seq::{build_permutation, ChargeClass, MaskedSequence, Permutation, SeqError, Sequence};
use crate::surrogate::{Surrogate, SurrogateError};

/// Scores at or below zero are clamped to this before weighting.
pub const SCORE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SmcError {
    #[error("prior failure: {0}")]
    PriorFailure(#[from] PriorError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error("batch has {got} masked sequences, config expects {expected}")]
    BatchSize { expected: usize, got: usize },
    #[error("invalid SMC config: {0}")]
    InvalidConfig(String),
    #[error("charge constraint violated at position {position}: {residue} is not {expected:?}")]
    ConstraintViolation {
        position: usize,
        residue: char,
        expected: ChargeClass,
    },
    #[error("score {0} is not finite")]
    NonFiniteScore(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ResamplingScheme {
    #[default]
    Multinomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmcConfig {
    pub particle_count_b: usize,
    pub oracle_budget_k: usize,
    pub n_keep: usize,
    pub ucb_k: f64,
    pub resampling_scheme: ResamplingScheme,
    /// Check the charge constraint on every particle at every step.
    pub audit: bool,
    pub seed: u64,
}

impl Default for SmcConfig {
    fn default() -> Self {
        SmcConfig {
            particle_count_b: 256,
            oracle_budget_k: 128,
            n_keep: 10,
            ucb_k: 0.1,
            resampling_scheme: ResamplingScheme::Multinomial,
            audit: cfg!(debug_assertions),
            seed: 0,
        }
    }
}

impl SmcConfig {
    pub fn validate(&self) -> Result<(), SmcError> {
        if self.particle_count_b < 2 {
            return Err(SmcError::InvalidConfig("particle_count_b must be at least 2".into()));
        }
        if self.n_keep < 1 || self.oracle_budget_k < 1 {
            return Err(SmcError::InvalidConfig("n_keep and oracle_budget_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Switches used by the ablation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmcMode {
    /// Resample after every weighting step.
    pub resample: bool,
    /// Restrict proposals to the wild-type charge class.
    pub constrain: bool,
}

impl Default for SmcMode {
    fn default() -> Self {
        SmcMode {
            resample: true,
            constrain: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct CachedScore {
    score: f64,
    log_lik: f64,
}

/// One member of the population.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    state: MaskedSequence,
    order: Permutation,
    log_lik: f64,
    mask_budget: usize,
    filled: usize,
    cached: Option<CachedScore>,
}

impl Particle {
    pub fn new(masked: MaskedSequence, wild_type: &Sequence) -> Result<Self, SeqError> {
        let order = build_permutation(&masked, wild_type)?;
        let mask_budget = masked.masked_count();
        Ok(Particle {
            state: masked,
            order,
            log_lik: 0.0,
            mask_budget,
            filled: 0,
            cached: None,
        })
    }

    pub fn state(&self) -> &MaskedSequence {
        &self.state
    }

    pub fn permutation(&self) -> &Permutation {
        &self.order
    }

    /// Unconstrained log-likelihood of the residues proposed so far.
    pub fn log_lik(&self) -> f64 {
        self.log_lik
    }

    pub fn mask_budget(&self) -> usize {
        self.mask_budget
    }

    pub fn filled(&self) -> usize {
        self.filled
    }

    pub fn is_complete(&self) -> bool {
        self.filled >= self.mask_budget
    }

    fn next_position(&self) -> Option<usize> {
        self.order.masked_order().get(self.filled).copied()
    }

    /// Fills the next masked position. Returns whether the zero-mass
    /// fallback was used.
    fn propose<R: Rng + ?Sized>(
        &mut self,
        prior: &dyn SequencePrior,
        wild_type: &Sequence,
        constrain: bool,
        rng: &mut R,
    ) -> Result<bool, SmcError> {
        let Some(pos) = self.next_position() else {
            return Ok(false);
        };
        let class = constrain.then(|| wild_type.residues()[pos].charge_class());
        let draw = constrained_sample(prior, &self.state, pos, class, rng)?;
        self.state.fill(pos, draw.residue)?;
        self.log_lik += draw.log_prob;
        self.filled += 1;
        Ok(draw.fallback)
    }

    fn check_constraint(&self, wild_type: &Sequence) -> Result<(), SmcError> {
        for &pos in &self.order.masked_order()[..self.filled] {
            let expected = wild_type.residues()[pos].charge_class();
            let got = self.state.get(pos).expect("filled position");
            if got.charge_class() != expected {
                return Err(SmcError::ConstraintViolation {
                    position: pos + 1,
                    residue: got.to_char(),
                    expected,
                });
            }
        }
        Ok(())
    }
}

/// A completed speculative copy of a particle.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub sequence: Sequence,
    pub log_lik: f64,
    pub fallbacks: usize,
}

/// Completes `particle` in permutation order without touching it.
pub fn rollout_particle<R: Rng + ?Sized>(
    particle: &Particle,
    prior: &dyn SequencePrior,
    wild_type: &Sequence,
    constrain: bool,
    rng: &mut R,
) -> Result<Rollout, SmcError> {
    let mut copy = particle.clone();
    let mut fallbacks = 0;
    while !copy.is_complete() {
        fallbacks += copy.propose(prior, wild_type, constrain, rng)? as usize;
    }
    Ok(Rollout {
        sequence: copy.state.to_sequence()?,
        log_lik: copy.log_lik,
        fallbacks,
    })
}

/// Rolls out every particle, each on its own stream derived from `seed`.
pub fn rollout(
    particles: &[Particle],
    prior: &dyn SequencePrior,
    wild_type: &Sequence,
    constrain: bool,
    seed: u64,
) -> Result<Vec<Rollout>, SmcError> {
    particles
        .iter()
        .enumerate()
        .map(|(i, p)| rollout_particle(p, prior, wild_type, constrain, &mut stream(seed, &[i as u64])))
        .collect()
}

/// Normalised importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub values: Vec<f64>,
    /// Every weight was zero and the uniform fallback was used.
    pub uniform_fallback: bool,
}

impl Weights {
    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.values.iter().map(|w| w * w).sum::<f64>()
    }

    pub fn entropy(&self) -> f64 {
        -self
            .values
            .iter()
            .filter(|&&w| w > 0.0)
            .map(|w| w * w.ln())
            .sum::<f64>()
    }
}

/// `w_i ∝ max(score_i, floor) * exp(ll_i / budget_i)`, computed in log space.
/// A zero budget contributes a factor of one.
pub fn smc_weights(scores: &[f64], log_liks: &[f64], budgets: &[usize]) -> Result<Weights, SmcError> {
    let n = scores.len();
    assert!(log_liks.len() == n && budgets.len() == n, "weight inputs must align");
    let mut logw = Vec::with_capacity(n);
    for i in 0..n {
        if !scores[i].is_finite() {
            return Err(SmcError::NonFiniteScore(scores[i]));
        }
        let inv_ppl = if budgets[i] == 0 {
            0.0
        } else {
            log_liks[i] / budgets[i] as f64
        };
        logw.push(scores[i].max(SCORE_FLOOR).ln() + inv_ppl);
    }
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if n == 0 || max == f64::NEG_INFINITY || max.is_nan() {
        log::warn!("all SMC weights are zero; resampling uniformly");
        return Ok(Weights {
            values: vec![1.0 / n.max(1) as f64; n],
            uniform_fallback: true,
        });
    }
    let mut values: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = values.iter().sum();
    for v in &mut values {
        *v /= total;
    }
    Ok(Weights {
        values,
        uniform_fallback: false,
    })
}

/// `n` independent categorical draws of ancestor indices.
pub fn resample_indices<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cdf.push(acc);
    }
    let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(last)
        })
        .collect()
}

/// Multinomial resampling: the new population clones its ancestors whole.
pub fn resample<R: Rng + ?Sized>(particles: &[Particle], weights: &[f64], rng: &mut R) -> Vec<Particle> {
    resample_indices(weights, particles.len(), rng)
        .into_iter()
        .map(|i| particles[i].clone())
        .collect()
}

/// A buffered rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub sequence: Sequence,
    pub score: f64,
    pub step: usize,
}

/// Per-step diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub ess: f64,
    pub top_score: f64,
    pub weight_entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmcOutput {
    /// Best unique buffered rollouts, at most `oracle_budget_k`.
    pub candidates: Vec<RolloutRecord>,
    /// The population after the last step.
    pub population: Vec<Particle>,
    pub trace: Vec<StepTrace>,
    pub buffer_len: usize,
    /// Draws that hit the zero-mass class fallback.
    pub fallback_draws: usize,
    /// Steps whose weights were all zero.
    pub uniform_weight_steps: usize,
}

/// Runs the sampler on a batch of masked copies of `wild_type`.
///
/// `exclude` holds sequences that must not be returned as candidates
/// (typically everything already labelled).
#[allow(clippy::too_many_arguments)]
pub fn constrained_smc<R: Rng + ?Sized>(
    batch: &[MaskedSequence],
    wild_type: &Sequence,
    prior: &dyn SequencePrior,
    surrogate: &dyn Surrogate,
    cfg: &SmcConfig,
    mode: SmcMode,
    exclude: &dyn Fn(&Sequence) -> bool,
    rng: &mut R,
) -> Result<SmcOutput, SmcError> {
    cfg.validate()?;
    if batch.len() != cfg.particle_count_b {
        return Err(SmcError::BatchSize {
            expected: cfg.particle_count_b,
            got: batch.len(),
        });
    }
    let master = mix(rng.random(), &[cfg.seed]);
    let audit = cfg.audit && mode.constrain;
    let mut particles = batch
        .iter()
        .map(|m| Particle::new(m.clone(), wild_type))
        .collect::<Result<Vec<_>, _>>()?;
    let steps = particles.iter().map(|p| p.mask_budget).max().unwrap_or(0);

    let mut buffer: Vec<RolloutRecord> = Vec::new();
    let mut trace = Vec::with_capacity(steps);
    let mut fallback_draws = 0;
    let mut uniform_weight_steps = 0;

    if steps == 0 {
        let seqs = particles
            .iter()
            .map(|p| p.state.to_sequence())
            .collect::<Result<Vec<_>, _>>()?;
        let preds = surrogate.predict_batch(&seqs)?;
        for (sequence, p) in seqs.into_iter().zip(preds) {
            buffer.push(RolloutRecord {
                sequence,
                score: p.ucb(cfg.ucb_k),
                step: 0,
            });
        }
    }

    for t in 1..=steps {
        // Propose and roll out; complete particles reuse their cached score.
        let mut fresh: Vec<(usize, Rollout, bool)> = Vec::new();
        for (i, p) in particles.iter_mut().enumerate() {
            if !p.is_complete() {
                let (t, i) = (t as u64, i as u64);
                fallback_draws +=
                    p.propose(prior, wild_type, mode.constrain, &mut stream(master, &[t, i, 0]))? as usize;
                let r = rollout_particle(p, prior, wild_type, mode.constrain, &mut stream(master, &[t, i, 1]))?;
                fallback_draws += r.fallbacks;
                fresh.push((i as usize, r, true));
            } else if p.cached.is_none() {
                // nothing was masked in this particle
                let r = Rollout {
                    sequence: p.state.to_sequence()?,
                    log_lik: p.log_lik,
                    fallbacks: 0,
                };
                fresh.push((i, r, false));
            }
            if audit {
                p.check_constraint(wild_type)?;
            }
        }

        let seqs: Vec<Sequence> = fresh.iter().map(|(_, r, _)| r.sequence.clone()).collect();
        let preds = surrogate.predict_batch(&seqs)?;
        let mut current: Vec<Option<CachedScore>> = vec![None; particles.len()];
        for ((i, r, proposed), pred) in fresh.into_iter().zip(preds) {
            let score = pred.ucb(cfg.ucb_k);
            if !score.is_finite() {
                return Err(SmcError::NonFiniteScore(score));
            }
            let scored = CachedScore {
                score,
                log_lik: r.log_lik,
            };
            current[i] = Some(scored);
            if particles[i].is_complete() {
                particles[i].cached = Some(scored);
            }
            if proposed && steps - t < cfg.n_keep {
                buffer.push(RolloutRecord {
                    sequence: r.sequence,
                    score,
                    step: t,
                });
            }
        }
        let (scores, log_liks): (Vec<f64>, Vec<f64>) = particles
            .iter()
            .zip(&current)
            .map(|(p, c)| {
                let c = c.or(p.cached).expect("every particle is scored or cached");
                (c.score, c.log_lik)
            })
            .unzip();
        let budgets: Vec<usize> = particles.iter().map(|p| p.mask_budget).collect();
        let weights = smc_weights(&scores, &log_liks, &budgets)?;
        uniform_weight_steps += weights.uniform_fallback as usize;
        trace.push(StepTrace {
            step: t,
            ess: weights.effective_sample_size(),
            top_score: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            weight_entropy: weights.entropy(),
        });
        if mode.resample {
            particles = resample(&particles, &weights.values, &mut stream(master, &[t as u64, u64::MAX]));
        }
    }

    let buffer_len = buffer.len();
    let candidates = select_candidates(buffer, cfg.oracle_budget_k, exclude);
    if candidates.len() < cfg.oracle_budget_k {
        log::warn!(
            "rollout buffer yielded {} unique new candidates, fewer than K = {}",
            candidates.len(),
            cfg.oracle_budget_k
        );
    }
    Ok(SmcOutput {
        candidates,
        population: particles,
        trace,
        buffer_len,
        fallback_draws,
        uniform_weight_steps,
    })
}

/// Top-`k` buffered rollouts by score, unique and not excluded. Equal scores
/// keep buffer order.
pub fn select_candidates(
    mut buffer: Vec<RolloutRecord>,
    k: usize,
    exclude: &dyn Fn(&Sequence) -> bool,
) -> Vec<RolloutRecord> {
    buffer.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut seen = HashSet::new();
    buffer
        .into_iter()
        .filter(|r| !exclude(&r.sequence) && seen.insert(r.sequence.clone()))
        .take(k)
        .collect()
}

#[cfg(test)]
mod tests;
