//! Generative priors over residues at masked positions.
//!
//! A prior answers one question: given a partially masked sequence, what is
//! the distribution over the 20 residues at one masked position? Everything
//! is kept in log space until a residue is actually drawn.

pub mod external;

use rand::Rng;
use thiserror::Error;

use crate::seq::{AminoAcid, ChargeClass, MaskedSequence, SeqError, Sequence, ALPHABET_SIZE};

pub use external::ExternalPrior;

pub type LogProbs = [f64; ALPHABET_SIZE];

/// Tolerance on `logsumexp(values)` for a conditional to count as normalised.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum PriorError {
    #[error("position {0} is not masked")]
    PositionNotMasked(usize),
    #[error("position {position} out of range for prior of length {len}")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("corpus sequences have mixed lengths ({0} vs {1})")]
    MixedLengths(usize, usize),
    #[error("malformed conditional: {0}")]
    Malformed(String),
    #[error("external prior unavailable: {0}")]
    ExternalPriorUnavailable(String),
    #[error("masked count must be at least 1")]
    ZeroMaskCount,
    #[error(transparent)]
    Seq(#[from] SeqError),
}

/// A conditional distribution over residues at a masked position.
pub trait SequencePrior: Send + Sync {
    fn name(&self) -> String;

    /// Unvalidated log-probabilities; use [`conditional_logprobs`] instead.
    fn raw_logprobs(&self, context: &MaskedSequence, position: usize) -> Result<LogProbs, PriorError>;
}

pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Rejects NaN, `+inf`, and distributions that do not sum to one.
pub fn validate_logprobs(values: &[f64]) -> Result<(), PriorError> {
    if values.len() != ALPHABET_SIZE {
        return Err(PriorError::Malformed(format!(
            "expected {ALPHABET_SIZE} values, got {}",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| v.is_nan() || **v == f64::INFINITY) {
        return Err(PriorError::Malformed(format!("invalid log-probability {v}")));
    }
    let lse = logsumexp(values);
    if !(lse.abs() <= NORMALIZATION_TOLERANCE) {
        return Err(PriorError::Malformed(format!(
            "logsumexp = {lse}, outside ±{NORMALIZATION_TOLERANCE}"
        )));
    }
    Ok(())
}

/// Validated conditional at a masked position.
pub fn conditional_logprobs(
    prior: &dyn SequencePrior,
    context: &MaskedSequence,
    position: usize,
) -> Result<LogProbs, PriorError> {
    if !context.is_masked(position) {
        return Err(PriorError::PositionNotMasked(position));
    }
    let v = prior.raw_logprobs(context, position)?;
    validate_logprobs(&v)?;
    Ok(v)
}

/// Same probability for every residue everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformPrior;

impl SequencePrior for UniformPrior {
    fn name(&self) -> String {
        "uniform".into()
    }

    fn raw_logprobs(&self, _: &MaskedSequence, _: usize) -> Result<LogProbs, PriorError> {
        Ok([-(ALPHABET_SIZE as f64).ln(); ALPHABET_SIZE])
    }
}

/// Position-specific residue frequencies, independent of context.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePrior {
    rows: Vec<LogProbs>,
}

impl ProfilePrior {
    /// Builds from per-position probability rows (normalised here).
    pub fn from_probabilities(rows: &[[f64; ALPHABET_SIZE]]) -> Result<Self, PriorError> {
        if rows.is_empty() {
            return Err(PriorError::EmptyCorpus);
        }
        let rows = rows
            .iter()
            .map(|row| {
                let total: f64 = row.iter().sum();
                if !(total > 0.0) || row.iter().any(|p| *p < 0.0 || !p.is_finite()) {
                    return Err(PriorError::Malformed("probability row must be non-negative with positive mass".into()));
                }
                Ok(row.map(|p| (p / total).ln()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ProfilePrior { rows })
    }

    /// Puts all mass on `x`'s residue at every position.
    pub fn one_hot(x: &Sequence) -> Self {
        let rows = x
            .iter()
            .map(|aa| {
                let mut row = [f64::NEG_INFINITY; ALPHABET_SIZE];
                row[aa.index()] = 0.0;
                row
            })
            .collect();
        ProfilePrior { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[LogProbs] {
        &self.rows
    }
}

impl SequencePrior for ProfilePrior {
    fn name(&self) -> String {
        "profile".into()
    }

    fn raw_logprobs(&self, _: &MaskedSequence, position: usize) -> Result<LogProbs, PriorError> {
        self.rows
            .get(position)
            .copied()
            .ok_or(PriorError::PositionOutOfRange {
                position,
                len: self.rows.len(),
            })
    }
}

/// Laplace-smoothed per-position frequencies: `(count + c) / (n + 20c)`.
pub fn fit_profile_prior<'a, I>(corpus: I, pseudocount: f64) -> Result<ProfilePrior, PriorError>
where
    I: IntoIterator<Item = &'a Sequence>,
{
    let mut counts: Vec<[f64; ALPHABET_SIZE]> = Vec::new();
    let mut n = 0usize;
    for x in corpus {
        if counts.is_empty() {
            counts = vec![[0.0; ALPHABET_SIZE]; x.len()];
        } else if x.len() != counts.len() {
            return Err(PriorError::MixedLengths(counts.len(), x.len()));
        }
        for (row, aa) in counts.iter_mut().zip(x.iter()) {
            row[aa.index()] += 1.0;
        }
        n += 1;
    }
    if n == 0 {
        return Err(PriorError::EmptyCorpus);
    }
    let denom = n as f64 + ALPHABET_SIZE as f64 * pseudocount;
    let rows: Vec<[f64; ALPHABET_SIZE]> = counts
        .iter()
        .map(|row| row.map(|c| (c + pseudocount) / denom))
        .collect();
    ProfilePrior::from_probabilities(&rows)
}

/// A base conditional renormalised over one charge class (or left alone
/// when `class` is `None`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedConditional {
    probs: [f64; ALPHABET_SIZE],
    class: Option<ChargeClass>,
    fallback: bool,
}

impl ConstrainedConditional {
    pub fn new(base: &LogProbs, class: Option<ChargeClass>) -> Self {
        let allowed = |i: usize| class.is_none_or(|c| c.contains(AminoAcid::from_index(i).unwrap()));
        let max = (0..ALPHABET_SIZE)
            .filter(|&i| allowed(i))
            .map(|i| base[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut probs = [0.0; ALPHABET_SIZE];
        let mut fallback = false;
        if max == f64::NEG_INFINITY {
            fallback = true;
            for (i, p) in probs.iter_mut().enumerate() {
                *p = if allowed(i) { 1.0 } else { 0.0 };
            }
        } else {
            for (i, p) in probs.iter_mut().enumerate() {
                *p = if allowed(i) { (base[i] - max).exp() } else { 0.0 };
            }
        }
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        ConstrainedConditional {
            probs,
            class,
            fallback,
        }
    }

    pub fn probabilities(&self) -> &[f64; ALPHABET_SIZE] {
        &self.probs
    }

    pub fn class(&self) -> Option<ChargeClass> {
        self.class
    }

    /// True when the base put no mass on the class and the uniform
    /// fallback over the class was used.
    pub fn used_fallback(&self) -> bool {
        self.fallback
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AminoAcid {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last = i;
                if u < acc {
                    return AminoAcid::from_index(i).unwrap();
                }
            }
        }
        AminoAcid::from_index(last).unwrap()
    }
}

/// One constrained draw with the unconstrained log-probability of the result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub residue: AminoAcid,
    pub log_prob: f64,
    pub fallback: bool,
}

/// Draws a residue for `position` from the prior restricted to `class`.
pub fn constrained_sample<R: Rng + ?Sized>(
    prior: &dyn SequencePrior,
    context: &MaskedSequence,
    position: usize,
    class: Option<ChargeClass>,
    rng: &mut R,
) -> Result<Draw, PriorError> {
    let base = conditional_logprobs(prior, context, position)?;
    let cond = ConstrainedConditional::new(&base, class);
    let residue = cond.sample(rng);
    Ok(Draw {
        residue,
        log_prob: base[residue.index()],
        fallback: cond.used_fallback(),
    })
}

/// `exp(-LL / |I|)` over the masked positions.
pub fn sequence_perplexity(total_log_lik: f64, masked_count: usize) -> Result<f64, PriorError> {
    if masked_count == 0 {
        return Err(PriorError::ZeroMaskCount);
    }
    Ok((-total_log_lik / masked_count as f64).exp())
}

/// `exp(LL / |I|)`, the reciprocal of [`sequence_perplexity`].
pub fn inverse_perplexity(total_log_lik: f64, masked_count: usize) -> Result<f64, PriorError> {
    if masked_count == 0 {
        return Err(PriorError::ZeroMaskCount);
    }
    Ok((total_log_lik / masked_count as f64).exp())
}
