//! Choosing which residues of the starting sequence to mask.
//!
//! Targeted masking substitutes random subsets of positions with alanine,
//! scores every variant with the surrogate's UCB, and keeps the masks of the
//! top-scoring variants. Random masking draws masks the same way without
//! scoring.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seq::{AminoAcid, MaskedSequence, SeqError, Sequence};
use crate::surrogate::{Surrogate, SurrogateError};

#[derive(Debug, Error)]
pub enum MaskingError {
    #[error("surrogate expects length {expected}, starting sequence has {got}")]
    EnsembleLengthMismatch { expected: usize, got: usize },
    #[error("invalid masking config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Seq(#[from] SeqError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskingConfig {
    pub batch_b: usize,
    pub scans_s: usize,
    /// `None` picks 3 for L <= 120 and 5 otherwise.
    pub n_min: Option<usize>,
    /// `None` picks 10 for L <= 120 and 15 otherwise.
    pub n_max: Option<usize>,
    pub ucb_k: f64,
    pub seed: u64,
}

impl Default for MaskingConfig {
    fn default() -> Self {
        MaskingConfig {
            batch_b: 256,
            scans_s: 16,
            n_min: None,
            n_max: None,
            ucb_k: 1.0,
            seed: 0,
        }
    }
}

impl MaskingConfig {
    /// Substitution-count bounds for a sequence of length `len`, clamped to it.
    pub fn bounds(&self, len: usize) -> (usize, usize) {
        let (lo, hi) = if len <= 120 { (3, 10) } else { (5, 15) };
        let n_max = self.n_max.unwrap_or(hi.min(len));
        let n_min = self.n_min.unwrap_or(lo.min(n_max));
        (n_min, n_max)
    }

    /// Fills in the length-dependent bounds.
    pub fn resolved(&self, len: usize) -> Self {
        let (n_min, n_max) = self.bounds(len);
        MaskingConfig {
            n_min: Some(n_min),
            n_max: Some(n_max),
            ..self.clone()
        }
    }

    pub fn validate(&self, len: usize) -> Result<(), MaskingError> {
        let (n_min, n_max) = self.bounds(len);
        if n_min < 1 || n_min > n_max {
            return Err(MaskingError::InvalidConfig(format!(
                "need 1 <= n_min <= n_max, got {n_min}..{n_max}"
            )));
        }
        if n_max > len {
            return Err(MaskingError::InvalidConfig(format!(
                "n_max = {n_max} exceeds sequence length {len}"
            )));
        }
        if self.batch_b == 0 || self.scans_s == 0 {
            return Err(MaskingError::InvalidConfig("batch_b and scans_s must be positive".into()));
        }
        Ok(())
    }
}

/// One masked starting point for the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskProposal {
    pub masked: MaskedSequence,
    /// Sorted, 0-based.
    pub positions: Vec<usize>,
    /// UCB of the alanine variant, absent for random masks.
    pub score: Option<f64>,
}

/// Copy of `x` with alanine at every position in `positions`.
pub fn alanine_variant(x: &Sequence, positions: &[usize]) -> Result<Sequence, SeqError> {
    let mut out = x.clone();
    for &p in positions {
        out.set(p, AminoAcid::ALA)?;
    }
    Ok(out)
}

fn draw_positions<R: Rng + ?Sized>(len: usize, n_min: usize, n_max: usize, rng: &mut R) -> Vec<usize> {
    let n = rng.random_range(n_min..=n_max);
    let mut v = sample(rng, len, n).into_vec();
    v.sort_unstable();
    v
}

/// Keeps the masks of the `batch_b` best alanine variants out of
/// `batch_b * scans_s`. Equal scores keep generation order.
pub fn targeted_masking<R: Rng + ?Sized>(
    x_start: &Sequence,
    surrogate: &dyn Surrogate,
    cfg: &MaskingConfig,
    rng: &mut R,
) -> Result<Vec<MaskProposal>, MaskingError> {
    let len = x_start.len();
    if surrogate.sequence_len() != len {
        return Err(MaskingError::EnsembleLengthMismatch {
            expected: surrogate.sequence_len(),
            got: len,
        });
    }
    cfg.validate(len)?;
    let (n_min, n_max) = cfg.bounds(len);
    let pool = cfg.batch_b * cfg.scans_s;
    let masks: Vec<Vec<usize>> = (0..pool)
        .map(|_| draw_positions(len, n_min, n_max, rng))
        .collect();
    let variants = masks
        .iter()
        .map(|m| alanine_variant(x_start, m))
        .collect::<Result<Vec<_>, _>>()?;
    let scores: Vec<f64> = surrogate
        .predict_batch(&variants)?
        .iter()
        .map(|p| p.ucb(cfg.ucb_k))
        .collect();
    let keep = top_indices(&scores, cfg.batch_b);
    keep.into_iter()
        .map(|i| {
            Ok(MaskProposal {
                masked: MaskedSequence::mask(x_start, &masks[i])?,
                positions: masks[i].clone(),
                score: Some(scores[i]),
            })
        })
        .collect()
}

/// Indices of the `k` largest scores, best first; ties keep index order.
pub(crate) fn top_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx.truncate(k);
    idx
}

/// `batch_b` masks with uniformly random positions and no scoring.
pub fn random_masking<R: Rng + ?Sized>(
    x_start: &Sequence,
    cfg: &MaskingConfig,
    rng: &mut R,
) -> Result<Vec<MaskProposal>, MaskingError> {
    let len = x_start.len();
    cfg.validate(len)?;
    let (n_min, n_max) = cfg.bounds(len);
    (0..cfg.batch_b)
        .map(|_| {
            let positions = draw_positions(len, n_min, n_max, rng);
            Ok(MaskProposal {
                masked: MaskedSequence::mask(x_start, &positions)?,
                positions,
                score: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::seq::parse_sequence;
    use crate::surrogate::FnSurrogate;

    fn s(x: &str) -> Sequence {
        parse_sequence(x).unwrap()
    }

    fn cfg(b: usize, s: usize, lo: usize, hi: usize) -> MaskingConfig {
        MaskingConfig {
            batch_b: b,
            scans_s: s,
            n_min: Some(lo),
            n_max: Some(hi),
            ..Default::default()
        }
    }

    #[test]
    fn alanine_variant_examples() {
        assert_eq!(alanine_variant(&s("CDE"), &[]).unwrap(), s("CDE"));
        assert_eq!(alanine_variant(&s("CDE"), &[0, 2]).unwrap(), s("ADA"));
        assert_eq!(alanine_variant(&s("AAA"), &[1]).unwrap(), s("AAA"));
        assert!(alanine_variant(&s("AAA"), &[3]).is_err());
    }

    #[test]
    fn alanine_sites_stay_masked() {
        let wt = s("AAAAAAAAAA");
        let f = FnSurrogate::new(10, |_| 1.0);
        let out = targeted_masking(&wt, &f, &cfg(4, 2, 2, 2), &mut stream(0, &[])).unwrap();
        for p in &out {
            assert_eq!(p.masked.mask_set(), p.positions);
            assert_eq!(p.positions.len(), 2);
        }
    }

    #[test]
    fn single_variant_is_returned() {
        let wt = s("CDEFGHIKLM");
        let f = FnSurrogate::new(10, |_| -5.0);
        let out = targeted_masking(&wt, &f, &cfg(1, 1, 3, 3), &mut stream(1, &[])).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].positions.len(), 3);
    }

    #[test]
    fn constant_surrogate_keeps_generation_order() {
        let wt = s("CDEFGHIKLMNPQRST");
        let f = FnSurrogate::new(16, |_| 0.5);
        let c = cfg(5, 4, 2, 4);
        let out = targeted_masking(&wt, &f, &c, &mut stream(2, &[])).unwrap();
        // regenerate the pool with the same stream
        let mut rng = stream(2, &[]);
        let first: Vec<Vec<usize>> = (0..5).map(|_| draw_positions(16, 2, 4, &mut rng)).collect();
        let got: Vec<Vec<usize>> = out.iter().map(|p| p.positions.clone()).collect();
        assert_eq!(got, first);
    }

    #[test]
    fn unmasked_positions_equal_start() {
        let wt = s("MKTAYIAKQRQISFVKSHFSRQ");
        let f = FnSurrogate::new(wt.len(), |x| x.iter().filter(|a| a.to_char() == 'A').count() as f64);
        let out = targeted_masking(&wt, &f, &cfg(8, 4, 3, 6), &mut stream(3, &[])).unwrap();
        for p in &out {
            assert!((3..=6).contains(&p.positions.len()));
            for i in 0..wt.len() {
                if !p.positions.contains(&i) {
                    assert_eq!(p.masked.get(i), wt.get(i));
                }
            }
        }
    }

    #[test]
    fn errors() {
        let wt = s("CDE");
        let f = FnSurrogate::new(4, |_| 0.0);
        assert!(matches!(
            targeted_masking(&wt, &f, &cfg(1, 1, 1, 1), &mut stream(0, &[])),
            Err(MaskingError::EnsembleLengthMismatch { .. })
        ));
        let f = FnSurrogate::new(3, |_| 0.0);
        assert!(matches!(
            targeted_masking(&wt, &f, &cfg(1, 1, 1, 4), &mut stream(0, &[])),
            Err(MaskingError::InvalidConfig(_))
        ));
        assert!(random_masking(&wt, &cfg(1, 1, 2, 4), &mut stream(0, &[])).is_err());
    }

    #[test]
    fn default_bounds_depend_on_length() {
        let c = MaskingConfig::default();
        assert_eq!(c.bounds(100), (3, 10));
        assert_eq!(c.bounds(121), (5, 15));
        assert_eq!(c.bounds(4), (3, 4));
    }

    #[test]
    fn full_masks_at_extreme_bounds() {
        let wt = s("CDEFG");
        let out = random_masking(&wt, &cfg(3, 1, 5, 5), &mut stream(4, &[])).unwrap();
        assert_eq!(out.len(), 3);
        for p in &out {
            assert_eq!(p.masked.masked_count(), 5);
        }
    }

    #[test]
    fn random_positions_are_uniform() {
        let len = 10;
        let wt = s("CDEFGHIKLM");
        let out = random_masking(&wt, &cfg(10_000, 1, 1, 1), &mut stream(5, &[])).unwrap();
        let mut counts = vec![0.0; len];
        for p in &out {
            counts[p.positions[0]] += 1.0;
        }
        let expected = 10_000.0 / len as f64;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // chi-square, 9 dof, alpha = 0.01
        assert!(chi2 < 21.666, "chi2 = {chi2}");
    }

    #[test]
    fn selection_matches_full_sort() {
        let scores = [0.3, 0.9, 0.1, 0.9, 0.5];
        assert_eq!(top_indices(&scores, 3), vec![1, 3, 4]);
    }
}
