//! Exact target distribution by enumeration, for checking the sampler.
//!
//! For a masked sequence the target over completions is
//! `gamma(x) = f(x) * P_RAA(x) / Z`, where `P_RAA(x)` is the product of the
//! class-restricted conditionals along the sampling order. Only feasible for
//! a handful of masked positions.

use crate::prior::{conditional_logprobs, ConstrainedConditional, SequencePrior};
use crate::seq::{build_permutation, AminoAcid, MaskedSequence, Sequence};

use super::SmcError;

pub const MAX_COMPLETIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    /// Completions with non-zero constrained prior mass and their normalised
    /// target probability, in enumeration order.
    pub support: Vec<(Sequence, f64)>,
    /// Normaliser from summing the flat enumeration.
    pub z: f64,
    /// Normaliser accumulated recursively down the enumeration tree.
    pub z_tree: f64,
}

impl Posterior {
    pub fn probability(&self, x: &Sequence) -> f64 {
        self.support
            .iter()
            .find(|(s, _)| s == x)
            .map_or(0.0, |(_, p)| *p)
    }
}

/// Enumerates every admissible completion of `masked`.
pub fn brute_force_posterior(
    score: &dyn Fn(&Sequence) -> f64,
    prior: &dyn SequencePrior,
    wild_type: &Sequence,
    masked: &MaskedSequence,
    constrain: bool,
) -> Result<Posterior, SmcError> {
    let perm = build_permutation(masked, wild_type)?;
    let order = perm.masked_order().to_vec();
    let size = order.iter().try_fold(1usize, |acc, &p| {
        let width = if constrain {
            wild_type.residues()[p].charge_class().members().len()
        } else {
            20
        };
        acc.checked_mul(width).filter(|&n| n <= MAX_COMPLETIONS)
    });
    if size.is_none() {
        return Err(SmcError::InvalidConfig(format!(
            "enumeration too large: more than {MAX_COMPLETIONS} completions"
        )));
    }

    let mut flat: Vec<(Sequence, f64)> = Vec::new();
    let mut state = masked.clone();
    let z_tree = descend(score, prior, wild_type, &order, constrain, &mut state, 1.0, &mut flat)?;
    let z: f64 = flat.iter().map(|(_, g)| g).sum();
    if !(z > 0.0) {
        return Err(SmcError::InvalidConfig("target has zero total mass".into()));
    }
    let support = flat.into_iter().map(|(x, g)| (x, g / z)).collect();
    Ok(Posterior { support, z, z_tree })
}

/// Returns the unnormalised mass under `state`, pushing each leaf.
#[allow(clippy::too_many_arguments)]
fn descend(
    score: &dyn Fn(&Sequence) -> f64,
    prior: &dyn SequencePrior,
    wild_type: &Sequence,
    order: &[usize],
    constrain: bool,
    state: &mut MaskedSequence,
    path_prob: f64,
    out: &mut Vec<(Sequence, f64)>,
) -> Result<f64, SmcError> {
    let Some((&pos, rest)) = order.split_first() else {
        let x = state.to_sequence()?;
        let f = score(&x);
        out.push((x, f * path_prob));
        return Ok(f);
    };
    let base = conditional_logprobs(prior, state, pos)?;
    let class = constrain.then(|| wild_type.residues()[pos].charge_class());
    let cond = ConstrainedConditional::new(&base, class);
    let mut total = 0.0;
    for aa in AminoAcid::all() {
        let p = cond.probabilities()[aa.index()];
        if p == 0.0 {
            continue;
        }
        state.fill(pos, aa)?;
        total += p * descend(score, prior, wild_type, rest, constrain, state, path_prob * p, out)?;
    }
    state.clear(pos)?;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::{ProfilePrior, UniformPrior};
    use crate::seq::{parse_sequence, ChargeClass};

    fn s(x: &str) -> Sequence {
        parse_sequence(x).unwrap()
    }

    #[test]
    fn flat_score_returns_constrained_prior() {
        let wt = s("GKDA");
        let masked = MaskedSequence::mask(&wt, &[1, 2]).unwrap();
        let post = brute_force_posterior(&|_| 2.0, &UniformPrior, &wt, &masked, true).unwrap();
        assert_eq!(post.support.len(), 3 * 2);
        for (_, p) in &post.support {
            assert!((p - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn one_hot_score_gives_point_mass() {
        let wt = s("AGA");
        let masked = MaskedSequence::mask(&wt, &[1]).unwrap();
        let g = AminoAcid::from_char('G').unwrap();
        let f = move |x: &Sequence| if x.residues()[1] == g { 1.0 } else { 0.0 };
        let post = brute_force_posterior(&f, &UniformPrior, &wt, &masked, true).unwrap();
        assert_eq!(post.support.len(), ChargeClass::Neutral.members().len());
        assert_eq!(post.probability(&s("AGA")), 1.0);
        assert_eq!(post.probability(&s("AAA")), 0.0);
    }

    #[test]
    fn normalisers_agree() {
        let wt = s("KDSTW");
        let masked = MaskedSequence::mask(&wt, &[0, 1, 3]).unwrap();
        let corpus = [s("KDSTW"), s("RESAW"), s("HDGTW")];
        let prior = crate::prior::fit_profile_prior(&corpus, 0.3).unwrap();
        let f = |x: &Sequence| 1.0 + x.residues().iter().map(|a| a.index() as f64).sum::<f64>() / 50.0;
        let post = brute_force_posterior(&f, &prior, &wt, &masked, true).unwrap();
        assert!((post.z - post.z_tree).abs() < 1e-12, "{} vs {}", post.z, post.z_tree);
        let total: f64 = post.support.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forced_prior_has_single_completion() {
        let wt = s("ACDE");
        let masked = MaskedSequence::mask(&wt, &[0, 3]).unwrap();
        let post = brute_force_posterior(&|_| 1.0, &ProfilePrior::one_hot(&wt), &wt, &masked, true).unwrap();
        assert_eq!(post.support, vec![(wt, 1.0)]);
    }

    #[test]
    fn refuses_huge_enumerations() {
        let wt = s("AAAAAAAA");
        let masked = MaskedSequence::mask(&wt, &[0, 1, 2, 3, 4, 5, 6]).unwrap();
        assert!(brute_force_posterior(&|_| 1.0, &UniformPrior, &wt, &masked, false).is_err());
    }
}
