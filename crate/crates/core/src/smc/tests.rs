use super::*;
use crate::prior::{ProfilePrior, UniformPrior};
use crate::seq::{parse_sequence, AminoAcid};
use crate::surrogate::FnSurrogate;

fn s(x: &str) -> Sequence {
    parse_sequence(x).unwrap()
}

fn cfg(b: usize, k: usize) -> SmcConfig {
    SmcConfig {
        particle_count_b: b,
        oracle_budget_k: k,
        audit: true,
        ..Default::default()
    }
}

const NO_EXCLUDE: &dyn Fn(&Sequence) -> bool = &|_| false;

#[test]
fn weight_examples() {
    let w = smc_weights(&[2.0, 2.0, 2.0], &[-1.0, -2.0, -3.0], &[1, 2, 3]).unwrap();
    for v in &w.values {
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }
    let w = smc_weights(&[2.0, 1.0], &[0.5f64.ln(), 0.0], &[1, 1]).unwrap();
    assert!((w.values[0] - 0.5).abs() < 1e-12 && (w.values[1] - 0.5).abs() < 1e-12);
    let w = smc_weights(&[-5.0, 1.0], &[0.0, 0.0], &[1, 1]).unwrap();
    assert!(w.values[0] < 1e-11 && (w.values[1] - 1.0).abs() < 1e-11);
    assert!((w.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn all_zero_weights_fall_back_to_uniform() {
    let w = smc_weights(&[1.0, 1.0], &[f64::NEG_INFINITY, f64::NEG_INFINITY], &[1, 2]).unwrap();
    assert!(w.uniform_fallback);
    assert_eq!(w.values, vec![0.5, 0.5]);
    assert!(smc_weights(&[f64::NAN], &[0.0], &[1]).is_err());
}

#[test]
fn one_hot_weights_clone_one_ancestor() {
    let mut rng = stream(0, &[]);
    let idx = resample_indices(&[0.0, 0.0, 1.0, 0.0], 4, &mut rng);
    assert_eq!(idx, vec![2, 2, 2, 2]);
}

#[test]
fn uniform_resampling_is_multinomial() {
    // Ancestor counts pooled over 200 repetitions of B draws are
    // Multinomial(200 B, 1/B); Pearson chi-square at alpha = 0.01.
    let b = 16;
    let weights = vec![1.0 / b as f64; b];
    let mut counts = vec![0.0f64; b];
    for rep in 0..200 {
        let idx = resample_indices(&weights, b, &mut stream(rep, &[9]));
        assert_eq!(idx.len(), b);
        for i in idx {
            counts[i] += 1.0;
        }
    }
    let expected = 200.0f64;
    let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    // 15 degrees of freedom
    assert!(chi2 < 30.578, "chi2 = {chi2}");
}

#[test]
fn complete_particle_rolls_out_to_itself() {
    let wt = s("ACDE");
    let p = Particle::new(MaskedSequence::unmasked(&wt), &wt).unwrap();
    let r = rollout_particle(&p, &UniformPrior, &wt, true, &mut stream(1, &[])).unwrap();
    assert_eq!(r.sequence, wt);
    assert_eq!(r.log_lik, 0.0);
}

#[test]
fn single_negative_site_rollout() {
    let wt = s("AEA");
    let p = Particle::new(MaskedSequence::mask(&wt, &[1]).unwrap(), &wt).unwrap();
    for seed in 0..50 {
        let r = rollout_particle(&p, &UniformPrior, &wt, true, &mut stream(seed, &[])).unwrap();
        assert!(matches!(r.sequence.residues()[1].to_char(), 'D' | 'E'));
        assert!((r.log_lik - (0.05f64).ln()).abs() < 1e-15);
    }
    // the original is untouched
    assert_eq!(p.filled(), 0);
    assert!(p.state().is_masked(1));
}

#[test]
fn forced_prior_rollout_is_deterministic() {
    let wt = s("KDGSW");
    let prior = ProfilePrior::one_hot(&wt);
    let p = Particle::new(MaskedSequence::mask(&wt, &[0, 1, 4]).unwrap(), &wt).unwrap();
    let out = rollout(&[p.clone(), p], &prior, &wt, true, 5).unwrap();
    for r in out {
        assert_eq!(r.sequence, wt);
        assert_eq!(r.log_lik, 0.0);
    }
}

#[test]
fn empty_masks_return_inputs() {
    let wt = s("ACDEFG");
    let batch = vec![MaskedSequence::unmasked(&wt); 4];
    let f = FnSurrogate::new(6, |_| 1.0);
    let out = constrained_smc(&batch, &wt, &UniformPrior, &f, &cfg(4, 3), SmcMode::default(), NO_EXCLUDE, &mut stream(0, &[])).unwrap();
    assert!(out.trace.is_empty());
    assert_eq!(out.candidates.len(), 1);
    assert_eq!(out.candidates[0].sequence, wt);
}

#[test]
fn population_size_and_constraints_hold() {
    let wt = s("MKTAYIAKQRQISFVKSHFSRQLEERLGLIEVQ");
    let positions = [1usize, 4, 9, 13, 18, 22, 25];
    let batch: Vec<MaskedSequence> = (0..32)
        .map(|i| MaskedSequence::mask(&wt, &positions[..1 + i % positions.len()]).unwrap())
        .collect();
    let f = FnSurrogate::new(wt.len(), |x| x.iter().map(|a| a.index() as f64).sum::<f64>());
    let out = constrained_smc(&batch, &wt, &UniformPrior, &f, &cfg(32, 20), SmcMode::default(), NO_EXCLUDE, &mut stream(3, &[])).unwrap();
    assert_eq!(out.population.len(), 32);
    assert_eq!(out.trace.len(), positions.len());
    for p in &out.population {
        assert!(p.is_complete());
        assert!(p.filled() <= p.mask_budget());
        assert!(p.log_lik() <= 0.0);
    }
    assert_eq!(out.candidates.len(), 20);
    let unique: HashSet<_> = out.candidates.iter().map(|c| c.sequence.clone()).collect();
    assert_eq!(unique.len(), 20);
    for c in &out.candidates {
        for &pos in &positions {
            assert_eq!(c.sequence.residues()[pos].charge_class(), wt.residues()[pos].charge_class());
        }
    }
    assert!(out.candidates.windows(2).all(|w| w[0].score >= w[1].score));
}

#[test]
fn same_seed_same_output() {
    let wt = s("MKTAYIAKQRQISFVKSHFSRQ");
    let batch: Vec<MaskedSequence> = (0..8).map(|i| MaskedSequence::mask(&wt, &[i, i + 5, i + 10]).unwrap()).collect();
    let f = FnSurrogate::new(wt.len(), |x| x.iter().filter(|a| a.to_char() == 'L').count() as f64);
    let run = || constrained_smc(&batch, &wt, &UniformPrior, &f, &cfg(8, 5), SmcMode::default(), NO_EXCLUDE, &mut stream(11, &[])).unwrap();
    assert_eq!(run().candidates, run().candidates);
}

#[test]
fn excluded_sequences_are_skipped() {
    let wt = s("ACDEFG");
    let batch = vec![MaskedSequence::mask(&wt, &[0]).unwrap(); 4];
    let f = FnSurrogate::new(6, |_| 1.0);
    let excluded = |x: &Sequence| x.residues()[0] == AminoAcid::ALA;
    let out = constrained_smc(&batch, &wt, &UniformPrior, &f, &cfg(4, 100), SmcMode::default(), &excluded, &mut stream(0, &[])).unwrap();
    assert!(out.candidates.iter().all(|c| c.sequence.residues()[0] != AminoAcid::ALA));
    assert!(out.candidates.len() <= 4);
}

#[test]
fn unconstrained_mode_can_leave_class() {
    let wt = s("KKKKKKKK");
    let positions: Vec<usize> = (0..8).collect();
    let batch = vec![MaskedSequence::mask(&wt, &positions).unwrap(); 16];
    let f = FnSurrogate::new(8, |_| 1.0);
    let mode = SmcMode { resample: false, constrain: false };
    let out = constrained_smc(&batch, &wt, &UniformPrior, &f, &cfg(16, 50), mode, NO_EXCLUDE, &mut stream(2, &[])).unwrap();
    let off_class = out
        .candidates
        .iter()
        .flat_map(|c| c.sequence.iter())
        .filter(|a| a.charge_class() != ChargeClass::Positive)
        .count();
    assert!(off_class > 0);
}

#[test]
fn batch_size_must_match() {
    let wt = s("ACDEFG");
    let batch = vec![MaskedSequence::unmasked(&wt); 3];
    let f = FnSurrogate::new(6, |_| 1.0);
    assert!(matches!(
        constrained_smc(&batch, &wt, &UniformPrior, &f, &cfg(4, 3), SmcMode::default(), NO_EXCLUDE, &mut stream(0, &[])),
        Err(SmcError::BatchSize { .. })
    ));
}

#[test]
fn buffer_keeps_only_last_steps() {
    let wt = s("ACDEFGHIKL");
    let batch = vec![MaskedSequence::mask(&wt, &[0, 1, 2, 3, 4, 5]).unwrap(); 4];
    let f = FnSurrogate::new(10, |_| 1.0);
    let mut c = cfg(4, 1000);
    c.n_keep = 2;
    let out = constrained_smc(&batch, &wt, &UniformPrior, &f, &c, SmcMode::default(), NO_EXCLUDE, &mut stream(0, &[])).unwrap();
    assert_eq!(out.buffer_len, 2 * 4);
    assert!(out.candidates.iter().all(|r| r.step >= 5));
}

#[test]
fn inverse_perplexity_duality_on_rollouts() {
    let wt = s("KDGSWALEV");
    let corpus = [s("KDGSWALEV"), s("RDASWGLEV"), s("KEGTWALDI")];
    let prior = crate::prior::fit_profile_prior(&corpus, 0.5).unwrap();
    let p = Particle::new(MaskedSequence::mask(&wt, &[0, 2, 5, 7]).unwrap(), &wt).unwrap();
    for seed in 0..100 {
        let r = rollout_particle(&p, &prior, &wt, true, &mut stream(seed, &[])).unwrap();
        let inv = crate::prior::inverse_perplexity(r.log_lik, 4).unwrap();
        let perp = crate::prior::sequence_perplexity(r.log_lik, 4).unwrap();
        assert!((inv * perp - 1.0).abs() < 1e-9);
    }
}
