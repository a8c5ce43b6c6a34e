//! Surrogate-guided protein sequence design.
//!
//! A campaign alternates between fitting an ensemble surrogate to labelled
//! sequences, choosing positions to rewrite with an alanine scan scored by
//! the surrogate, and refilling them with a sequential Monte Carlo sampler
//! that draws from a sequence prior, keeps every residue in the charge class
//! of the starting sequence, and favours completions the surrogate likes.
//!
//! ```
//! use std::sync::Arc;
//! use prospero::{run_campaign, CampaignConfig, FitnessOracle, UniformPrior};
//! use prospero::landscapes::{random_sequence, seed_dataset, AdditiveLandscape};
//! use prospero::rng::stream;
//!
//! let land = Arc::new(AdditiveLandscape::random(12, 0)?);
//! let wt = random_sequence(12, &mut stream(0, &[]))?;
//! let d0 = seed_dataset(land.as_ref(), &wt, 50, 2, &mut stream(1, &[]))?;
//! let mut cfg = CampaignConfig { rounds_n: 2, oracle_budget_k: 8, ..Default::default() };
//! cfg.smc.particle_count_b = 16;
//! cfg.surrogate.max_updates = 50;
//!
//! let result = run_campaign(&cfg, &FitnessOracle::new(land), &UniformPrior, d0)?;
//! assert!(result.oracle_queries <= 16);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```
//!
//! The guide under `book/` walks through each stage.

// `!(x > 0.0)` is how we reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod cli;
pub mod dataset;
pub mod landscapes;
pub mod masking;
pub mod prior;
pub mod rng;
pub mod seq;
pub mod smc;
pub mod surrogate;

pub use campaign::{run_campaign, CampaignConfig, CampaignResult};
pub use dataset::{Dataset, Record};
pub use landscapes::{FitnessOracle, Landscape};
pub use prior::{ExternalPrior, ProfilePrior, SequencePrior, UniformPrior};
pub use seq::{parse_sequence, AminoAcid, MaskedSequence, Sequence};
pub use surrogate::{Surrogate, SurrogateEnsemble};

// Book chapters are compiled as doc-tests so the snippets cannot rot.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/sequences.md")]
    mod sequences {}
    #[doc = include_str!("../../../book/src/priors.md")]
    mod priors {}
    #[doc = include_str!("../../../book/src/surrogate.md")]
    mod surrogate {}
    #[doc = include_str!("../../../book/src/masking.md")]
    mod masking {}
    #[doc = include_str!("../../../book/src/smc.md")]
    mod smc {}
    #[doc = include_str!("../../../book/src/landscapes.md")]
    mod landscapes {}
    #[doc = include_str!("../../../book/src/campaigns.md")]
    mod campaigns {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
