//! Markov chain Monte Carlo with people over the latent space of a
//! generative model.
//!
//! Each trial shows a respondent two decoded images, the chain's current
//! latent state and a proposal, and asks which one better fits a category.
//! The respondent's choice is the acceptance step. Under the Barker/Luce
//! choice rule the chains sample the respondent's subjective category
//! distribution, which [`analysis`] then summarizes with means, diagonal
//! mixtures and discriminant projections.
//!
//! The crate holds the pieces end to end:
//!
//! - [`latent`] and [`proposal`]: spaces, boundary wrapping and the two-scale
//!   Gaussian proposal.
//! - [`respondent`]: the choice contract and the simulated Barker respondent.
//! - [`chain`]: chains, sessions, leases and the deterministic engine.
//! - [`service`]: the event-sourced experiment, replay, simulation and the
//!   HTTP API.
//! - [`gateway`]: latent-to-image decoding with a content-addressed cache.
//! - [`ci`]: the classification-image baseline.
//! - [`analysis`] and [`classify`]: density fits, projections and accuracy
//!   tables.
//!
//! Runnable walkthroughs live in `examples/`:
//!
//! | example | shows |
//! |---|---|
//! | `wrap_and_propose` | boundary rules and proposal scales |
//! | `barker_chain` | one chain against a known target |
//! | `session_protocol` | sessions, discard rollback, replay |
//! | `ci_baseline` | classification images |
//! | `density_and_lda` | mixtures, modes and projections |
//! | `classify_embeddings` | accuracy tables for MCMCP and CI |
//! | `procedural_decoder` | built-in decoder and image cache |
//! | `http_service` | the respondent API end to end |
//!
//! ```
//! use deep_mcmcp::chain::{acceptance_rate, run_chain, Chain};
//! use deep_mcmcp::latent::LatentSpace;
//! use deep_mcmcp::proposal::ProposalConfig;
//! use deep_mcmcp::respondent::{BarkerOracle, RespondentConfig};
//! use deep_mcmcp::synthetic::two_mode_target;
//!
//! let space = LatentSpace::unbounded("plane", 2)?;
//! let target = two_mode_target("pair", 1.5);
//! let mut oracle = BarkerOracle::new([target], RespondentConfig::default(), 7)?;
//! let mut chain = Chain::seeded("pair/0", "pair", &space, 7);
//! run_chain(&mut chain, &space, &ProposalConfig::single(0.7), &mut oracle, 1000)?;
//! assert_eq!(chain.states.len(), 1001);
//! assert!(acceptance_rate(&chain)? > 0.2);
//! # Ok::<(), deep_mcmcp::Error>(())
//! ```

pub mod analysis;
pub mod chain;
pub mod ci;
pub mod classify;
pub mod density;
pub mod error;
pub mod gateway;
pub mod latent;
pub mod proposal;
pub mod respondent;
pub mod rng;
pub mod samples;
pub mod service;
pub mod synthetic;

pub use error::{Error, Result};
