//! The choice contract shared by human and simulated respondents, and the
//! Barker (Luce choice) oracle used in simulation.
//!
//! A respondent sees a current state and a proposal and picks one. Choosing
//! the proposal with probability `p(proposal) / (p(proposal) + p(current))`
//! makes the respondent a valid Metropolis-Hastings acceptance function for
//! the target `p` whenever the proposal kernel is symmetric.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::{mixture_log_density, validate_components, Component};
use crate::error::{Error, Result};
use crate::latent::LatentVector;
use crate::rng::keyed_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    KeepCurrent,
    AcceptProposal,
}

impl Choice {
    pub fn is_accept(self) -> bool {
        self == Choice::AcceptProposal
    }
}

/// Ground-truth category distribution standing in for a participant's
/// mental category. Shares its file schema with fitted mixture models, so a
/// model file can be loaded as a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDensity {
    pub category: String,
    pub components: Vec<Component>,
}

impl TargetDensity {
    pub fn new(category: impl Into<String>, components: Vec<Component>) -> Result<Self> {
        let target = TargetDensity {
            category: category.into(),
            components,
        };
        target.validate()?;
        Ok(target)
    }

    pub fn validate(&self) -> Result<()> {
        validate_components(&self.components, 0.0).map(|_| ())
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.dim())
    }

    pub fn log_density(&self, x: &LatentVector) -> Result<f64> {
        mixture_log_density(&self.components, x.values())
    }

    /// Component-weighted mean.
    pub fn mean(&self) -> LatentVector {
        let mut out = vec![0.0; self.dim()];
        for c in &self.components {
            for (o, m) in out.iter_mut().zip(c.mean.values()) {
                *o += c.weight * m;
            }
        }
        LatentVector(out)
    }

    /// Full covariance matrix (row-major, `dim x dim`) of the mixture.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mu = self.mean();
        let mut cov = vec![vec![0.0; d]; d];
        for c in &self.components {
            for i in 0..d {
                for j in 0..d {
                    let diag = if i == j { c.covariance[i] } else { 0.0 };
                    let di = c.mean.0[i] - mu.0[i];
                    let dj = c.mean.0[j] - mu.0[j];
                    cov[i][j] += c.weight * (diag + di * dj);
                }
            }
        }
        cov
    }

    /// Draws one exact sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LatentVector {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.components.last().expect("validated non-empty");
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                chosen = c;
                break;
            }
        }
        let values = chosen
            .mean
            .values()
            .iter()
            .zip(&chosen.covariance)
            .map(|(m, v)| m + v.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        LatentVector(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RespondentKind {
    SimulatedBarker,
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RespondentConfig {
    pub kind: RespondentKind,
    /// Probability that a decision is replaced by a fair coin flip.
    #[serde(default)]
    pub lapse_rate: f64,
}

impl Default for RespondentConfig {
    fn default() -> Self {
        RespondentConfig {
            kind: RespondentKind::SimulatedBarker,
            lapse_rate: 0.0,
        }
    }
}

impl RespondentConfig {
    pub fn human() -> Self {
        RespondentConfig {
            kind: RespondentKind::Human,
            lapse_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.lapse_rate) {
            return Err(Error::config("respondent.lapse_rate", "must lie in [0, 0.5]"));
        }
        Ok(())
    }
}

/// Barker acceptance probability from raw densities.
///
/// Computed through logs so it is invariant under common scaling; both-zero
/// (or both-infinite) inputs give 0.5.
pub fn barker_probability(p_proposal: f64, p_current: f64) -> Result<f64> {
    if p_proposal.is_nan() || p_current.is_nan() {
        return Err(Error::Domain("density is NaN".into()));
    }
    if p_proposal < 0.0 || p_current < 0.0 {
        return Err(Error::Domain("density is negative".into()));
    }
    Ok(barker_probability_log(p_proposal.ln(), p_current.ln()))
}

/// Barker acceptance probability from log densities: the logistic function
/// of their difference.
pub fn barker_probability_log(log_p_proposal: f64, log_p_current: f64) -> f64 {
    let d = log_p_current - log_p_proposal;
    if d.is_nan() {
        // both -inf or both +inf
        return 0.5;
    }
    if d > 0.0 {
        let e = (-d).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + d.exp())
    }
}

/// Barker decision with an optional lapse to a fair coin.
pub fn simulated_decide<R: Rng + ?Sized>(
    current: &LatentVector,
    proposal: &LatentVector,
    target: &TargetDensity,
    config: &RespondentConfig,
    rng: &mut R,
) -> Result<Choice> {
    let log_current = target.log_density(current)?;
    let log_proposal = target.log_density(proposal)?;
    let accept = barker_probability_log(log_proposal, log_current);
    let lapse = rng.random::<f64>() < config.lapse_rate;
    let accepted = if lapse {
        rng.random::<f64>() < 0.5
    } else {
        rng.random::<f64>() < accept
    };
    Ok(if accepted {
        Choice::AcceptProposal
    } else {
        Choice::KeepCurrent
    })
}

/// What a respondent is shown on one trial.
#[derive(Debug, Clone, Copy)]
pub struct ChoicePrompt<'a> {
    pub chain_id: &'a str,
    pub category: &'a str,
    pub index_in_chain: u64,
    pub current: &'a LatentVector,
    pub proposal: &'a LatentVector,
}

/// Anything that can answer a two-alternative forced choice.
pub trait Respondent {
    fn decide(&mut self, prompt: &ChoicePrompt<'_>) -> Result<Choice>;
}

/// Simulated participant answering by the Barker rule for each category's
/// target density.
///
/// Randomness for each decision comes from a stream keyed by chain and trial
/// index, so decisions do not depend on the order trials are answered in.
#[derive(Debug, Clone)]
pub struct BarkerOracle {
    targets: BTreeMap<String, TargetDensity>,
    config: RespondentConfig,
    seed: u64,
}

impl BarkerOracle {
    pub fn new(
        targets: impl IntoIterator<Item = TargetDensity>,
        config: RespondentConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut map = BTreeMap::new();
        for t in targets {
            t.validate()?;
            map.insert(t.category.clone(), t);
        }
        Ok(BarkerOracle {
            targets: map,
            config,
            seed,
        })
    }

    pub fn target(&self, category: &str) -> Result<&TargetDensity> {
        self.targets
            .get(category)
            .ok_or_else(|| Error::NotFound(format!("no target density for category `{category}`")))
    }

    pub fn targets(&self) -> impl Iterator<Item = &TargetDensity> {
        self.targets.values()
    }
}

impl Respondent for BarkerOracle {
    fn decide(&mut self, prompt: &ChoicePrompt<'_>) -> Result<Choice> {
        let target = self.target(prompt.category)?;
        let mut rng = keyed_rng(
            self.seed,
            &format!("respond/{}", prompt.chain_id),
            prompt.index_in_chain,
        );
        simulated_decide(prompt.current, prompt.proposal, target, &self.config, &mut rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::keyed_rng;
    use proptest::prelude::*;

    fn unimodal(dim: usize) -> TargetDensity {
        TargetDensity::new(
            "c",
            vec![Component::isotropic(1.0, LatentVector::zeros(dim), 0.25)],
        )
        .unwrap()
    }

    #[test]
    fn barker_examples() {
        assert_eq!(barker_probability(1.0, 1.0).unwrap(), 0.5);
        assert!((barker_probability(3.0, 1.0).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(barker_probability(0.0, 5.0).unwrap(), 0.0);
        assert_eq!(barker_probability(0.0, 0.0).unwrap(), 0.5);
        assert_eq!(barker_probability(f64::INFINITY, 2.0).unwrap(), 1.0);
        assert!(barker_probability(-1.0, 1.0).is_err());
        assert!(barker_probability(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn underflowing_densities_are_indifferent() {
        assert_eq!(barker_probability(1e-320 * 1e-10, 0.0).unwrap(), 0.5);
        assert_eq!(barker_probability_log(f64::NEG_INFINITY, f64::NEG_INFINITY), 0.5);
    }

    proptest! {
        #[test]
        fn barker_complements(a in 1e-300f64..1e300, b in 1e-300f64..1e300) {
            let s = barker_probability(a, b).unwrap() + barker_probability(b, a).unwrap();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn barker_scale_invariant(a in 1e-100f64..1e100, b in 1e-100f64..1e100, k in 1e-50f64..1e50) {
            let base = barker_probability(a, b).unwrap();
            let scaled = barker_probability_log(a.ln() + k.ln(), b.ln() + k.ln());
            prop_assert!((base - scaled).abs() < 1e-12);
        }
    }

    #[test]
    fn dominant_proposal_is_accepted() {
        let target = unimodal(4);
        let proposal = LatentVector::zeros(4);
        let current = LatentVector(vec![3.0; 4]);
        let ratio = target.log_density(&proposal).unwrap() - target.log_density(&current).unwrap();
        assert!(ratio > (1e6f64).ln());
        let config = RespondentConfig::default();
        let mut rng = keyed_rng(1, "dominant", 0);
        let accepted = (0..10_000)
            .filter(|_| simulated_decide(&current, &proposal, &target, &config, &mut rng).unwrap().is_accept())
            .count();
        assert!(accepted as f64 / 1e4 > 0.999);
    }

    #[test]
    fn identical_states_are_a_coin_flip() {
        let target = unimodal(2);
        let z = LatentVector(vec![0.3, -0.1]);
        let mut rng = keyed_rng(2, "same", 0);
        let config = RespondentConfig::default();
        let accepted = (0..10_000)
            .filter(|_| simulated_decide(&z, &z, &target, &config, &mut rng).unwrap().is_accept())
            .count();
        let f = accepted as f64 / 1e4;
        assert!((f - 0.5).abs() < 0.02, "{f}");
    }

    #[test]
    fn lapse_mixes_with_coin() {
        let target = unimodal(2);
        let current = LatentVector(vec![0.0, 0.0]);
        let proposal = LatentVector(vec![0.5, 0.0]);
        let a = barker_probability_log(
            target.log_density(&proposal).unwrap(),
            target.log_density(&current).unwrap(),
        );
        let expected = 0.5 * 0.5 + 0.5 * a;
        let config = RespondentConfig {
            kind: RespondentKind::SimulatedBarker,
            lapse_rate: 0.5,
        };
        let mut rng = keyed_rng(3, "lapse", 0);
        let n = 20_000;
        let accepted = (0..n)
            .filter(|_| simulated_decide(&current, &proposal, &target, &config, &mut rng).unwrap().is_accept())
            .count();
        let f = accepted as f64 / n as f64;
        assert!((0.25..=0.75).contains(&f));
        assert!((f - expected).abs() < 0.015, "{f} vs {expected}");
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let target = unimodal(2);
        let mut rng = keyed_rng(0, "x", 0);
        let r = simulated_decide(
            &LatentVector::zeros(3),
            &LatentVector::zeros(3),
            &target,
            &RespondentConfig::default(),
            &mut rng,
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn lapse_rate_bounds() {
        let bad = RespondentConfig {
            kind: RespondentKind::SimulatedBarker,
            lapse_rate: 0.6,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mixture_moments() {
        let t = TargetDensity::new(
            "m",
            vec![
                Component::isotropic(0.5, LatentVector(vec![1.5, 0.0]), 1.0),
                Component::isotropic(0.5, LatentVector(vec![-1.5, 0.0]), 1.0),
            ],
        )
        .unwrap();
        assert_eq!(t.mean().0, vec![0.0, 0.0]);
        let c = t.covariance();
        assert!((c[0][0] - 3.25).abs() < 1e-12);
        assert!((c[1][1] - 1.0).abs() < 1e-12);
        assert_eq!(c[0][1], 0.0);
    }
}
