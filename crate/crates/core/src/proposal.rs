//! Two-scale isotropic Gaussian proposal kernel.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{LatentSpace, LatentVector};

/// With probability `p_low` the whole step uses `sigma_low`, otherwise
/// `sigma_high`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    pub p_low: f64,
    pub sigma_low: f64,
    pub sigma_high: f64,
}

impl ProposalConfig {
    pub fn new(p_low: f64, sigma_low: f64, sigma_high: f64) -> Result<Self> {
        let config = ProposalConfig {
            p_low,
            sigma_low,
            sigma_high,
        };
        config.validate()?;
        Ok(config)
    }

    /// Face-category settings: 0.25 half of the time, 2 otherwise.
    pub fn faces() -> Self {
        ProposalConfig {
            p_low: 0.5,
            sigma_low: 0.25,
            sigma_high: 2.0,
        }
    }

    /// Object-category settings on the bounded latent: 0.1 with
    /// probability 0.6, 0.7 otherwise.
    pub fn objects() -> Self {
        ProposalConfig {
            p_low: 0.6,
            sigma_low: 0.1,
            sigma_high: 0.7,
        }
    }

    /// A single Gaussian of standard deviation `sigma`.
    pub fn single(sigma: f64) -> Self {
        ProposalConfig {
            p_low: 1.0,
            sigma_low: sigma,
            sigma_high: sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_low) {
            return Err(Error::config("proposal.p_low", "must lie in [0, 1]"));
        }
        if !(self.sigma_low.is_finite() && self.sigma_low > 0.0) {
            return Err(Error::config("proposal.sigma_low", "must be positive"));
        }
        if !(self.sigma_high.is_finite() && self.sigma_high > 0.0) {
            return Err(Error::config("proposal.sigma_high", "must be positive"));
        }
        if self.sigma_low > self.sigma_high {
            return Err(Error::config(
                "proposal.sigma_low",
                "must not exceed sigma_high",
            ));
        }
        Ok(())
    }

    /// Per-coordinate standard deviation of the (unwrapped) mixture step.
    pub fn mixture_std(&self) -> f64 {
        (self.p_low * self.sigma_low.powi(2) + (1.0 - self.p_low) * self.sigma_high.powi(2)).sqrt()
    }
}

/// Draws `current + eps` and applies the space's boundary transform.
pub fn propose<R: Rng + ?Sized>(
    current: &LatentVector,
    space: &LatentSpace,
    config: &ProposalConfig,
    rng: &mut R,
) -> Result<LatentVector> {
    space.check_state(current)?;
    let sigma = if rng.random::<f64>() < config.p_low {
        config.sigma_low
    } else {
        config.sigma_high
    };
    let raw = current
        .values()
        .iter()
        .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect::<Vec<_>>();
    space.apply_boundary(LatentVector(raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::Bounds;
    use crate::rng::keyed_rng;

    #[test]
    fn presets_are_valid() {
        assert!(ProposalConfig::faces().validate().is_ok());
        assert!(ProposalConfig::objects().validate().is_ok());
        assert_eq!(ProposalConfig::faces().sigma_high, 2.0);
        assert_eq!(ProposalConfig::objects().p_low, 0.6);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ProposalConfig::new(1.5, 0.1, 0.2).is_err());
        assert!(ProposalConfig::new(0.5, 0.0, 0.2).is_err());
        assert!(ProposalConfig::new(0.5, 0.3, 0.2).is_err());
    }

    #[test]
    fn replay_is_deterministic() {
        let space = LatentSpace::unit_hypercube("s", 4).unwrap();
        let z = LatentVector(vec![0.1, -0.2, 0.3, 0.9]);
        let a = propose(&z, &space, &ProposalConfig::objects(), &mut keyed_rng(1, "p", 5)).unwrap();
        let b = propose(&z, &space, &ProposalConfig::objects(), &mut keyed_rng(1, "p", 5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, z);
        assert!(space.contains(&a));
    }

    #[test]
    fn empirical_std_matches_mixture() {
        // 10^5 proposals from the origin; closed-form mixture std
        for config in [ProposalConfig::faces(), ProposalConfig::objects(), ProposalConfig::single(0.4)] {
            let space = LatentSpace::unbounded("s", 1).unwrap();
            let origin = LatentVector::zeros(1);
            let mut rng = keyed_rng(99, "std", 0);
            let n = 100_000;
            let draws: Vec<f64> = (0..n)
                .map(|_| propose(&origin, &space, &config, &mut rng).unwrap().0[0])
                .collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
            let rel = (var.sqrt() - config.mixture_std()).abs() / config.mixture_std();
            assert!(rel < 0.02, "{config:?}: rel err {rel}");
        }
    }

    #[test]
    fn component_applies_to_all_coordinates() {
        // With sigmas far apart, each draw's coordinates share one scale.
        let config = ProposalConfig::new(0.5, 1e-6, 10.0).unwrap();
        let space = LatentSpace::unbounded("s", 16).unwrap();
        let mut rng = keyed_rng(3, "mix", 0);
        for _ in 0..200 {
            let z = propose(&LatentVector::zeros(16), &space, &config, &mut rng).unwrap();
            let small = z.0.iter().filter(|v| v.abs() < 1e-3).count();
            assert!(small == 0 || small == 16);
        }
    }

    #[test]
    fn bounded_proposals_stay_inside() {
        let space =
            LatentSpace::new("s", 3, Bounds::UNIT, crate::latent::WrapMode::Eq2Literal).unwrap();
        let mut rng = keyed_rng(5, "b", 0);
        let mut z = LatentVector(vec![0.95, -0.95, 0.0]);
        for _ in 0..1000 {
            z = propose(&z, &space, &ProposalConfig::faces(), &mut rng).unwrap();
            assert!(space.contains(&z));
        }
    }
}
