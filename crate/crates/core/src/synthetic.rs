//! Planted category densities for simulation studies.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::classify::LabeledVector;
use crate::density::Component;
use crate::error::{Error, Result};
use crate::latent::{LatentSpace, LatentVector};
use crate::respondent::TargetDensity;
use crate::rng::keyed_rng;

/// Two unit-variance Gaussians at `(+-separation, 0)` with equal weight.
pub fn two_mode_target(category: &str, separation: f64) -> TargetDensity {
    let comp = |x: f64| Component::isotropic(0.5, LatentVector(vec![x, 0.0]), 1.0);
    TargetDensity {
        category: category.to_string(),
        components: vec![comp(separation), comp(-separation)],
    }
}

/// Bimodal categories in a bounded space.
///
/// Category `c` is centred at `radii[c] * u[c % 2]` for two random unit
/// directions `u`, with equal-weight modes at `centre +- mode_offset * w`
/// along a random unit `w` and isotropic spread `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDesign {
    pub dim: usize,
    pub radii: Vec<f64>,
    pub mode_offset: f64,
    pub sigma: f64,
}

impl PlantedDesign {
    /// Five categories in eight dimensions; pairs of categories share an
    /// axis so that only some of them are separable by their means.
    pub fn five_in_eight() -> Self {
        PlantedDesign {
            dim: 8,
            radii: vec![0.2, 0.2, 0.6, 0.6, 0.9],
            mode_offset: 0.2,
            sigma: 0.15,
        }
    }

    pub fn n_categories(&self) -> usize {
        self.radii.len()
    }

    pub fn category_label(c: usize) -> String {
        format!("category{c}")
    }

    pub fn targets(&self, seed: u64) -> Result<Vec<TargetDensity>> {
        if self.dim < 2 || self.radii.is_empty() || !(self.sigma > 0.0) {
            return Err(Error::Domain("planted design needs dim >= 2, categories and sigma > 0".into()));
        }
        let mut rng = keyed_rng(seed, "planted", 0);
        let axes = [unit_vector(self.dim, &mut rng), unit_vector(self.dim, &mut rng)];
        let variance = self.sigma * self.sigma;
        self.radii
            .iter()
            .enumerate()
            .map(|(c, r)| {
                let w = unit_vector(self.dim, &mut rng);
                let centre: Vec<f64> = axes[c % 2].iter().map(|u| r * u).collect();
                let mode = |sign: f64| {
                    let m: Vec<f64> =
                        centre.iter().zip(&w).map(|(m, w)| m + sign * self.mode_offset * w).collect();
                    Component::isotropic(0.5, LatentVector(m), variance)
                };
                TargetDensity::new(Self::category_label(c), vec![mode(1.0), mode(-1.0)])
            })
            .collect()
    }
}

fn unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `n_per_class` draws from every target, mapped into `space` by its
/// boundary transform.
pub fn labeled_samples(
    space: &LatentSpace,
    targets: &[TargetDensity],
    n_per_class: usize,
    seed: u64,
) -> Result<Vec<LabeledVector>> {
    let mut out = Vec::with_capacity(targets.len() * n_per_class);
    for target in targets {
        let mut rng = keyed_rng(seed, &format!("test-set/{}", target.category), 0);
        for i in 0..n_per_class {
            let z = space.apply_boundary(target.sample(&mut rng))?;
            out.push(LabeledVector {
                source_id: format!("{}-{i:05}", target.category),
                true_label: target.category.clone(),
                vector: z,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_mode_moments() {
        let t = two_mode_target("m", 1.5);
        assert_eq!(t.mean().0, vec![0.0, 0.0]);
        let cov = t.covariance();
        assert!((cov[0][0] - 3.25).abs() < 1e-12);
        assert!((cov[1][1] - 1.0).abs() < 1e-12);
        assert!(cov[0][1].abs() < 1e-12);
    }

    #[test]
    fn planted_design_shape() {
        let design = PlantedDesign::five_in_eight();
        let targets = design.targets(3).unwrap();
        assert_eq!(targets.len(), 5);
        for (c, t) in targets.iter().enumerate() {
            assert_eq!(t.dim(), 8);
            assert_eq!(t.components.len(), 2);
            let norm = t.mean().0.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - design.radii[c]).abs() < 1e-12);
            let gap = t.components[0].mean.squared_distance(&t.components[1].mean).sqrt();
            assert!((gap - 0.4).abs() < 1e-12);
        }
        assert_eq!(targets, design.targets(3).unwrap());
        assert_ne!(targets, design.targets(4).unwrap());
    }

    #[test]
    fn labeled_samples_stay_in_bounds() {
        let space = LatentSpace::unit_hypercube("s", 8).unwrap();
        let targets = PlantedDesign::five_in_eight().targets(1).unwrap();
        let data = labeled_samples(&space, &targets, 50, 9).unwrap();
        assert_eq!(data.len(), 250);
        assert!(data.iter().all(|d| space.contains(&d.vector)));
    }
}
