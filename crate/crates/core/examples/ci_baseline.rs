//! The classification-image baseline: random noise pairs, a simulated
//! chooser and the choice-only template.

use deep_mcmcp::ci::{ci_template_choice_only, run_ci_experiment};
use deep_mcmcp::density::Component;
use deep_mcmcp::latent::{LatentSpace, LatentVector};
use deep_mcmcp::respondent::{RespondentConfig, TargetDensity};

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (norm(a) * norm(b))
}

fn main() -> deep_mcmcp::Result<()> {
    let space = LatentSpace::unbounded("noise", 8)?;
    let offset = vec![1.0, -0.5, 0.0, 0.8, 0.0, 0.0, -1.0, 0.3];
    let target = TargetDensity::new("offset", vec![Component::isotropic(1.0, LatentVector(offset.clone()), 1.0)])?;
    for n in [100, 500, 1000, 4000] {
        let trials = run_ci_experiment(&space, std::slice::from_ref(&target), n, &RespondentConfig::default(), 3)?;
        let template = ci_template_choice_only(&trials)?;
        println!("{n:>5} trials: cosine to the true offset {:.3}", cosine(template.values(), &offset));
    }
    Ok(())
}
