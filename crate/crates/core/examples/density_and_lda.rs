//! Mixture densities and discriminant projections from chain samples.
//!
//! Simulates the five planted categories, fits a mixture per category and
//! projects every sample onto the two strongest discriminant directions.

use std::collections::BTreeMap;

use deep_mcmcp::analysis::{analyze_samples, AnalyzeOptions};
use deep_mcmcp::latent::LatentSpace;
use deep_mcmcp::proposal::ProposalConfig;
use deep_mcmcp::service::{simulate, Clock, EventLog, Experiment, ExperimentConfig};
use deep_mcmcp::synthetic::PlantedDesign;

fn main() -> deep_mcmcp::Result<()> {
    let space = LatentSpace::unit_hypercube("objects", 8)?;
    let targets = PlantedDesign::five_in_eight().targets(2)?;
    let config = ExperimentConfig::simulated(space, ProposalConfig::objects(), targets, 2);
    let mut exp = Experiment::create(config, EventLog::in_memory(), None, Clock::Logical(0))?;
    simulate(&mut exp, 100)?;

    let records = exp.export(None, 2)?;
    let options = AnalyzeOptions {
        n_components: Some(2),
        n_modes: 2,
        ..AnalyzeOptions::default()
    };
    let report = analyze_samples(&records, &options)?;
    for (label, model) in &report.models {
        println!(
            "{label}: {} components, train log-likelihood {:.1}, top mode {:?}",
            model.components.len(),
            model.train_log_likelihood,
            report.modes[label][0].values().iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
    }
    let lda = report.lda.as_ref().expect("five classes");
    println!("fisher ratio {:.3}, eigenvalues {:?}", lda.fisher_ratio, lda.eigenvalues);

    let mut centroids: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
    for p in &report.projected {
        let e = centroids.entry(&p.category).or_default();
        e.0 += p.x;
        e.1 += p.y.unwrap_or(0.0);
        e.2 += 1;
    }
    for (label, (x, y, n)) in centroids {
        println!("{label}: projected centroid ({:+.3}, {:+.3}) over {n} samples", x / n as f64, y / n as f64);
    }
    Ok(())
}
