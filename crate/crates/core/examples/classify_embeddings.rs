//! Scoring held-out embeddings with category means and fitted densities,
//! against the classification-image templates at the same trial budget.

use std::collections::BTreeMap;

use deep_mcmcp::analysis::{fit_gmm, mean_of, EmConfig};
use deep_mcmcp::ci::{ci_template_choice_only, run_ci_experiment};
use deep_mcmcp::classify::{evaluate_accuracy, MaxDensity, NearestMean};
use deep_mcmcp::latent::{LatentSpace, LatentVector};
use deep_mcmcp::proposal::ProposalConfig;
use deep_mcmcp::respondent::RespondentConfig;
use deep_mcmcp::samples::SampleRecord;
use deep_mcmcp::service::{simulate, Clock, EventLog, Experiment, ExperimentConfig};
use deep_mcmcp::synthetic::{labeled_samples, PlantedDesign};

fn main() -> deep_mcmcp::Result<()> {
    let space = LatentSpace::unit_hypercube("objects", 8)?;
    let targets = PlantedDesign::five_in_eight().targets(2)?;
    let config = ExperimentConfig::simulated(space.clone(), ProposalConfig::objects(), targets.clone(), 2);
    let mut exp = Experiment::create(config, EventLog::in_memory(), None, Clock::Logical(0))?;
    // 325 sessions of 64 trials: 4,160 trials per category
    simulate(&mut exp, 325)?;

    let mut by_class: BTreeMap<String, Vec<LatentVector>> = BTreeMap::new();
    for r in exp.export(None, 2)? {
        if let SampleRecord::Mcmcp { category, values, .. } = r {
            by_class.entry(category).or_default().push(values);
        }
    }
    let means = by_class
        .iter()
        .map(|(k, v)| Ok((k.clone(), mean_of(v.iter())?)))
        .collect::<deep_mcmcp::Result<_>>()?;
    let models = by_class
        .iter()
        .map(|(k, v)| Ok((k.clone(), fit_gmm(k, v, &EmConfig::new(4))?)))
        .collect::<deep_mcmcp::Result<_>>()?;

    let ci = run_ci_experiment(&space, &targets, 4160, &RespondentConfig::default(), 2)?;
    let templates = targets
        .iter()
        .map(|t| {
            let own: Vec<_> = ci.iter().filter(|c| c.category == t.category).cloned().collect();
            Ok((t.category.clone(), ci_template_choice_only(&own)?))
        })
        .collect::<deep_mcmcp::Result<_>>()?;

    let test = labeled_samples(&space, &targets, 500, 1002)?;
    println!("MCMCP, nearest mean\n{}", evaluate_accuracy(&test, &NearestMean(means))?);
    println!("MCMCP, max density\n{}", evaluate_accuracy(&test, &MaxDensity(models))?);
    println!("CI templates, nearest mean\n{}", evaluate_accuracy(&test, &NearestMean(templates))?);
    Ok(())
}
