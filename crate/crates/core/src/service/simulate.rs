//! Oracle-driven sessions through the same API human respondents use.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::experiment::{ChoiceOutcome, Experiment};
use crate::error::{Error, Result};
use crate::respondent::{BarkerOracle, Respondent, RespondentKind};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub sessions_completed: usize,
    pub sessions_discarded: usize,
    pub recorded_samples: usize,
    pub chain_lengths: BTreeMap<String, usize>,
    pub acceptance_rate: f64,
    pub last_seq: u64,
}

/// The simulated respondent for an experiment's configured targets.
pub fn oracle_for(experiment: &Experiment) -> Result<BarkerOracle> {
    let config = experiment.config();
    if config.respondent.kind != RespondentKind::SimulatedBarker {
        return Err(Error::config("respondent.kind", "simulation needs the simulated_barker respondent"));
    }
    BarkerOracle::new(
        config.targets.iter().cloned(),
        config.respondent,
        derive_seed(config.master_seed, "respondent"),
    )
}

/// Runs `n_sessions` complete sessions, answering every trial with
/// `respondent`.
pub fn run_sessions(experiment: &mut Experiment, respondent: &mut dyn Respondent, n_sessions: usize) -> Result<SimulationSummary> {
    let mut completed = 0;
    let mut discarded = 0;
    for s in 0..n_sessions {
        let mut trial = experiment.start_session(&format!("simulated-{s:05}"))?.trial;
        loop {
            let choice = {
                let record = experiment.engine().trial(&trial.trial_id)?;
                respondent.decide(&record.prompt())?
            };
            match experiment.submit_choice(&trial.trial_id, choice)? {
                ChoiceOutcome::Next { trial: next } => trial = next,
                ChoiceOutcome::Completed { .. } => {
                    completed += 1;
                    break;
                }
                ChoiceOutcome::Discarded { .. } => {
                    discarded += 1;
                    break;
                }
            }
        }
    }
    Ok(summarize(experiment, completed, discarded))
}

pub fn simulate(experiment: &mut Experiment, n_sessions: usize) -> Result<SimulationSummary> {
    let mut oracle = oracle_for(experiment)?;
    run_sessions(experiment, &mut oracle, n_sessions)
}

fn summarize(experiment: &Experiment, completed: usize, discarded: usize) -> SimulationSummary {
    let engine = experiment.engine();
    let accepted: u64 = engine.chains().map(|c| c.accept_count).sum();
    let samples = engine.recorded_samples();
    SimulationSummary {
        sessions_completed: completed,
        sessions_discarded: discarded,
        recorded_samples: samples,
        chain_lengths: engine.chains().map(|c| (c.chain_id.clone(), c.states.len())).collect(),
        acceptance_rate: if samples == 0 { 0.0 } else { accepted as f64 / samples as f64 },
        last_seq: experiment.log().last_seq(),
    }
}
