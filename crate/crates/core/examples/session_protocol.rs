//! The session protocol: leases, 64-trial interleaving, discard rollback and
//! replay from the event log.

use deep_mcmcp::latent::LatentSpace;
use deep_mcmcp::proposal::ProposalConfig;
use deep_mcmcp::respondent::{Choice, Respondent};
use deep_mcmcp::service::{
    oracle_for, read_log, replay_log, run_sessions, ChoiceOutcome, Clock, EventLog, Experiment, ExperimentConfig,
};
use deep_mcmcp::synthetic::PlantedDesign;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("events.jsonl");
    let space = LatentSpace::unit_hypercube("objects", 8)?;
    let targets = PlantedDesign::five_in_eight().targets(1)?;
    let config = ExperimentConfig::simulated(space, ProposalConfig::objects(), targets, 42);
    println!(
        "{} chains, {} per session, {} trials per session",
        config.total_chains(),
        config.effective_chains_per_session(),
        config.trials_per_session
    );
    let mut exp = Experiment::create(config, EventLog::create(&path)?, None, Clock::Logical(0))?;

    let mut oracle = oracle_for(&exp)?;
    let summary = run_sessions(&mut exp, &mut oracle, 10)?;
    println!(
        "10 sessions: {} samples, acceptance {:.3}",
        summary.recorded_samples, summary.acceptance_rate
    );

    // a participant who leaves after 30 trials
    let before: Vec<usize> = exp.engine().chains().map(|c| c.states.len()).collect();
    let start = exp.start_session("dropout")?;
    let mut trial = start.trial;
    for _ in 0..30 {
        let choice = oracle.decide(&exp.engine().trial(&trial.trial_id)?.prompt())?;
        match exp.submit_choice(&trial.trial_id, choice)? {
            ChoiceOutcome::Next { trial: next } => trial = next,
            other => panic!("unexpected {other:?}"),
        }
    }
    let rolled_back = exp.discard(&start.session.session_id, "participant left")?;
    let after: Vec<usize> = exp.engine().chains().map(|c| c.states.len()).collect();
    println!("discard rolled back {} chains; lengths restored: {}", rolled_back.len(), before == after);

    // duplicate answers are rejected
    let next = exp.start_session("second")?.trial;
    exp.submit_choice(&next.trial_id, Choice::KeepCurrent)?;
    println!("duplicate answer: {}", exp.submit_choice(&next.trial_id, Choice::KeepCurrent).unwrap_err());

    let replayed = replay_log(&read_log(&path)?)?.engine.expect("experiment defined");
    let same = replayed.chains().zip(exp.engine().chains()).all(|(a, b)| a == b);
    println!("{} events on disk; replay reproduces every chain: {same}", exp.log().last_seq());
    Ok(())
}
