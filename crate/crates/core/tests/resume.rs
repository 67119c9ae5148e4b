use std::fs::OpenOptions;
use std::io::Write;

use deep_mcmcp::latent::LatentSpace;
use deep_mcmcp::proposal::ProposalConfig;
use deep_mcmcp::service::{read_log, replay_log, simulate, Clock, EventLog, Experiment, ExperimentConfig};
use deep_mcmcp::synthetic::PlantedDesign;
use deep_mcmcp::Error;

fn config() -> ExperimentConfig {
    let space = LatentSpace::unit_hypercube("objects", 8).unwrap();
    let targets = PlantedDesign::five_in_eight().targets(5).unwrap();
    ExperimentConfig::simulated(space, ProposalConfig::objects(), targets, 21)
}

#[test]
fn resumed_experiment_continues_the_same_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    {
        let mut exp = Experiment::create(config(), EventLog::create(&path).unwrap(), None, Clock::Logical(0)).unwrap();
        simulate(&mut exp, 4).unwrap();
        exp.start_session("walked-away").unwrap();
    }
    let mut resumed = Experiment::resume(EventLog::open(&path).unwrap(), None)
        .unwrap()
        .with_clock(Clock::Logical(0));
    assert_eq!(resumed.engine().active_leases(), 16);
    let orphan = resumed
        .log()
        .events()
        .iter()
        .rev()
        .find_map(|e| match &e.event {
            deep_mcmcp::service::EventKind::SessionStarted(plan) => Some(plan.session_id.clone()),
            _ => None,
        })
        .unwrap();
    resumed.discard(&orphan, "abandoned").unwrap();
    simulate(&mut resumed, 3).unwrap();
    assert_eq!(resumed.engine().recorded_samples(), 7 * 64);

    let replayed = replay_log(&read_log(&path).unwrap()).unwrap().engine.unwrap();
    let live: Vec<_> = resumed.engine().chains().cloned().collect();
    let again: Vec<_> = replayed.chains().cloned().collect();
    assert_eq!(live, again);
}

#[test]
fn truncated_tail_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    {
        let mut exp = Experiment::create(config(), EventLog::create(&path).unwrap(), None, Clock::Logical(0)).unwrap();
        simulate(&mut exp, 1).unwrap();
    }
    let last = read_log(&path).unwrap().last().unwrap().seq;
    OpenOptions::new()
        .append(true)
        .open(&path)
        .unwrap()
        .write_all(b"{\"seq\": 99999, \"timest")
        .unwrap();
    match EventLog::open(&path) {
        Err(Error::CorruptLog { last_valid, .. }) => assert_eq!(last_valid, Some(last)),
        other => panic!("expected a corrupt log, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn creating_over_an_existing_log_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    EventLog::create(&path).unwrap();
    assert!(EventLog::create(&path).is_err());
}
