//! Event-sourced experiment: every state change is planned against the
//! engine, appended to the log, and only then applied.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::events::{Event, EventKind, EventLog};
use crate::chain::{acceptance_rate, default_burn_in, thin, Engine, SessionStatus, TrialRecord};
use crate::error::{Error, Result};
use crate::gateway::Gateway;
use crate::respondent::Choice;
use crate::rng::keyed_rng;
use crate::samples::SampleRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    System,
    /// Starts at the given millisecond and advances by one per reading.
    Logical(u64),
}

impl Clock {
    fn now(&mut self) -> u64 {
        match self {
            Clock::System => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_millis() as u64),
            Clock::Logical(t) => {
                *t += 1;
                *t
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Current,
    Proposal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionAssignment {
    pub left: Role,
    pub right: Role,
}

/// What a respondent is shown for one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialView {
    pub trial_id: String,
    pub session_id: String,
    pub category_prompt: String,
    /// 1-based position within the session.
    pub position: usize,
    pub trials_per_session: usize,
    pub position_assignment: PositionAssignment,
    pub image_left: Option<String>,
    pub image_right: Option<String>,
}

impl TrialView {
    fn new(record: &TrialRecord, position: usize, trials_per_session: usize) -> Self {
        let url = |h: &Option<String>| h.as_ref().map(|h| format!("/images/{h}"));
        let (left, right, image_left, image_right) = if record.left_is_proposal {
            (Role::Proposal, Role::Current, url(&record.proposal_image), url(&record.current_image))
        } else {
            (Role::Current, Role::Proposal, url(&record.current_image), url(&record.proposal_image))
        };
        TrialView {
            trial_id: record.trial_id.clone(),
            session_id: record.session_id.clone(),
            category_prompt: record.category.clone(),
            position,
            trials_per_session,
            position_assignment: PositionAssignment { left, right },
            image_left,
            image_right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub participant_id: String,
    pub status: SessionStatus,
    pub trials_per_session: usize,
    pub answered: usize,
    pub confirmation_code: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStart {
    pub session: SessionView,
    pub trial: TrialView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ChoiceOutcome {
    Next { trial: TrialView },
    Completed { session_id: String, confirmation_code: String },
    Discarded { session_id: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub chain_id: String,
    pub category: String,
    pub length: usize,
    pub accept_count: u64,
    pub acceptance_rate: Option<f64>,
    pub lease: Option<String>,
}

pub struct Experiment {
    config: ExperimentConfig,
    engine: Engine,
    log: EventLog,
    gateway: Option<Gateway>,
    clock: Clock,
    sessions_started: u64,
}

impl std::fmt::Debug for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Experiment")
            .field("experiment_id", &self.config.experiment_id)
            .field("last_seq", &self.log.last_seq())
            .finish_non_exhaustive()
    }
}

fn build_engine(config: &ExperimentConfig) -> Result<Engine> {
    let mut engine = Engine::new(config.space.clone(), config.proposal)?;
    for chain in config.initial_chains() {
        engine.add_chain(chain)?;
    }
    Ok(engine)
}

impl Experiment {
    /// Starts a new experiment on an empty log; the definition is the first
    /// event. `gateway` is needed only when respondents look at images;
    /// a logical clock makes the whole log reproducible.
    pub fn create(
        config: ExperimentConfig,
        mut log: EventLog,
        gateway: Option<Gateway>,
        mut clock: Clock,
    ) -> Result<Self> {
        config.validate()?;
        if log.last_seq() != 0 {
            return Err(Error::Conflict("the event log is not empty".into()));
        }
        let engine = build_engine(&config)?;
        let chain_seeds = engine.chains().map(|c| (c.chain_id.clone(), c.seed)).collect();
        log.append(
            clock.now(),
            EventKind::ExperimentDefined {
                config: config.clone(),
                chain_seeds,
            },
        )?;
        Ok(Experiment {
            config,
            engine,
            log,
            gateway,
            clock,
            sessions_started: 0,
        })
    }

    /// Rebuilds an experiment from an existing log and keeps appending to it.
    pub fn resume(log: EventLog, gateway: Option<Gateway>) -> Result<Self> {
        let state = replay_log(log.events())?;
        let (Some(config), Some(engine)) = (state.config, state.engine) else {
            return Err(Error::Domain("the event log defines no experiment".into()));
        };
        Ok(Experiment {
            config,
            engine,
            log,
            gateway,
            clock: Clock::System,
            sessions_started: state.sessions_started,
        })
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn gateway(&self) -> Option<&Gateway> {
        self.gateway.as_ref()
    }

    fn append(&mut self, now: u64, event: EventKind) -> Result<()> {
        self.log.append(now, event).map(|_| ())
    }

    fn session_view(&self, session_id: &str) -> Result<SessionView> {
        let s = self.engine.session(session_id)?;
        Ok(SessionView {
            session_id: s.session_id.clone(),
            participant_id: s.participant_id.clone(),
            status: s.status,
            trials_per_session: s.trials_per_session,
            answered: s.answered,
            confirmation_code: s.confirmation_code.clone(),
        })
    }

    fn trial_view(&self, record: &TrialRecord) -> Result<TrialView> {
        let session = self.engine.session(&record.session_id)?;
        let position = session
            .trial_ids
            .iter()
            .position(|t| *t == record.trial_id)
            .map_or(session.trial_ids.len(), |p| p + 1);
        Ok(TrialView::new(record, position, session.trials_per_session))
    }

    /// Leases chains, schedules a session and serves its first trial.
    pub fn start_session(&mut self, participant_id: &str) -> Result<SessionStart> {
        let n = self.sessions_started;
        let seed = self.config.master_seed;
        let session_id = format!("{:016x}", keyed_rng(seed, "session-id", n).random::<u64>());
        let chain_ids = self
            .engine
            .select_chains(self.config.effective_chains_per_session(), &mut keyed_rng(seed, "select", n))?;
        let now = self.clock.now();
        let plan = self.engine.plan_session(
            &session_id,
            participant_id,
            &chain_ids,
            self.config.trials_per_session,
            &mut keyed_rng(seed, "schedule", n),
            now,
        )?;
        self.append(now, EventKind::SessionStarted(plan.clone()))?;
        self.engine.apply_session_started(plan)?;
        self.sessions_started += 1;
        match self.serve_trial(&session_id)? {
            ChoiceOutcome::Next { trial } => Ok(SessionStart {
                session: self.session_view(&session_id)?,
                trial,
            }),
            ChoiceOutcome::Discarded { reason, .. } => Err(Error::DecodeFailure(reason)),
            ChoiceOutcome::Completed { .. } => Err(Error::InvalidState("empty session".into())),
        }
    }

    fn serve_trial(&mut self, session_id: &str) -> Result<ChoiceOutcome> {
        let now = self.clock.now();
        let mut record = self.engine.plan_next_trial(session_id, now)?;
        if let Some(gateway) = &self.gateway {
            let decoded = gateway
                .decode(&record.current)
                .and_then(|a| Ok((a, gateway.decode(&record.proposal)?)));
            match decoded {
                Ok((current, proposal)) => {
                    record.current_image = Some(current.content_hash);
                    record.proposal_image = Some(proposal.content_hash);
                }
                Err(Error::DecodeFailure(msg)) => {
                    let reason = format!("image failed to load: {msg}");
                    self.discard(session_id, &reason)?;
                    return Ok(ChoiceOutcome::Discarded {
                        session_id: session_id.to_string(),
                        reason,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        self.append(now, EventKind::TrialServed(record.clone()))?;
        self.engine.apply_trial_served(record.clone())?;
        Ok(ChoiceOutcome::Next {
            trial: self.trial_view(&record)?,
        })
    }

    /// The pending trial of an active session (serving one if needed), or the
    /// session's final status.
    pub fn next_trial(&mut self, session_id: &str) -> Result<ChoiceOutcome> {
        let session = self.engine.session(session_id)?;
        match session.status {
            SessionStatus::Completed => {
                return Ok(ChoiceOutcome::Completed {
                    session_id: session_id.to_string(),
                    confirmation_code: session.confirmation_code.clone().unwrap_or_default(),
                })
            }
            SessionStatus::Discarded => {
                return Ok(ChoiceOutcome::Discarded {
                    session_id: session_id.to_string(),
                    reason: "session was discarded".into(),
                })
            }
            SessionStatus::Active => {}
        }
        if let Some(pending) = self.engine.pending_trial(session_id)? {
            let view = self.trial_view(pending)?;
            return Ok(ChoiceOutcome::Next { trial: view });
        }
        if session.is_finished() {
            return self.complete(session_id);
        }
        self.serve_trial(session_id)
    }

    fn complete(&mut self, session_id: &str) -> Result<ChoiceOutcome> {
        let code = self.engine.plan_complete(session_id)?;
        let now = self.clock.now();
        self.append(
            now,
            EventKind::SessionCompleted {
                session_id: session_id.to_string(),
                confirmation_code: code.clone(),
            },
        )?;
        self.engine.apply_session_completed(session_id, code.clone())?;
        Ok(ChoiceOutcome::Completed {
            session_id: session_id.to_string(),
            confirmation_code: code,
        })
    }

    pub fn submit_choice(&mut self, trial_id: &str, choice: Choice) -> Result<ChoiceOutcome> {
        self.engine.plan_choice(trial_id)?;
        let now = self.clock.now();
        self.append(
            now,
            EventKind::ChoiceRecorded {
                trial_id: trial_id.to_string(),
                choice,
            },
        )?;
        self.engine.apply_choice(trial_id, choice, now)?;
        let session_id = self.engine.trial(trial_id)?.session_id.clone();
        if self.engine.session(&session_id)?.is_finished() {
            self.complete(&session_id)
        } else {
            self.serve_trial(&session_id)
        }
    }

    /// Maps a screen side to a choice through the trial's logged assignment.
    pub fn choice_for_side(&self, trial_id: &str, side: Side) -> Result<Choice> {
        let trial = self.engine.trial(trial_id)?;
        let proposal_side = if trial.left_is_proposal { Side::Left } else { Side::Right };
        Ok(if side == proposal_side {
            Choice::AcceptProposal
        } else {
            Choice::KeepCurrent
        })
    }

    pub fn submit_side(&mut self, trial_id: &str, side: Side) -> Result<ChoiceOutcome> {
        let choice = self.choice_for_side(trial_id, side)?;
        self.submit_choice(trial_id, choice)
    }

    /// Rolls the session's chains back and releases them.
    pub fn discard(&mut self, session_id: &str, reason: &str) -> Result<Vec<String>> {
        self.engine.plan_discard(session_id)?;
        let now = self.clock.now();
        self.append(
            now,
            EventKind::SessionDiscarded {
                session_id: session_id.to_string(),
                reason: reason.to_string(),
            },
        )?;
        self.engine.apply_session_discarded(session_id)
    }

    /// Discards active sessions idle beyond the configured timeout.
    pub fn discard_idle(&mut self) -> Result<Vec<String>> {
        let Some(idle_ms) = self.config.idle_timeout_ms else {
            return Ok(Vec::new());
        };
        let now = self.clock.now();
        let idle = self.engine.idle_sessions(now, idle_ms);
        for id in &idle {
            self.discard(id, "idle timeout")?;
        }
        Ok(idle)
    }

    pub fn session(&self, session_id: &str) -> Result<SessionView> {
        self.session_view(session_id)
    }

    pub fn admin_chains(&self) -> Vec<ChainSummary> {
        chain_summaries(&self.engine)
    }

    pub fn export(&self, burn_in: Option<usize>, stride: usize) -> Result<Vec<SampleRecord>> {
        export_samples(&self.engine, burn_in, stride)
    }
}

pub fn chain_summaries(engine: &Engine) -> Vec<ChainSummary> {
    engine
        .chains()
        .map(|c| ChainSummary {
            chain_id: c.chain_id.clone(),
            category: c.category.clone(),
            length: c.states.len(),
            accept_count: c.accept_count,
            acceptance_rate: acceptance_rate(c).ok(),
            lease: c.lease.clone(),
        })
        .collect()
}

/// Thinned states of every chain. `burn_in` defaults to a tenth of each
/// chain's length. A chain nobody has answered yet holds only its arbitrary
/// initial state and contributes nothing.
pub fn export_samples(engine: &Engine, burn_in: Option<usize>, stride: usize) -> Result<Vec<SampleRecord>> {
    let mut out = Vec::new();
    for chain in engine.chains().filter(|c| c.states.len() > 1) {
        let burn = burn_in.unwrap_or_else(|| default_burn_in(chain.states.len()));
        for (i, z) in thin(chain, burn, stride)?.into_iter().enumerate() {
            out.push(SampleRecord::Mcmcp {
                chain_id: chain.chain_id.clone(),
                category: chain.category.clone(),
                index: burn + i * stride,
                values: z.clone(),
            });
        }
    }
    Ok(out)
}

/// State reconstructed from a log; both fields are `None` for an empty log.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayState {
    pub config: Option<ExperimentConfig>,
    pub engine: Option<Engine>,
    pub sessions_started: u64,
}

/// Folds the log through the engine. Served proposals are regenerated from
/// the chain streams and must match the logged ones.
pub fn replay_log(events: &[Event]) -> Result<ReplayState> {
    let mut state = ReplayState {
        config: None,
        engine: None,
        sessions_started: 0,
    };
    let mut last: Option<u64> = None;
    for event in events {
        let corrupt = |reason: String| Error::CorruptLog {
            last_valid: last,
            reason: format!("event {}: {reason}", event.seq),
        };
        if event.seq != last.unwrap_or(0) + 1 {
            return Err(corrupt("sequence gap".into()));
        }
        if let EventKind::ExperimentDefined { config, chain_seeds } = &event.event {
            if state.config.is_some() {
                return Err(corrupt("experiment defined twice".into()));
            }
            config.validate().map_err(|e| corrupt(e.to_string()))?;
            let engine = build_engine(config).map_err(|e| corrupt(e.to_string()))?;
            let seeds: BTreeMap<String, u64> =
                engine.chains().map(|c| (c.chain_id.clone(), c.seed)).collect();
            if &seeds != chain_seeds {
                return Err(corrupt("chain seeds do not match the configuration".into()));
            }
            state.config = Some(config.clone());
            state.engine = Some(engine);
        } else {
            let engine = state
                .engine
                .as_mut()
                .ok_or_else(|| corrupt("event before the experiment definition".into()))?;
            apply_event(engine, event, &mut state.sessions_started).map_err(|e| corrupt(e.to_string()))?;
        }
        last = Some(event.seq);
    }
    Ok(state)
}

fn apply_event(engine: &mut Engine, event: &Event, sessions_started: &mut u64) -> Result<()> {
    match &event.event {
        EventKind::ExperimentDefined { .. } => unreachable!("handled by replay_log"),
        EventKind::SessionStarted(plan) => {
            engine.apply_session_started(plan.clone())?;
            *sessions_started += 1;
        }
        EventKind::TrialServed(record) => {
            let expected = engine.plan_next_trial(&record.session_id, record.served_at_ms)?;
            if expected.trial_id != record.trial_id
                || expected.current != record.current
                || expected.proposal != record.proposal
                || expected.left_is_proposal != record.left_is_proposal
            {
                return Err(Error::InvalidState(format!(
                    "trial `{}` does not match its regenerated proposal",
                    record.trial_id
                )));
            }
            engine.apply_trial_served(record.clone())?;
        }
        EventKind::ChoiceRecorded { trial_id, choice } => {
            engine.apply_choice(trial_id, *choice, event.timestamp_ms)?;
        }
        EventKind::SessionCompleted {
            session_id,
            confirmation_code,
        } => {
            if &engine.plan_complete(session_id)? != confirmation_code {
                return Err(Error::InvalidState(format!(
                    "confirmation code of session `{session_id}` does not match"
                )));
            }
            engine.apply_session_completed(session_id, confirmation_code.clone())?;
        }
        EventKind::SessionDiscarded { session_id, .. } => {
            engine.apply_session_discarded(session_id)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Component;
    use crate::latent::{LatentSpace, LatentVector};
    use crate::proposal::ProposalConfig;
    use crate::respondent::TargetDensity;

    fn config(categories: usize, chains: usize, trials: usize) -> ExperimentConfig {
        let targets = (0..categories)
            .map(|c| {
                TargetDensity::new(
                    format!("c{c}"),
                    vec![Component::isotropic(1.0, LatentVector(vec![0.1 * c as f64, 0.0]), 0.2)],
                )
                .unwrap()
            })
            .collect();
        let mut config = ExperimentConfig::simulated(
            LatentSpace::unit_hypercube("s", 2).unwrap(),
            ProposalConfig::objects(),
            targets,
            11,
        );
        config.chains_per_category = chains;
        config.trials_per_session = trials;
        config
    }

    fn experiment(c: ExperimentConfig) -> Experiment {
        Experiment::create(c, EventLog::in_memory(), None, Clock::Logical(0)).unwrap()
    }

    fn answer_all(exp: &mut Experiment, mut trial: TrialView, choice: Choice) -> ChoiceOutcome {
        loop {
            match exp.submit_choice(&trial.trial_id, choice).unwrap() {
                ChoiceOutcome::Next { trial: t } => trial = t,
                done => return done,
            }
        }
    }

    #[test]
    fn full_session_completes_with_code() {
        let mut exp = experiment(config(2, 2, 8));
        let start = exp.start_session("p").unwrap();
        assert_eq!(start.trial.position, 1);
        assert_eq!(start.trial.trials_per_session, 8);
        let outcome = answer_all(&mut exp, start.trial, Choice::AcceptProposal);
        let ChoiceOutcome::Completed { confirmation_code, .. } = outcome else {
            panic!("{outcome:?}")
        };
        assert_eq!(confirmation_code.len(), 8);
        assert_eq!(exp.engine().recorded_samples(), 8);
        assert_eq!(exp.engine().active_leases(), 0);
        // every mutation is one event: definition, start, 8 x (served + choice), completion
        assert_eq!(exp.log().last_seq(), 1 + 1 + 16 + 1);
    }

    #[test]
    fn duplicate_choice_is_conflict_and_chain_unchanged() {
        let mut exp = experiment(config(1, 1, 4));
        let start = exp.start_session("p").unwrap();
        exp.submit_choice(&start.trial.trial_id, Choice::KeepCurrent).unwrap();
        let before = exp.engine().chain("c0/0").unwrap().clone();
        let seq = exp.log().last_seq();
        assert!(matches!(
            exp.submit_choice(&start.trial.trial_id, Choice::AcceptProposal),
            Err(Error::Conflict(_))
        ));
        assert_eq!(exp.engine().chain("c0/0").unwrap(), &before);
        assert_eq!(exp.log().last_seq(), seq);
        assert!(matches!(exp.submit_choice("nope", Choice::KeepCurrent), Err(Error::NotFound(_))));
    }

    #[test]
    fn concurrent_sessions_get_disjoint_chains_and_capacity_runs_out() {
        let mut exp = experiment(config(4, 8, 64));
        assert_eq!(exp.config().effective_chains_per_session(), 32);
        let mut cfg = config(4, 8, 64);
        cfg.chains_per_session = Some(16);
        let mut exp16 = experiment(cfg);
        let a = exp16.start_session("a").unwrap();
        let b = exp16.start_session("b").unwrap();
        let chains = |e: &Experiment, s: &str| -> Vec<String> {
            e.engine().session(s).unwrap().chain_ids().into_iter().map(String::from).collect()
        };
        let (ca, cb) = (chains(&exp16, &a.session.session_id), chains(&exp16, &b.session.session_id));
        assert_eq!(ca.len(), 16);
        assert!(ca.iter().all(|c| !cb.contains(c)));
        assert!(matches!(exp16.start_session("c"), Err(Error::RetryLater(_))));
        exp.start_session("x").unwrap();
        assert!(exp.engine().active_leases() <= exp.engine().chains().count());
    }

    #[test]
    fn second_session_hands_off_final_states() {
        let mut exp = experiment(config(1, 1, 4));
        let start = exp.start_session("a").unwrap();
        answer_all(&mut exp, start.trial, Choice::AcceptProposal);
        let final_state = exp.engine().chain("c0/0").unwrap().latest().clone();
        let second = exp.start_session("b").unwrap();
        let record = exp.engine().trial(&second.trial.trial_id).unwrap();
        assert_eq!(record.current, final_state);
        assert_eq!(record.index_in_chain, 4);
    }

    #[test]
    fn side_maps_through_assignment() {
        let mut exp = experiment(config(1, 1, 64));
        let mut trial = exp.start_session("a").unwrap().trial;
        for _ in 0..20 {
            let record = exp.engine().trial(&trial.trial_id).unwrap().clone();
            let proposal_side = match trial.position_assignment.left {
                Role::Proposal => Side::Left,
                Role::Current => Side::Right,
            };
            assert_eq!(record.left_is_proposal, proposal_side == Side::Left);
            let ChoiceOutcome::Next { trial: next } = exp.submit_side(&trial.trial_id, proposal_side).unwrap() else {
                panic!()
            };
            let chain = exp.engine().chain(&record.chain_id).unwrap();
            assert_eq!(chain.latest(), &record.proposal);
            trial = next;
        }
    }

    #[test]
    fn discard_after_partial_session_restores_chains() {
        let mut exp = experiment(config(2, 2, 64));
        let before: Vec<_> = exp.engine().chains().cloned().collect();
        let mut trial = exp.start_session("a").unwrap().trial;
        for _ in 0..30 {
            let ChoiceOutcome::Next { trial: t } = exp.submit_choice(&trial.trial_id, Choice::AcceptProposal).unwrap() else {
                panic!()
            };
            trial = t;
        }
        let session = trial.session_id.clone();
        exp.discard(&session, "test").unwrap();
        let after: Vec<_> = exp.engine().chains().cloned().collect();
        assert_eq!(before, after);
        // only initial states remain, and those are not samples
        assert!(exp.export(Some(0), 1).unwrap().is_empty());
        assert!(matches!(exp.discard(&session, "again"), Err(Error::Lifecycle(_))));
        assert!(matches!(
            exp.next_trial(&session).unwrap(),
            ChoiceOutcome::Discarded { .. }
        ));
    }

    #[test]
    fn idle_sessions_are_discarded() {
        let mut cfg = config(1, 2, 4);
        cfg.chains_per_session = Some(1);
        cfg.idle_timeout_ms = Some(5);
        let mut exp = experiment(cfg);
        let a = exp.start_session("a").unwrap();
        assert!(exp.discard_idle().unwrap().is_empty());
        for _ in 0..10 {
            exp.clock.now();
        }
        assert_eq!(exp.discard_idle().unwrap(), vec![a.session.session_id]);
    }

    #[test]
    fn next_trial_is_idempotent() {
        let mut exp = experiment(config(1, 1, 4));
        let start = exp.start_session("a").unwrap();
        let again = exp.next_trial(&start.session.session_id).unwrap();
        assert_eq!(again, ChoiceOutcome::Next { trial: start.trial });
    }

    #[test]
    fn replay_matches_live_state() {
        let mut exp = experiment(config(2, 2, 8));
        for p in 0..3 {
            let start = exp.start_session(&format!("p{p}")).unwrap();
            let choice = if p % 2 == 0 { Choice::AcceptProposal } else { Choice::KeepCurrent };
            answer_all(&mut exp, start.trial, choice);
        }
        let start = exp.start_session("dropout").unwrap();
        exp.submit_choice(&start.trial.trial_id, Choice::AcceptProposal).unwrap();
        exp.discard(&start.session.session_id, "dropout").unwrap();

        let replayed = replay_log(exp.log().events()).unwrap();
        assert_eq!(replayed.engine.as_ref(), Some(exp.engine()));
        assert_eq!(replayed.sessions_started, 4);
        assert_eq!(replay_log(exp.log().events()).unwrap(), replayed);
        let empty = replay_log(&[]).unwrap();
        assert!(empty.engine.is_none());
    }

    #[test]
    fn replay_rejects_tampered_proposals() {
        let mut exp = experiment(config(1, 1, 4));
        exp.start_session("a").unwrap();
        let mut events = exp.log().events().to_vec();
        let EventKind::TrialServed(record) = &mut events[2].event else {
            panic!()
        };
        record.proposal.0[0] += 1e-12;
        assert!(matches!(
            replay_log(&events),
            Err(Error::CorruptLog { last_valid: Some(2), .. })
        ));
    }

    #[test]
    fn resume_continues_the_log() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let mut exp = Experiment::create(config(1, 1, 4), EventLog::create(&path).unwrap(), None, Clock::System).unwrap();
        let start = exp.start_session("a").unwrap();
        exp.submit_choice(&start.trial.trial_id, Choice::AcceptProposal).unwrap();
        let live = exp.engine().clone();
        drop(exp);
        let mut resumed = Experiment::resume(EventLog::open(&path).unwrap(), None).unwrap();
        assert_eq!(resumed.engine(), &live);
        let ChoiceOutcome::Next { trial } = resumed.next_trial(&start.session.session_id).unwrap() else {
            panic!()
        };
        assert_eq!(trial.position, 2);
        resumed.submit_choice(&trial.trial_id, Choice::KeepCurrent).unwrap();
    }
}
