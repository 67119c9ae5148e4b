//! Chains, sessions and the trial lifecycle.
//!
//! Every mutation is split into a `plan_*` step that validates and computes
//! the resulting fact without touching state, and an `apply_*` step that
//! commits the fact. The experiment service appends each fact to its event
//! log between the two; library users can call the combined methods
//! ([`Engine::schedule_session`], [`Engine::next_trial`], ...) directly.
//!
//! Randomness is keyed by chain seed and trial index: the proposal for trial
//! `i` of a chain is drawn from `keyed_rng(chain.seed, "propose", i)`, so a
//! chain's trajectory is a function of its seed and the choices made, no
//! matter how sessions interleave.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_dim, Error, Result};
use crate::latent::{LatentSpace, LatentVector};
use crate::proposal::{propose, ProposalConfig};
use crate::respondent::{Choice, ChoicePrompt, Respondent};
use crate::rng::keyed_rng;

pub const DEFAULT_TRIALS_PER_SESSION: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub chain_id: String,
    pub category: String,
    pub space_id: String,
    pub seed: u64,
    /// Initial state followed by the state after each completed trial.
    pub states: Vec<LatentVector>,
    pub accept_count: u64,
    pub lease: Option<String>,
}

impl Chain {
    pub fn new(
        chain_id: impl Into<String>,
        category: impl Into<String>,
        space_id: impl Into<String>,
        seed: u64,
        initial: LatentVector,
    ) -> Self {
        Chain {
            chain_id: chain_id.into(),
            category: category.into(),
            space_id: space_id.into(),
            seed,
            states: vec![initial],
            accept_count: 0,
            lease: None,
        }
    }

    /// A chain starting from a seeded draw of the space's base distribution.
    pub fn seeded(
        chain_id: impl Into<String>,
        category: impl Into<String>,
        space: &LatentSpace,
        seed: u64,
    ) -> Self {
        let initial = space.sample_base(&mut keyed_rng(seed, "initial", 0));
        Chain::new(chain_id, category, space.space_id.clone(), seed, initial)
    }

    pub fn latest(&self) -> &LatentVector {
        self.states.last().expect("chain always holds its initial state")
    }

    pub fn completed_trials(&self) -> usize {
        self.states.len() - 1
    }

    fn push(&mut self, state: LatentVector, accepted: bool) {
        self.states.push(state);
        if accepted {
            self.accept_count += 1;
        }
    }
}

/// The state the next participant's first trial on this chain starts from.
pub fn handoff(chain: &Chain) -> &LatentVector {
    chain.latest()
}

/// States at `burn_in, burn_in + stride, ...`. Empty when `burn_in` is past
/// the end.
pub fn thin(chain: &Chain, burn_in: usize, stride: usize) -> Result<Vec<&LatentVector>> {
    thin_states(&chain.states, burn_in, stride)
}

pub fn thin_states(
    states: &[LatentVector],
    burn_in: usize,
    stride: usize,
) -> Result<Vec<&LatentVector>> {
    if stride == 0 {
        return Err(Error::Domain("stride must be at least 1".into()));
    }
    Ok(states.iter().skip(burn_in).step_by(stride).collect())
}

/// Default burn-in: the first 10% of the chain.
pub fn default_burn_in(chain_len: usize) -> usize {
    chain_len / 10
}

pub const DEFAULT_STRIDE: usize = 2;

pub fn acceptance_rate(chain: &Chain) -> Result<f64> {
    let trials = chain.completed_trials();
    if trials == 0 {
        return Err(Error::UndefinedStatistic(format!(
            "chain `{}` has no completed trials",
            chain.chain_id
        )));
    }
    Ok(chain.accept_count as f64 / trials as f64)
}

fn proposal_rng(chain: &Chain, index: u64) -> crate::rng::StreamRng {
    keyed_rng(chain.seed, "propose", index)
}

/// Runs `n_trials` Metropolis steps on `chain` with `respondent` as the
/// acceptance function, outside any session bookkeeping.
///
/// Proposals come from the same keyed streams the engine uses, so a chain
/// advanced here and one advanced through sessions agree given the same
/// choices.
pub fn run_chain(
    chain: &mut Chain,
    space: &LatentSpace,
    proposal: &ProposalConfig,
    respondent: &mut dyn Respondent,
    n_trials: usize,
) -> Result<()> {
    for _ in 0..n_trials {
        let index = chain.completed_trials() as u64;
        let current = chain.latest().clone();
        let candidate = propose(&current, space, proposal, &mut proposal_rng(chain, index))?;
        let choice = respondent.decide(&ChoicePrompt {
            chain_id: &chain.chain_id,
            category: &chain.category,
            index_in_chain: index,
            current: &current,
            proposal: &candidate,
        })?;
        match choice {
            Choice::AcceptProposal => chain.push(candidate, true),
            Choice::KeepCurrent => chain.push(current, false),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledTrial {
    pub chain_id: String,
    pub index_in_chain: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Completed,
    Discarded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub participant_id: String,
    pub schedule: Vec<ScheduledTrial>,
    pub trials_per_session: usize,
    pub status: SessionStatus,
    pub trial_ids: Vec<String>,
    pub answered: usize,
    pub confirmation_code: Option<String>,
    pub started_at_ms: u64,
    pub last_activity_ms: u64,
}

impl Session {
    /// Distinct chains in first-appearance order.
    pub fn chain_ids(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.schedule
            .iter()
            .filter(|s| seen.insert(s.chain_id.as_str()))
            .map(|s| s.chain_id.as_str())
            .collect()
    }

    pub fn is_finished(&self) -> bool {
        self.answered == self.trials_per_session
    }
}

/// The fact recorded when a session starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub session_id: String,
    pub participant_id: String,
    pub schedule: Vec<ScheduledTrial>,
    pub trials_per_session: usize,
    pub started_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: String,
    pub session_id: String,
    pub chain_id: String,
    pub category: String,
    pub index_in_chain: u64,
    pub current: LatentVector,
    pub proposal: LatentVector,
    /// Server-assigned screen position of the proposal.
    pub left_is_proposal: bool,
    pub choice: Option<Choice>,
    pub served_at_ms: u64,
    pub answered_at_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal_image: Option<String>,
}

impl TrialRecord {
    pub fn prompt(&self) -> ChoicePrompt<'_> {
        ChoicePrompt {
            chain_id: &self.chain_id,
            category: &self.category,
            index_in_chain: self.index_in_chain,
            current: &self.current,
            proposal: &self.proposal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ChainSnapshot {
    chain_id: String,
    states_len: usize,
    accept_count: u64,
}

/// Chain and session state for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Engine {
    space: LatentSpace,
    proposal: ProposalConfig,
    chains: BTreeMap<String, Chain>,
    sessions: BTreeMap<String, Session>,
    trials: BTreeMap<String, TrialRecord>,
    snapshots: BTreeMap<String, Vec<ChainSnapshot>>,
}

impl Engine {
    pub fn new(space: LatentSpace, proposal: ProposalConfig) -> Result<Self> {
        space.validate()?;
        proposal.validate()?;
        Ok(Engine {
            space,
            proposal,
            chains: BTreeMap::new(),
            sessions: BTreeMap::new(),
            trials: BTreeMap::new(),
            snapshots: BTreeMap::new(),
        })
    }

    pub fn space(&self) -> &LatentSpace {
        &self.space
    }

    pub fn proposal(&self) -> &ProposalConfig {
        &self.proposal
    }

    pub fn add_chain(&mut self, chain: Chain) -> Result<()> {
        if self.chains.contains_key(&chain.chain_id) {
            return Err(Error::Conflict(format!("duplicate chain `{}`", chain.chain_id)));
        }
        if chain.space_id != self.space.space_id {
            return Err(Error::Domain(format!(
                "chain `{}` belongs to space `{}`",
                chain.chain_id, chain.space_id
            )));
        }
        for s in &chain.states {
            self.space.check_state(s)?;
        }
        self.chains.insert(chain.chain_id.clone(), chain);
        Ok(())
    }

    pub fn chain(&self, chain_id: &str) -> Result<&Chain> {
        self.chains
            .get(chain_id)
            .ok_or_else(|| Error::NotFound(format!("chain `{chain_id}`")))
    }

    pub fn chains(&self) -> impl Iterator<Item = &Chain> {
        self.chains.values()
    }

    pub fn session(&self, session_id: &str) -> Result<&Session> {
        self.sessions
            .get(session_id)
            .ok_or_else(|| Error::NotFound(format!("session `{session_id}`")))
    }

    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.values()
    }

    pub fn trial(&self, trial_id: &str) -> Result<&TrialRecord> {
        self.trials
            .get(trial_id)
            .ok_or_else(|| Error::NotFound(format!("trial `{trial_id}`")))
    }

    pub fn trials(&self) -> impl Iterator<Item = &TrialRecord> {
        self.trials.values()
    }

    pub fn active_leases(&self) -> usize {
        self.chains.values().filter(|c| c.lease.is_some()).count()
    }

    /// Total answered trials over non-discarded sessions.
    pub fn recorded_samples(&self) -> usize {
        self.chains.values().map(Chain::completed_trials).sum()
    }

    /// Picks `k` unleased chains, least advanced first, ties broken by a
    /// seeded shuffle so categories mix across sessions.
    pub fn select_chains<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<String>> {
        let mut free: Vec<&Chain> = self.chains.values().filter(|c| c.lease.is_none()).collect();
        if k == 0 {
            return Err(Error::Domain("a session needs at least one chain".into()));
        }
        if free.len() < k {
            return Err(Error::RetryLater(format!(
                "{} unleased chains, {k} needed",
                free.len()
            )));
        }
        free.shuffle(rng);
        free.sort_by_key(|c| c.completed_trials());
        Ok(free.into_iter().take(k).map(|c| c.chain_id.clone()).collect())
    }

    pub fn plan_session<R: Rng + ?Sized>(
        &self,
        session_id: &str,
        participant_id: &str,
        chain_ids: &[String],
        trials_per_session: usize,
        rng: &mut R,
        now_ms: u64,
    ) -> Result<SessionPlan> {
        if chain_ids.is_empty() {
            return Err(Error::Domain("a session needs at least one chain".into()));
        }
        if self.sessions.contains_key(session_id) {
            return Err(Error::Conflict(format!("session `{session_id}` exists")));
        }
        let distinct: BTreeSet<&String> = chain_ids.iter().collect();
        if distinct.len() != chain_ids.len() {
            return Err(Error::Domain("chain listed twice".into()));
        }
        if trials_per_session == 0 || !trials_per_session.is_multiple_of(chain_ids.len()) {
            return Err(Error::Domain(format!(
                "{trials_per_session} trials cannot be split evenly over {} chains",
                chain_ids.len()
            )));
        }
        for id in chain_ids {
            let chain = self.chain(id)?;
            if let Some(holder) = &chain.lease {
                return Err(Error::Conflict(format!(
                    "chain `{id}` is leased to session `{holder}`"
                )));
            }
        }
        let mut order: Vec<&String> = chain_ids.iter().collect();
        order.shuffle(rng);
        let rounds = trials_per_session / chain_ids.len();
        let mut schedule = Vec::with_capacity(trials_per_session);
        for round in 0..rounds {
            for id in &order {
                let start = self.chains[*id].completed_trials() as u64;
                schedule.push(ScheduledTrial {
                    chain_id: (*id).clone(),
                    index_in_chain: start + round as u64,
                });
            }
        }
        Ok(SessionPlan {
            session_id: session_id.to_string(),
            participant_id: participant_id.to_string(),
            schedule,
            trials_per_session,
            started_at_ms: now_ms,
        })
    }

    pub fn apply_session_started(&mut self, plan: SessionPlan) -> Result<()> {
        if self.sessions.contains_key(&plan.session_id) {
            return Err(Error::Conflict(format!("session `{}` exists", plan.session_id)));
        }
        if plan.schedule.len() != plan.trials_per_session {
            return Err(Error::InvalidState("schedule length mismatch".into()));
        }
        let session = Session {
            session_id: plan.session_id.clone(),
            participant_id: plan.participant_id,
            schedule: plan.schedule,
            trials_per_session: plan.trials_per_session,
            status: SessionStatus::Active,
            trial_ids: Vec::new(),
            answered: 0,
            confirmation_code: None,
            started_at_ms: plan.started_at_ms,
            last_activity_ms: plan.started_at_ms,
        };
        let mut snapshot = Vec::new();
        for id in session.chain_ids() {
            let chain = self.chain(id)?;
            if chain.lease.is_some() {
                return Err(Error::Conflict(format!("chain `{id}` is leased")));
            }
            snapshot.push(ChainSnapshot {
                chain_id: id.to_string(),
                states_len: chain.states.len(),
                accept_count: chain.accept_count,
            });
        }
        for snap in &snapshot {
            self.chains.get_mut(&snap.chain_id).expect("checked").lease =
                Some(session.session_id.clone());
        }
        self.snapshots.insert(session.session_id.clone(), snapshot);
        self.sessions.insert(session.session_id.clone(), session);
        Ok(())
    }

    /// Round-robin session over a seeded permutation of `chain_ids`; leases
    /// every chain to the new session.
    pub fn schedule_session<R: Rng + ?Sized>(
        &mut self,
        session_id: &str,
        participant_id: &str,
        chain_ids: &[String],
        trials_per_session: usize,
        rng: &mut R,
    ) -> Result<&Session> {
        let plan = self.plan_session(
            session_id,
            participant_id,
            chain_ids,
            trials_per_session,
            rng,
            0,
        )?;
        self.apply_session_started(plan)?;
        self.session(session_id)
    }

    fn active_session(&self, session_id: &str) -> Result<&Session> {
        let session = self.session(session_id)?;
        if session.status != SessionStatus::Active {
            return Err(Error::Lifecycle(format!(
                "session `{session_id}` is {:?}",
                session.status
            )));
        }
        Ok(session)
    }

    /// The served, unanswered trial of a session, if any.
    pub fn pending_trial(&self, session_id: &str) -> Result<Option<&TrialRecord>> {
        let session = self.session(session_id)?;
        Ok(session
            .trial_ids
            .last()
            .map(|id| &self.trials[id])
            .filter(|t| t.choice.is_none()))
    }

    pub fn plan_next_trial(&self, session_id: &str, now_ms: u64) -> Result<TrialRecord> {
        let session = self.active_session(session_id)?;
        if self.pending_trial(session_id)?.is_some() {
            return Err(Error::Lifecycle(format!(
                "session `{session_id}` has an unanswered trial"
            )));
        }
        let position = session.trial_ids.len();
        let slot = session.schedule.get(position).ok_or_else(|| {
            Error::Lifecycle(format!("session `{session_id}` schedule is exhausted"))
        })?;
        let chain = self.chain(&slot.chain_id)?;
        if chain.completed_trials() as u64 != slot.index_in_chain {
            return Err(Error::InvalidState(format!(
                "chain `{}` is at trial {}, schedule expects {}",
                chain.chain_id,
                chain.completed_trials(),
                slot.index_in_chain
            )));
        }
        let current = chain.latest().clone();
        let proposal = propose(
            &current,
            &self.space,
            &self.proposal,
            &mut proposal_rng(chain, slot.index_in_chain),
        )?;
        let left_is_proposal =
            keyed_rng(chain.seed, "position", slot.index_in_chain).random::<bool>();
        Ok(TrialRecord {
            trial_id: format!("{session_id}-t{position:03}"),
            session_id: session_id.to_string(),
            chain_id: chain.chain_id.clone(),
            category: chain.category.clone(),
            index_in_chain: slot.index_in_chain,
            current,
            proposal,
            left_is_proposal,
            choice: None,
            served_at_ms: now_ms,
            answered_at_ms: None,
            current_image: None,
            proposal_image: None,
        })
    }

    pub fn apply_trial_served(&mut self, record: TrialRecord) -> Result<()> {
        let session = self.active_session(&record.session_id)?;
        let slot = session
            .schedule
            .get(session.trial_ids.len())
            .ok_or_else(|| Error::Lifecycle("schedule is exhausted".into()))?;
        if slot.chain_id != record.chain_id || slot.index_in_chain != record.index_in_chain {
            return Err(Error::InvalidState(format!(
                "trial `{}` does not match the schedule",
                record.trial_id
            )));
        }
        if self.trials.contains_key(&record.trial_id) {
            return Err(Error::Conflict(format!("trial `{}` exists", record.trial_id)));
        }
        let chain = self.chain(&record.chain_id)?;
        if chain.latest() != &record.current {
            return Err(Error::InvalidState(format!(
                "trial `{}` current state is not the chain head",
                record.trial_id
            )));
        }
        check_dim(self.space.dim, record.proposal.dim())?;
        let session = self.sessions.get_mut(&record.session_id).expect("checked");
        session.trial_ids.push(record.trial_id.clone());
        session.last_activity_ms = session.last_activity_ms.max(record.served_at_ms);
        self.trials.insert(record.trial_id.clone(), record);
        Ok(())
    }

    /// Materializes the next scheduled trial: the chain head against a fresh
    /// proposal.
    pub fn next_trial(&mut self, session_id: &str) -> Result<TrialRecord> {
        let record = self.plan_next_trial(session_id, 0)?;
        self.apply_trial_served(record.clone())?;
        Ok(record)
    }

    pub fn plan_choice(&self, trial_id: &str) -> Result<()> {
        let trial = self.trial(trial_id)?;
        if trial.choice.is_some() {
            return Err(Error::Conflict(format!("trial `{trial_id}` already answered")));
        }
        self.active_session(&trial.session_id)?;
        Ok(())
    }

    pub fn apply_choice(&mut self, trial_id: &str, choice: Choice, now_ms: u64) -> Result<&Chain> {
        self.plan_choice(trial_id)?;
        let trial = self.trials.get_mut(trial_id).expect("checked");
        trial.choice = Some(choice);
        trial.answered_at_ms = Some(now_ms);
        let next = match choice {
            Choice::AcceptProposal => trial.proposal.clone(),
            Choice::KeepCurrent => trial.current.clone(),
        };
        let chain_id = trial.chain_id.clone();
        let session = self.sessions.get_mut(&trial.session_id).expect("checked");
        session.answered += 1;
        session.last_activity_ms = session.last_activity_ms.max(now_ms);
        let chain = self.chains.get_mut(&chain_id).expect("trial chain exists");
        chain.push(next, choice.is_accept());
        Ok(chain)
    }

    /// Answers a served trial; a second answer for the same trial is a
    /// conflict and leaves the chain unchanged.
    pub fn record_choice(&mut self, trial_id: &str, choice: Choice) -> Result<&Chain> {
        self.apply_choice(trial_id, choice, 0)
    }

    /// Validates completion and returns the confirmation code to record.
    pub fn plan_complete(&self, session_id: &str) -> Result<String> {
        let session = self.active_session(session_id)?;
        if !session.is_finished() {
            return Err(Error::Lifecycle(format!(
                "session `{session_id}` has {} of {} answers",
                session.answered, session.trials_per_session
            )));
        }
        let mut hasher = Sha256::new();
        hasher.update(session_id.as_bytes());
        for id in session.chain_ids() {
            for v in self.chains[id].latest().values() {
                hasher.update(v.to_le_bytes());
            }
        }
        Ok(hex::encode(&hasher.finalize()[..4]).to_uppercase())
    }

    pub fn apply_session_completed(&mut self, session_id: &str, code: String) -> Result<()> {
        self.plan_complete(session_id)?;
        let session = self.sessions.get_mut(session_id).expect("checked");
        session.status = SessionStatus::Completed;
        session.confirmation_code = Some(code);
        let ids: Vec<String> = session.chain_ids().into_iter().map(String::from).collect();
        for id in ids {
            self.chains.get_mut(&id).expect("chain exists").lease = None;
        }
        Ok(())
    }

    pub fn complete_session(&mut self, session_id: &str) -> Result<String> {
        let code = self.plan_complete(session_id)?;
        self.apply_session_completed(session_id, code.clone())?;
        Ok(code)
    }

    pub fn plan_discard(&self, session_id: &str) -> Result<()> {
        let session = self.session(session_id)?;
        match session.status {
            SessionStatus::Discarded => {
                return Err(Error::Lifecycle(format!(
                    "session `{session_id}` is already discarded"
                )))
            }
            SessionStatus::Active => {}
            SessionStatus::Completed => {
                // only while no later session has advanced its chains
                for snap in &self.snapshots[session_id] {
                    let chain = self.chain(&snap.chain_id)?;
                    let own = session
                        .trial_ids
                        .iter()
                        .filter(|t| {
                            let t = &self.trials[*t];
                            t.chain_id == snap.chain_id && t.choice.is_some()
                        })
                        .count();
                    if chain.lease.is_some() || chain.states.len() != snap.states_len + own {
                        return Err(Error::Conflict(format!(
                            "chain `{}` has moved on since session `{session_id}`",
                            snap.chain_id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_session_discarded(&mut self, session_id: &str) -> Result<Vec<String>> {
        self.plan_discard(session_id)?;
        let snapshot = self.snapshots[session_id].clone();
        let mut rolled_back = Vec::with_capacity(snapshot.len());
        for snap in snapshot {
            let chain = self.chains.get_mut(&snap.chain_id).expect("chain exists");
            chain.states.truncate(snap.states_len);
            chain.accept_count = snap.accept_count;
            if chain.lease.as_deref() == Some(session_id) {
                chain.lease = None;
            }
            rolled_back.push(snap.chain_id);
        }
        self.sessions.get_mut(session_id).expect("checked").status = SessionStatus::Discarded;
        Ok(rolled_back)
    }

    /// Restores every chain of the session to its state before the session
    /// began and releases the leases. Trials stay on record.
    pub fn discard_session(&mut self, session_id: &str) -> Result<Vec<String>> {
        self.apply_session_discarded(session_id)
    }

    /// Active sessions with no activity for more than `idle_ms`.
    pub fn idle_sessions(&self, now_ms: u64, idle_ms: u64) -> Vec<String> {
        self.sessions
            .values()
            .filter(|s| {
                s.status == SessionStatus::Active
                    && now_ms.saturating_sub(s.last_activity_ms) > idle_ms
            })
            .map(|s| s.session_id.clone())
            .collect()
    }
}
