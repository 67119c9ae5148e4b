//! Experiment configuration, read from TOML or JSON.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::{Chain, DEFAULT_TRIALS_PER_SESSION};
use crate::error::{Error, Result};
use crate::gateway::DecoderBinding;
use crate::latent::LatentSpace;
use crate::proposal::ProposalConfig;
use crate::respondent::{RespondentConfig, RespondentKind, TargetDensity};
use crate::rng::derive_seed;

fn default_chains_per_category() -> usize {
    4
}

fn default_trials_per_session() -> usize {
    DEFAULT_TRIALS_PER_SESSION
}

fn default_experiment_id() -> String {
    "experiment".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_experiment_id")]
    pub experiment_id: String,
    pub space: LatentSpace,
    pub proposal: ProposalConfig,
    pub categories: Vec<String>,
    #[serde(default = "default_chains_per_category")]
    pub chains_per_category: usize,
    #[serde(default = "default_trials_per_session")]
    pub trials_per_session: usize,
    /// Chains interleaved in one session; defaults to the largest divisor of
    /// `trials_per_session` not exceeding the number of chains.
    #[serde(default)]
    pub chains_per_session: Option<usize>,
    #[serde(default)]
    pub respondent: RespondentConfig,
    /// Target densities for the simulated respondent, one per category.
    #[serde(default)]
    pub targets: Vec<TargetDensity>,
    #[serde(default)]
    pub decoder: DecoderBinding,
    #[serde(default)]
    pub master_seed: u64,
    /// Active sessions idle for longer than this are discarded.
    #[serde(default)]
    pub idle_timeout_ms: Option<u64>,
}

impl ExperimentConfig {
    /// A simulated experiment with default session settings.
    pub fn simulated(space: LatentSpace, proposal: ProposalConfig, targets: Vec<TargetDensity>, master_seed: u64) -> Self {
        ExperimentConfig {
            experiment_id: default_experiment_id(),
            space,
            proposal,
            categories: targets.iter().map(|t| t.category.clone()).collect(),
            chains_per_category: default_chains_per_category(),
            trials_per_session: default_trials_per_session(),
            chains_per_session: None,
            respondent: RespondentConfig::default(),
            targets,
            decoder: DecoderBinding::default(),
            master_seed,
            idle_timeout_ms: None,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)
                .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?,
            _ => toml::from_str(&text)
                .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn total_chains(&self) -> usize {
        self.categories.len() * self.chains_per_category
    }

    pub fn effective_chains_per_session(&self) -> usize {
        self.chains_per_session.unwrap_or_else(|| {
            (1..=self.total_chains().min(self.trials_per_session))
                .rev()
                .find(|k| self.trials_per_session.is_multiple_of(*k))
                .unwrap_or(1)
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment_id.is_empty() {
            return Err(Error::config("experiment_id", "must not be empty"));
        }
        self.space.validate()?;
        self.proposal.validate()?;
        self.respondent.validate()?;
        if self.respondent.kind == RespondentKind::Human {
            self.decoder.validate()?;
        }
        if self.categories.is_empty() {
            return Err(Error::config("categories", "at least one category is required"));
        }
        let mut seen = BTreeSet::new();
        for (i, c) in self.categories.iter().enumerate() {
            if c.is_empty() || c.contains('/') {
                return Err(Error::config(format!("categories[{i}]"), "labels must be non-empty and free of `/`"));
            }
            if !seen.insert(c) {
                return Err(Error::config(format!("categories[{i}]"), format!("duplicate label `{c}`")));
            }
        }
        if self.chains_per_category == 0 {
            return Err(Error::config("chains_per_category", "must be at least 1"));
        }
        if self.trials_per_session == 0 {
            return Err(Error::config("trials_per_session", "must be at least 1"));
        }
        if let Some(k) = self.chains_per_session {
            if k == 0 || k > self.total_chains() {
                return Err(Error::config(
                    "chains_per_session",
                    format!("must lie in 1..={}", self.total_chains()),
                ));
            }
            if !self.trials_per_session.is_multiple_of(k) {
                return Err(Error::config(
                    "chains_per_session",
                    format!("must divide trials_per_session ({})", self.trials_per_session),
                ));
            }
        }
        if self.idle_timeout_ms == Some(0) {
            return Err(Error::config("idle_timeout_ms", "must be positive"));
        }
        let mut target_labels = BTreeSet::new();
        for (i, t) in self.targets.iter().enumerate() {
            let path = format!("targets[{i}]");
            t.validate().map_err(|e| Error::config(&path, e.to_string()))?;
            if t.dim() != self.space.dim {
                return Err(Error::config(
                    format!("{path}.components"),
                    format!("dimension {} does not match space.dim {}", t.dim(), self.space.dim),
                ));
            }
            if !seen.contains(&t.category) {
                return Err(Error::config(
                    format!("{path}.category"),
                    format!("`{}` is not a configured category", t.category),
                ));
            }
            if !target_labels.insert(&t.category) {
                return Err(Error::config(format!("{path}.category"), "duplicate target"));
            }
        }
        if self.respondent.kind == RespondentKind::SimulatedBarker {
            if let Some(missing) = self.categories.iter().find(|c| !target_labels.contains(c)) {
                return Err(Error::config(
                    "targets",
                    format!("the simulated respondent needs a target for `{missing}`"),
                ));
            }
        }
        Ok(())
    }

    pub fn chain_ids(&self) -> Vec<(String, String)> {
        self.categories
            .iter()
            .flat_map(|c| (0..self.chains_per_category).map(move |j| (format!("{c}/{j}"), c.clone())))
            .collect()
    }

    /// Fresh chains, each seeded by a keyed split of the master seed on its id.
    pub fn initial_chains(&self) -> Vec<Chain> {
        self.chain_ids()
            .into_iter()
            .map(|(id, category)| {
                let seed = derive_seed(self.master_seed, &format!("chain/{id}"));
                Chain::seeded(id, category, &self.space, seed)
            })
            .collect()
    }
}
