//! Classification-images baseline over random latent stimuli.
//!
//! Each trial shows two independent draws from the space's base
//! distribution. Two template estimators are provided: the four-cell
//! estimator for tasks with a known correct class, and the choice-only
//! estimator (mean chosen minus mean unchosen) for pure-noise stimuli.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::latent::{LatentSpace, LatentVector};
use crate::respondent::{barker_probability_log, RespondentConfig, TargetDensity};
use crate::rng::keyed_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CiLabel {
    A,
    B,
}

impl CiLabel {
    fn index(self) -> usize {
        match self {
            CiLabel::A => 0,
            CiLabel::B => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiTrial {
    pub trial_id: String,
    pub category: String,
    pub stimulus_a: LatentVector,
    pub stimulus_b: LatentVector,
    #[serde(default)]
    pub true_class: Option<CiLabel>,
    #[serde(default)]
    pub chosen: Option<CiLabel>,
}

impl CiTrial {
    pub fn chosen_and_unchosen(&self) -> Option<(&LatentVector, &LatentVector)> {
        self.chosen.map(|c| match c {
            CiLabel::A => (&self.stimulus_a, &self.stimulus_b),
            CiLabel::B => (&self.stimulus_b, &self.stimulus_a),
        })
    }
}

/// Two independent base-distribution draws; unanswered.
pub fn generate_ci_trial<R: Rng + ?Sized>(
    space: &LatentSpace,
    trial_id: impl Into<String>,
    category: impl Into<String>,
    rng: &mut R,
) -> CiTrial {
    let stimulus_a = space.sample_base(rng);
    let stimulus_b = space.sample_base(rng);
    CiTrial {
        trial_id: trial_id.into(),
        category: category.into(),
        stimulus_a,
        stimulus_b,
        true_class: None,
        chosen: None,
    }
}

/// Simulated choice between the two stimuli: `A` with Barker probability
/// `p(a) / (p(a) + p(b))`, with the configured lapse.
pub fn simulated_ci_choice<R: Rng + ?Sized>(
    trial: &CiTrial,
    target: &TargetDensity,
    config: &RespondentConfig,
    rng: &mut R,
) -> Result<CiLabel> {
    let la = target.log_density(&trial.stimulus_a)?;
    let lb = target.log_density(&trial.stimulus_b)?;
    let p_a = if rng.random::<f64>() < config.lapse_rate {
        0.5
    } else {
        barker_probability_log(la, lb)
    };
    Ok(if rng.random::<f64>() < p_a {
        CiLabel::A
    } else {
        CiLabel::B
    })
}

/// Runs `n_trials` simulated trials for each target. Trial `i` of category
/// `c` draws from its own stream keyed by `(seed, "ci/c", i)`.
pub fn run_ci_experiment(
    space: &LatentSpace,
    targets: &[TargetDensity],
    n_trials: usize,
    config: &RespondentConfig,
    seed: u64,
) -> Result<Vec<CiTrial>> {
    config.validate()?;
    let mut trials = Vec::with_capacity(targets.len() * n_trials);
    for target in targets {
        check_dim(space.dim, target.dim())?;
        let key = format!("ci/{}", target.category);
        for i in 0..n_trials {
            let mut rng = keyed_rng(seed, &key, i as u64);
            let mut trial = generate_ci_trial(
                space,
                format!("ci-{}-{i:05}", target.category),
                target.category.clone(),
                &mut rng,
            );
            trial.chosen = Some(simulated_ci_choice(&trial, target, config, &mut rng)?);
            trials.push(trial);
        }
    }
    Ok(trials)
}

fn accumulate(sum: &mut Option<Vec<f64>>, v: &LatentVector) -> Result<()> {
    match sum {
        None => *sum = Some(v.values().to_vec()),
        Some(s) => {
            check_dim(s.len(), v.dim())?;
            for (a, b) in s.iter_mut().zip(v.values()) {
                *a += b;
            }
        }
    }
    Ok(())
}

/// Four-cell template `(n_AA + n_BA) - (n_AB + n_BB)` where `n_XY` is the
/// mean noise field over trials with true class `X` and response `Y`.
/// `stimulus_a` carries a trial's noise field; empty cells contribute zero.
pub fn ci_template_two_class(trials: &[CiTrial]) -> Result<LatentVector> {
    let mut sums: [[Option<Vec<f64>>; 2]; 2] = Default::default();
    let mut counts = [[0usize; 2]; 2];
    for t in trials {
        let (Some(truth), Some(chosen)) = (t.true_class, t.chosen) else {
            continue;
        };
        accumulate(&mut sums[truth.index()][chosen.index()], &t.stimulus_a)?;
        counts[truth.index()][chosen.index()] += 1;
    }
    let dim = sums
        .iter()
        .flatten()
        .flatten()
        .map(Vec::len)
        .next()
        .ok_or_else(|| Error::Domain("all four response cells are empty".into()))?;
    let cell_mean = |x: usize, y: usize| -> Vec<f64> {
        match &sums[x][y] {
            Some(s) => s.iter().map(|v| v / counts[x][y] as f64).collect(),
            None => vec![0.0; dim],
        }
    };
    let (aa, ba, ab, bb) = (cell_mean(0, 0), cell_mean(1, 0), cell_mean(0, 1), cell_mean(1, 1));
    Ok(LatentVector(
        (0..dim).map(|i| (aa[i] + ba[i]) - (ab[i] + bb[i])).collect(),
    ))
}

/// Mean chosen stimulus minus mean unchosen stimulus over answered trials.
pub fn ci_template_choice_only(trials: &[CiTrial]) -> Result<LatentVector> {
    let mut chosen_sum = None;
    let mut unchosen_sum = None;
    let mut n = 0usize;
    for t in trials {
        if let Some((c, u)) = t.chosen_and_unchosen() {
            accumulate(&mut chosen_sum, c)?;
            accumulate(&mut unchosen_sum, u)?;
            n += 1;
        }
    }
    let (Some(c), Some(u)) = (chosen_sum, unchosen_sum) else {
        return Err(Error::Domain("no answered trials".into()));
    };
    Ok(LatentVector(
        c.iter().zip(&u).map(|(a, b)| (a - b) / n as f64).collect(),
    ))
}
