//! Category means, density models, modes and discriminant projections from
//! exported samples.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::gmm::{fit_gmm, top_modes, EmConfig, GmmModel};
use super::lda::{fisher_lda, LdaProjection};
use super::means::mean_of;
use crate::ci::{ci_template_choice_only, CiTrial};
use crate::error::{Error, Result};
use crate::latent::LatentVector;
use crate::samples::SampleRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mcmcp,
    Ci,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    /// Mixture components per category; `None` picks the default for the
    /// sample count.
    pub n_components: Option<usize>,
    pub n_restarts: usize,
    pub n_modes: usize,
    pub lda_dim: usize,
    pub seed: u64,
    pub fit_densities: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            n_components: None,
            n_restarts: EmConfig::new(1).n_restarts,
            n_modes: 50,
            lda_dim: 2,
            seed: 0,
            fit_densities: true,
        }
    }
}

/// One sample in discriminant coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub category: String,
    pub chain_id: Option<String>,
    pub x: f64,
    pub y: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub method: Method,
    /// Category means for MCMCP samples, choice templates for CI trials.
    pub means: BTreeMap<String, LatentVector>,
    pub models: BTreeMap<String, GmmModel>,
    pub modes: BTreeMap<String, Vec<LatentVector>>,
    pub lda: Option<LdaProjection>,
    #[serde(skip)]
    pub projected: Vec<ProjectedPoint>,
}

/// Analyzes one method's records; mixing MCMCP and CI records is an error.
pub fn analyze_samples(records: &[SampleRecord], options: &AnalyzeOptions) -> Result<AnalysisReport> {
    let first = records
        .first()
        .ok_or_else(|| Error::Domain("no samples to analyze".into()))?;
    match first {
        SampleRecord::Mcmcp { .. } => analyze_mcmcp(records, options),
        SampleRecord::Ci { .. } => analyze_ci(records),
    }
}

fn analyze_ci(records: &[SampleRecord]) -> Result<AnalysisReport> {
    let mut by_class: BTreeMap<String, Vec<CiTrial>> = BTreeMap::new();
    for r in records {
        let trial = r
            .to_ci_trial()
            .ok_or_else(|| Error::Domain("sample file mixes MCMCP and CI records".into()))?;
        by_class.entry(trial.category.clone()).or_default().push(trial);
    }
    let means = by_class
        .iter()
        .map(|(k, trials)| Ok((k.clone(), ci_template_choice_only(trials)?)))
        .collect::<Result<_>>()?;
    Ok(AnalysisReport {
        method: Method::Ci,
        means,
        models: BTreeMap::new(),
        modes: BTreeMap::new(),
        lda: None,
        projected: Vec::new(),
    })
}

fn analyze_mcmcp(records: &[SampleRecord], options: &AnalyzeOptions) -> Result<AnalysisReport> {
    let mut by_class: BTreeMap<String, Vec<(String, LatentVector)>> = BTreeMap::new();
    for r in records {
        match r {
            SampleRecord::Mcmcp {
                chain_id,
                category,
                values,
                ..
            } => by_class
                .entry(category.clone())
                .or_default()
                .push((chain_id.clone(), values.clone())),
            SampleRecord::Ci { .. } => {
                return Err(Error::Domain("sample file mixes MCMCP and CI records".into()))
            }
        }
    }
    let mut means = BTreeMap::new();
    let mut models = BTreeMap::new();
    let mut modes = BTreeMap::new();
    for (label, samples) in &by_class {
        let vectors: Vec<LatentVector> = samples.iter().map(|(_, v)| v.clone()).collect();
        means.insert(label.clone(), mean_of(vectors.iter())?);
        if options.fit_densities {
            let mut em = match options.n_components {
                Some(k) => EmConfig::new(k),
                None => EmConfig::for_samples(vectors.len()),
            };
            em.n_restarts = options.n_restarts;
            em.seed = options.seed;
            let model = fit_gmm(label, &vectors, &em)?;
            modes.insert(label.clone(), top_modes(&model, options.n_modes));
            models.insert(label.clone(), model);
        }
    }

    let dim = means.values().next().map_or(0, LatentVector::dim);
    let out_dim = options.lda_dim.min(by_class.len().saturating_sub(1)).min(dim);
    let mut lda = None;
    let mut projected = Vec::new();
    if out_dim >= 1 && by_class.values().all(|s| s.len() >= 2) {
        let grouped: BTreeMap<String, Vec<LatentVector>> = by_class
            .iter()
            .map(|(k, s)| (k.clone(), s.iter().map(|(_, v)| v.clone()).collect()))
            .collect();
        let projection = fisher_lda(&grouped, out_dim)?;
        for (label, samples) in &by_class {
            for (chain_id, v) in samples {
                let p = projection.project(v)?;
                projected.push(ProjectedPoint {
                    category: label.clone(),
                    chain_id: Some(chain_id.clone()),
                    x: p[0],
                    y: p.get(1).copied(),
                });
            }
        }
        lda = Some(projection);
    }
    Ok(AnalysisReport {
        method: Method::Mcmcp,
        means,
        models,
        modes,
        lda,
        projected,
    })
}
