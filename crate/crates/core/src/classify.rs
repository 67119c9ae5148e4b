//! Classification of externally embedded images by nearest mean or by
//! maximum log-density, and per-class accuracy tables.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::analysis::GmmModel;
use crate::error::{check_dim, Error, Result};
use crate::latent::LatentVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledVector {
    pub source_id: String,
    pub true_label: String,
    #[serde(rename = "values")]
    pub vector: LatentVector,
}

/// Label of the Euclidean-nearest mean; ties go to the lexicographically
/// first label.
pub fn nearest_mean_classify(x: &LatentVector, means: &BTreeMap<String, LatentVector>) -> Result<String> {
    if means.len() < 2 {
        return Err(Error::Domain("need at least two class means".into()));
    }
    let mut best: Option<(&String, f64)> = None;
    for (label, m) in means {
        check_dim(m.dim(), x.dim())?;
        let d = x.squared_distance(m);
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((label, d));
        }
    }
    Ok(best.expect("non-empty").0.clone())
}

/// Label of the model with the highest log-density at `x`; ties go to the
/// lexicographically first label.
pub fn density_classify(x: &LatentVector, models: &BTreeMap<String, GmmModel>) -> Result<String> {
    if models.is_empty() {
        return Err(Error::Domain("no density models".into()));
    }
    let mut best: Option<(&String, f64)> = None;
    for (label, m) in models {
        check_dim(m.dim(), x.dim())?;
        let lp = m.log_density(x)?;
        if best.is_none_or(|(_, b)| lp > b) {
            best = Some((label, lp));
        }
    }
    Ok(best.expect("non-empty").0.clone())
}

pub trait DecisionRule {
    fn classify(&self, x: &LatentVector) -> Result<String>;
}

#[derive(Debug, Clone)]
pub struct NearestMean(pub BTreeMap<String, LatentVector>);

impl DecisionRule for NearestMean {
    fn classify(&self, x: &LatentVector) -> Result<String> {
        nearest_mean_classify(x, &self.0)
    }
}

#[derive(Debug, Clone)]
pub struct MaxDensity(pub BTreeMap<String, GmmModel>);

impl DecisionRule for MaxDensity {
    fn classify(&self, x: &LatentVector) -> Result<String> {
        density_classify(x, &self.0)
    }
}

impl<F> DecisionRule for F
where
    F: Fn(&LatentVector) -> Result<String>,
{
    fn classify(&self, x: &LatentVector) -> Result<String> {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub per_class: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, usize>,
    pub overall: f64,
    pub chance: f64,
}

pub fn evaluate_accuracy(dataset: &[LabeledVector], rule: &dyn DecisionRule) -> Result<AccuracyTable> {
    if dataset.is_empty() {
        return Err(Error::Domain("empty dataset".into()));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut correct: BTreeMap<String, usize> = BTreeMap::new();
    for item in dataset {
        let predicted = rule.classify(&item.vector)?;
        *counts.entry(item.true_label.clone()).or_default() += 1;
        let hit = correct.entry(item.true_label.clone()).or_default();
        if predicted == item.true_label {
            *hit += 1;
        }
    }
    let per_class = counts
        .iter()
        .map(|(k, n)| (k.clone(), correct[k] as f64 / *n as f64))
        .collect();
    let overall = correct.values().sum::<usize>() as f64 / dataset.len() as f64;
    Ok(AccuracyTable {
        per_class,
        chance: 1.0 / counts.len() as f64,
        counts,
        overall,
    })
}

impl fmt::Display for AccuracyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .per_class
            .keys()
            .map(String::len)
            .chain(["overall".len()])
            .max()
            .unwrap_or(7);
        writeln!(f, "{:<width$}  {:>8}  {:>6}", "class", "accuracy", "n")?;
        for (label, acc) in &self.per_class {
            writeln!(f, "{label:<width$}  {acc:>8.3}  {:>6}", self.counts[label])?;
        }
        let total: usize = self.counts.values().sum();
        writeln!(f, "{:<width$}  {:>8.3}  {total:>6}", "overall", self.overall)?;
        write!(f, "{:<width$}  {:>8.3}", "chance", self.chance)
    }
}

/// Reads line-delimited `{source_id, true_label, values}` records; blank
/// lines are skipped.
pub fn read_dataset<R: BufRead>(reader: R) -> Result<Vec<LabeledVector>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: LabeledVector = serde_json::from_str(&line)
            .map_err(|e| Error::Domain(format!("dataset line {}: {e}", i + 1)))?;
        if let Some(first) = out.first() {
            let first: &LabeledVector = first;
            check_dim(first.vector.dim(), item.vector.dim())?;
        }
        out.push(item);
    }
    Ok(out)
}

pub fn write_dataset<W: Write>(mut writer: W, items: &[LabeledVector]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
