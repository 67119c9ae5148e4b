//! Diagonal Gaussian mixture fitting by expectation-maximization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::{log_sum_exp, mixture_log_density, validate_components, Component};
use crate::error::{check_dim, Error, Result};
use crate::latent::LatentVector;
use crate::respondent::TargetDensity;
use crate::rng::{keyed_rng, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub n_components: usize,
    pub max_iterations: usize,
    /// Stop when the mean per-sample log-likelihood improves by less than this.
    pub tolerance: f64,
    pub variance_floor: f64,
    pub n_restarts: usize,
    pub seed: u64,
}

impl EmConfig {
    pub fn new(n_components: usize) -> Self {
        EmConfig {
            n_components,
            max_iterations: 200,
            tolerance: 1e-7,
            variance_floor: 1e-6,
            n_restarts: 5,
            seed: 0,
        }
    }

    /// `min(60, n_samples / 20)` components, at least one.
    pub fn for_samples(n_samples: usize) -> Self {
        Self::new((n_samples / 20).clamp(1, 60))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 {
            return Err(Error::Domain("n_components must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Domain("tolerance must be positive".into()));
        }
        if !(self.variance_floor > 0.0) {
            return Err(Error::Domain("variance_floor must be positive".into()));
        }
        if self.n_restarts == 0 {
            return Err(Error::Domain("n_restarts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub category: String,
    pub components: Vec<Component>,
    pub train_log_likelihood: f64,
}

impl GmmModel {
    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, |c| c.mean.dim())
    }

    pub fn log_density(&self, x: &LatentVector) -> Result<f64> {
        mixture_log_density(&self.components, x.values())
    }

    pub fn validate(&self, variance_floor: f64) -> Result<()> {
        validate_components(&self.components, variance_floor).map(|_| ())
    }

    /// The same mixture as a respondent target.
    pub fn to_target(&self) -> TargetDensity {
        TargetDensity {
            category: self.category.clone(),
            components: self.components.clone(),
        }
    }
}

/// Per-restart log-likelihood traces alongside the selected model.
#[derive(Debug, Clone)]
pub struct EmReport {
    pub model: GmmModel,
    /// Total log-likelihood after every iteration, one trace per restart.
    pub traces: Vec<Vec<f64>>,
    pub best_restart: usize,
}

pub fn fit_gmm(category: &str, samples: &[LatentVector], config: &EmConfig) -> Result<GmmModel> {
    fit_gmm_traced(category, samples, config).map(|r| r.model)
}

/// EM with log-domain responsibilities; the best of `n_restarts` runs by
/// final log-likelihood is returned.
pub fn fit_gmm_traced(
    category: &str,
    samples: &[LatentVector],
    config: &EmConfig,
) -> Result<EmReport> {
    config.validate()?;
    if samples.len() < config.n_components {
        return Err(Error::Domain(format!(
            "{} samples cannot support {} components",
            samples.len(),
            config.n_components
        )));
    }
    let dim = samples[0].dim();
    if dim == 0 {
        return Err(Error::Domain("zero-dimensional samples".into()));
    }
    for s in samples {
        check_dim(dim, s.dim())?;
        if !s.is_finite() {
            return Err(Error::Domain("non-finite sample".into()));
        }
    }
    let data: Vec<&[f64]> = samples.iter().map(|s| s.values()).collect();

    let mut best: Option<(usize, Vec<Component>, f64)> = None;
    let mut traces = Vec::with_capacity(config.n_restarts);
    for restart in 0..config.n_restarts {
        let mut rng = keyed_rng(config.seed, "em-restart", restart as u64);
        let (components, ll, trace) = run_em(&data, dim, config, &mut rng);
        traces.push(trace);
        if best.as_ref().is_none_or(|(_, _, b)| ll > *b) {
            best = Some((restart, components, ll));
        }
    }
    let (best_restart, components, ll) = best.expect("at least one restart");
    Ok(EmReport {
        model: GmmModel {
            category: category.to_string(),
            components,
            train_log_likelihood: ll,
        },
        traces,
        best_restart,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Distance-squared weighted seeding of the component means.
fn seed_means(data: &[&[f64]], k: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut means = vec![data[rng.random_range(0..n)].to_vec()];
    let mut nearest: Vec<f64> = data.iter().map(|x| sq_dist(x, &means[0])).collect();
    while means.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                if u < *d {
                    idx = i;
                    break;
                }
                u -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let m = data[pick].to_vec();
        for (d, x) in nearest.iter_mut().zip(data) {
            *d = d.min(sq_dist(x, &m));
        }
        means.push(m);
    }
    means
}

/// E-step: fills `resp` (row-major `n x k`) and returns the total
/// log-likelihood.
fn e_step(data: &[&[f64]], components: &[Component], resp: &mut [f64]) -> f64 {
    let k = components.len();
    let log_w: Vec<f64> = components.iter().map(|c| c.weight.ln()).collect();
    let mut total = 0.0;
    let mut terms = vec![0.0; k];
    for (i, x) in data.iter().enumerate() {
        for (j, c) in components.iter().enumerate() {
            terms[j] = log_w[j] + c.log_pdf(x);
        }
        let lse = log_sum_exp(&terms);
        total += lse;
        for j in 0..k {
            resp[i * k + j] = (terms[j] - lse).exp();
        }
    }
    total
}

fn m_step(data: &[&[f64]], resp: &[f64], components: &mut [Component], floor: f64) {
    let n = data.len();
    let k = components.len();
    let dim = components[0].mean.dim();
    for (j, c) in components.iter_mut().enumerate() {
        let nk: f64 = (0..n).map(|i| resp[i * k + j]).sum();
        c.weight = nk / n as f64;
        if nk < 1e-12 * n as f64 {
            // starved component: parameters kept, weight tracks its mass
            continue;
        }
        let mut mean = vec![0.0; dim];
        for (i, x) in data.iter().enumerate() {
            let r = resp[i * k + j];
            for (m, v) in mean.iter_mut().zip(x.iter()) {
                *m += r * v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nk);
        let mut var = vec![0.0; dim];
        for (i, x) in data.iter().enumerate() {
            let r = resp[i * k + j];
            for ((s, v), m) in var.iter_mut().zip(x.iter()).zip(&mean) {
                *s += r * (v - m) * (v - m);
            }
        }
        for v in var.iter_mut() {
            *v = (*v / nk).max(floor);
        }
        c.mean = LatentVector(mean);
        c.covariance = var;
    }
    // renormalize away rounding drift in the weights
    let total: f64 = components.iter().map(|c| c.weight).sum();
    components.iter_mut().for_each(|c| c.weight /= total);
}

fn run_em(
    data: &[&[f64]],
    dim: usize,
    config: &EmConfig,
    rng: &mut StreamRng,
) -> (Vec<Component>, f64, Vec<f64>) {
    let n = data.len();
    let k = config.n_components;
    let mut global_mean = vec![0.0; dim];
    for x in data {
        for (m, v) in global_mean.iter_mut().zip(x.iter()) {
            *m += v / n as f64;
        }
    }
    let mut global_var = vec![0.0; dim];
    for x in data {
        for ((s, v), m) in global_var.iter_mut().zip(x.iter()).zip(&global_mean) {
            *s += (v - m) * (v - m) / n as f64;
        }
    }
    global_var.iter_mut().for_each(|v| *v = v.max(config.variance_floor));

    let mut components: Vec<Component> = if k == 1 {
        vec![Component {
            weight: 1.0,
            mean: LatentVector(global_mean),
            covariance: global_var,
        }]
    } else {
        seed_means(data, k, rng)
            .into_iter()
            .map(|m| Component {
                weight: 1.0 / k as f64,
                mean: LatentVector(m),
                covariance: global_var.clone(),
            })
            .collect()
    };

    let mut resp = vec![0.0; n * k];
    let mut ll = e_step(data, &components, &mut resp);
    let mut trace = vec![ll];
    for _ in 0..config.max_iterations {
        m_step(data, &resp, &mut components, config.variance_floor);
        let next = e_step(data, &components, &mut resp);
        trace.push(next);
        let gain = (next - ll) / n as f64;
        ll = next;
        if gain < config.tolerance {
            break;
        }
    }
    (components, ll, trace)
}

/// Component means by descending weight; equal weights keep component order.
pub fn top_modes(model: &GmmModel, n: usize) -> Vec<LatentVector> {
    let mut order: Vec<usize> = (0..model.components.len()).collect();
    order.sort_by(|&a, &b| {
        model.components[b]
            .weight
            .total_cmp(&model.components[a].weight)
    });
    order
        .into_iter()
        .take(n)
        .map(|i| model.components[i].mean.clone())
        .collect()
}
