//! Diagonal-covariance Gaussian mixtures evaluated in log space.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::latent::LatentVector;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// One mixture component; `covariance` holds the diagonal entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: LatentVector,
    pub covariance: Vec<f64>,
}

impl Component {
    pub fn isotropic(weight: f64, mean: LatentVector, variance: f64) -> Self {
        let dim = mean.dim();
        Component {
            weight,
            mean,
            covariance: vec![variance; dim],
        }
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        diag_gaussian_log_pdf(x, self.mean.values(), &self.covariance)
    }
}

pub fn diag_gaussian_log_pdf(x: &[f64], mean: &[f64], variance: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((xi, mi), vi) in x.iter().zip(mean).zip(variance) {
        let d = xi - mi;
        acc += d * d / vi + vi.ln() + LN_2PI;
    }
    -0.5 * acc
}

/// `ln(sum(exp(values)))` without overflow; `-inf` for an empty or all `-inf`
/// input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Mixture log density at `x`.
pub fn mixture_log_density(components: &[Component], x: &[f64]) -> Result<f64> {
    let first = components
        .first()
        .ok_or_else(|| Error::Domain("mixture has no components".into()))?;
    check_dim(first.mean.dim(), x.len())?;
    let terms: Vec<f64> = components
        .iter()
        .map(|c| c.weight.ln() + c.log_pdf(x))
        .collect();
    Ok(log_sum_exp(&terms))
}

/// Checks weights sum to one within `1e-9`, shapes agree and every variance
/// is at least `floor` (and positive).
pub fn validate_components(components: &[Component], floor: f64) -> Result<usize> {
    let first = components
        .first()
        .ok_or_else(|| Error::Domain("mixture has no components".into()))?;
    let dim = first.mean.dim();
    let mut total = 0.0;
    for (k, c) in components.iter().enumerate() {
        check_dim(dim, c.mean.dim())?;
        check_dim(dim, c.covariance.len())?;
        if !(c.weight >= 0.0) {
            return Err(Error::Domain(format!("component {k}: negative weight")));
        }
        if !c.mean.is_finite() {
            return Err(Error::Domain(format!("component {k}: non-finite mean")));
        }
        if c.covariance.iter().any(|v| !(v.is_finite() && *v > 0.0 && *v >= floor)) {
            return Err(Error::Domain(format!(
                "component {k}: covariance entries must be finite, positive and >= {floor}"
            )));
        }
        total += c.weight;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("weights sum to {total}, not 1")));
    }
    Ok(dim)
}
