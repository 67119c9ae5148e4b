//! Chain and category means over thinned samples.

use crate::chain::{thin, Chain};
use crate::error::{check_dim, Error, Result};
use crate::latent::LatentVector;

pub fn mean_of<'a, I>(vectors: I) -> Result<LatentVector>
where
    I: IntoIterator<Item = &'a LatentVector>,
{
    let mut sum: Option<Vec<f64>> = None;
    let mut n = 0usize;
    for v in vectors {
        match &mut sum {
            None => sum = Some(v.values().to_vec()),
            Some(s) => {
                check_dim(s.len(), v.dim())?;
                s.iter_mut().zip(v.values()).for_each(|(a, b)| *a += b);
            }
        }
        n += 1;
    }
    let sum = sum.ok_or_else(|| Error::Domain("no samples to average".into()))?;
    Ok(LatentVector(sum.into_iter().map(|s| s / n as f64).collect()))
}

pub fn chain_mean(chain: &Chain, burn_in: usize, stride: usize) -> Result<LatentVector> {
    mean_of(thin(chain, burn_in, stride)?)
}

/// Mean over the pooled thinned states of all `chains`.
pub fn category_mean(chains: &[&Chain], burn_in: usize, stride: usize) -> Result<LatentVector> {
    let mut pooled = Vec::new();
    for c in chains {
        pooled.extend(thin(c, burn_in, stride)?);
    }
    mean_of(pooled)
}
