//! Fisher linear discriminant projection.
//!
//! Solves `S_B v = lambda (S_W + eps I) v` by whitening with the Cholesky
//! factor of the regularized within-class scatter and taking the symmetric
//! eigendecomposition of the whitened between-class scatter.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::latent::LatentVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaProjection {
    /// Unit-length discriminant directions, strongest first.
    pub basis: Vec<LatentVector>,
    pub eigenvalues: Vec<f64>,
    pub class_means_projected: BTreeMap<String, Vec<f64>>,
    /// Sum of the retained generalized eigenvalues.
    pub fisher_ratio: f64,
}

impl LdaProjection {
    pub fn out_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn project(&self, x: &LatentVector) -> Result<Vec<f64>> {
        if let Some(b) = self.basis.first() {
            check_dim(b.dim(), x.dim())?;
        }
        Ok(self
            .basis
            .iter()
            .map(|b| b.values().iter().zip(x.values()).map(|(u, v)| u * v).sum())
            .collect())
    }
}

fn mean_of(vectors: &[LatentVector], dim: usize) -> DVector<f64> {
    let mut m = DVector::zeros(dim);
    for v in vectors {
        m += DVector::from_column_slice(v.values());
    }
    m / vectors.len() as f64
}

pub fn fisher_lda(
    samples_by_class: &BTreeMap<String, Vec<LatentVector>>,
    out_dim: usize,
) -> Result<LdaProjection> {
    let n_classes = samples_by_class.len();
    if n_classes < 2 {
        return Err(Error::Domain("discriminant analysis needs at least two classes".into()));
    }
    if out_dim == 0 || out_dim > n_classes - 1 {
        return Err(Error::Domain(format!(
            "out_dim {out_dim} must lie in 1..={} for {n_classes} classes",
            n_classes - 1
        )));
    }
    let dim = samples_by_class
        .values()
        .flat_map(|v| v.first())
        .map(LatentVector::dim)
        .next()
        .unwrap_or(0);
    if dim == 0 {
        return Err(Error::Domain("empty samples".into()));
    }
    if out_dim > dim {
        return Err(Error::Domain(format!("out_dim {out_dim} exceeds dimension {dim}")));
    }
    for (label, vs) in samples_by_class {
        if vs.len() < 2 {
            return Err(Error::Domain(format!("class `{label}` needs at least two samples")));
        }
        for v in vs {
            check_dim(dim, v.dim())?;
        }
    }

    let total: usize = samples_by_class.values().map(Vec::len).sum();
    let class_means: BTreeMap<&String, DVector<f64>> = samples_by_class
        .iter()
        .map(|(k, v)| (k, mean_of(v, dim)))
        .collect();
    let grand = class_means
        .iter()
        .fold(DVector::zeros(dim), |acc, (k, m)| acc + m * samples_by_class[*k].len() as f64)
        / total as f64;

    let mut within = DMatrix::<f64>::zeros(dim, dim);
    let mut between = DMatrix::<f64>::zeros(dim, dim);
    for (label, vs) in samples_by_class {
        let mu = &class_means[label];
        for v in vs {
            let d = DVector::from_column_slice(v.values()) - mu;
            within.ger(1.0, &d, &d, 1.0);
        }
        let d = mu - &grand;
        between.ger(vs.len() as f64, &d, &d, 1.0);
    }
    // fall back to the total scatter scale when every class is a single point
    let scale = if within.trace() > 0.0 { within.trace() } else { within.trace() + between.trace() };
    let eps = if scale > 0.0 { 1e-6 * scale / dim as f64 } else { 1e-6 };
    for i in 0..dim {
        within[(i, i)] += eps;
    }

    let chol = within
        .cholesky()
        .ok_or_else(|| Error::Domain("within-class scatter is not positive definite".into()))?;
    let l = chol.l();
    // whitened between-class scatter: L^-1 S_B L^-T
    let left = l
        .solve_lower_triangular(&between)
        .ok_or_else(|| Error::Domain("singular scatter factor".into()))?;
    let whitened = l
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| Error::Domain("singular scatter factor".into()))?;
    let whitened = (&whitened + whitened.transpose()) * 0.5;
    let eig = SymmetricEigen::new(whitened);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lt = l.transpose();
    let mut basis = Vec::with_capacity(out_dim);
    let mut eigenvalues = Vec::with_capacity(out_dim);
    for &i in order.iter().take(out_dim) {
        let w = eig.eigenvectors.column(i).into_owned();
        let v = lt
            .solve_upper_triangular(&w)
            .ok_or_else(|| Error::Domain("singular scatter factor".into()))?;
        let v = v.normalize();
        basis.push(LatentVector(v.iter().copied().collect()));
        eigenvalues.push(eig.eigenvalues[i].max(0.0));
    }

    let mut projection = LdaProjection {
        basis,
        fisher_ratio: eigenvalues.iter().sum(),
        eigenvalues,
        class_means_projected: BTreeMap::new(),
    };
    for (label, mu) in class_means {
        let p = projection.project(&LatentVector(mu.iter().copied().collect()))?;
        projection.class_means_projected.insert(label.clone(), p);
    }
    Ok(projection)
}
