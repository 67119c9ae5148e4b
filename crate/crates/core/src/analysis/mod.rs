//! Density estimation, discriminant projection and means over chain samples.

pub mod gmm;
pub mod lda;
pub mod means;
pub mod report;

pub use gmm::{fit_gmm, fit_gmm_traced, top_modes, EmConfig, EmReport, GmmModel};
pub use lda::{fisher_lda, LdaProjection};
pub use means::{category_mean, chain_mean, mean_of};
pub use report::{analyze_samples, AnalysisReport, AnalyzeOptions, Method, ProjectedPoint};
