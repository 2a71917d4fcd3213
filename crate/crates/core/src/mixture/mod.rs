//! Gaussian mixtures with identity-plus-low-rank covariances: specification,
//! covariance algebra, sampling, labels, and preprocessing of external data.

mod build;
mod covariance;
pub mod io;
mod preprocess;
mod spec;

pub use build::{build_mixture, MixtureDescriptor, ThetaMode};
pub use covariance::{CovarianceSpec, Spike, ORTHONORMALITY_TOLERANCE};
pub use preprocess::{preprocess_external, PreprocessReport};
pub use spec::{
    build_xi, label, label_dataset, mixture_covariance, sample_batch, Component, Dataset,
    LabelKind, MixtureCovariance, MixtureSpec, ScalingSpec, TargetSpec, XiMode, DENSE_FALLBACK_MAX,
    MEAN_RATIO_WARNING,
};

/// `Σ_c^{1/2} z` without forming the matrix.
pub fn cov_sqrt_apply(cov: &CovarianceSpec, z: ndarray::ArrayView1<f64>) -> ndarray::Array1<f64> {
    cov.sqrt_apply(z)
}
