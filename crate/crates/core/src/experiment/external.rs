use std::path::Path;

use ndarray::{Array2, Axis};

use super::config::ExperimentConfig;
use super::sweep::{sweep_configs, tabulate, SweepAxis, SweepTable};
use super::trial::{streams, train_and_evaluate, TrialData, TrialResult};
use crate::error::{Error, Result};
use crate::hermite::ActivationKind;
use crate::linalg::spectral_norm;
use crate::mixture::{io::read_matrix, preprocess_external, Dataset, PreprocessReport};
use crate::rng::{trial_seed, Stream};

/// Stream id (under the base seed) of the preprocessing noise.
pub const PREPROCESS_NOISE: u64 = 7;

/// Preprocessed two-class pool with its empirical covariance summaries.
#[derive(Debug, Clone)]
pub struct ExternalPool {
    pub data: Dataset,
    pub report: PreprocessReport,
    pub trace_sigma: f64,
    pub sigma_norm: f64,
}

impl ExternalPool {
    /// Preprocesses the two classes with noise from `(seed, PREPROCESS_NOISE)`.
    pub fn new(
        class_a: &Array2<f64>,
        class_b: &Array2<f64>,
        nonzero_means: bool,
        seed: u64,
    ) -> Result<Self> {
        let mut noise = Stream::with_id(seed, PREPROCESS_NOISE);
        let (data, report) =
            preprocess_external(class_a.view(), class_b.view(), nonzero_means, &mut noise)?;
        let mean = data.x.mean_axis(Axis(0)).expect("non-empty pool");
        let centered = &data.x - &mean;
        let cov = centered.t().dot(&centered) / (data.len() as f64 - 1.0);
        let trace_sigma = cov.diag().sum();
        let sigma_norm = spectral_norm(cov.view(), 1e-8, 1000).value;
        Ok(ExternalPool {
            data,
            report,
            trace_sigma,
            sigma_norm,
        })
    }

    pub fn from_paths(a: &Path, b: &Path, nonzero_means: bool, seed: u64) -> Result<Self> {
        Self::new(&read_matrix(a)?, &read_matrix(b)?, nonzero_means, seed)
    }

    /// Disjoint gradient, ridge and test subsets from a seeded shuffle.
    pub fn split(
        &self,
        m: usize,
        n_test: usize,
        seed: u64,
        hermite_scale: f64,
    ) -> Result<TrialData> {
        let need = 2 * m + n_test;
        if need > self.data.len() {
            return Err(Error::invalid(
                "m, n_test",
                format!(
                    "need {need} samples for two batches and the test set, the pool has {}",
                    self.data.len()
                ),
            ));
        }
        let mut idx: Vec<usize> = (0..self.data.len()).collect();
        Stream::with_id(seed, streams::MIXTURE).shuffle(&mut idx);
        Ok(TrialData {
            gradient: self.data.select(&idx[..m]),
            ridge: self.data.select(&idx[m..2 * m]),
            test: self.data.select(&idx[2 * m..need]),
            trace_sigma: self.trace_sigma,
            sigma_norm: self.sigma_norm,
            hermite_scale,
        })
    }
}

/// One trial on the external pool: `b = 1` unless `hermite_scale` is set.
pub fn run_external_trial(
    cfg: &ExperimentConfig,
    pool: &ExternalPool,
    index: u64,
) -> Result<TrialResult> {
    let seed = trial_seed(cfg.base_seed, index);
    let data = pool.split(cfg.m, cfg.n_test(), seed, cfg.hermite_scale.unwrap_or(1.0))?;
    train_and_evaluate(cfg, &data, seed)
}

/// k/m sweep on externally supplied two-class data. `cfg.n` is replaced by
/// the data dimension.
pub fn run_external(
    cfg: &ExperimentConfig,
    pool: &ExternalPool,
    k_over_m: &[f64],
    activations: &[ActivationKind],
) -> Result<SweepTable> {
    let mut cfg = cfg.clone();
    if cfg.n != pool.report.n {
        log::info!(
            "using the data dimension n = {} instead of the configured {}",
            pool.report.n,
            cfg.n
        );
        cfg.n = pool.report.n;
    }
    cfg.validate()?;
    let configs = sweep_configs(&cfg, SweepAxis::KOverM, k_over_m)?;
    tabulate(
        SweepAxis::KOverM,
        k_over_m,
        &configs,
        activations,
        |c, t| run_external_trial(c, pool, t),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classes(seed: u64, n: usize, rows: usize) -> (Array2<f64>, Array2<f64>) {
        let mut s = Stream::new(seed);
        let a = s.normal_matrix(rows, n) * 2.0 + 1.0;
        let mut b = s.normal_matrix(rows, n);
        b.column_mut(0).mapv_inplace(|v| 3.0 * v - 2.0);
        (a, b)
    }

    fn cfg(n: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::baseline(n);
        c.m = 40;
        c.k = 40;
        c.n_test = Some(80);
        c.trials = 2;
        c.alpha = 0.0;
        c.beta = 1.0;
        c
    }

    #[test]
    fn splits_are_disjoint() {
        let (a, b) = classes(1, 10, 100);
        let pool = ExternalPool::new(&a, &b, false, 0).unwrap();
        assert_eq!(pool.data.len(), 200);
        assert!(
            (pool.trace_sigma / 10.0 - 2.0).abs() < 0.3,
            "{}",
            pool.trace_sigma
        );
        let d = pool.split(40, 80, 5, 1.0).unwrap();
        let rows = |ds: &Dataset| -> Vec<Vec<u64>> {
            ds.x.rows()
                .into_iter()
                .map(|r| r.iter().map(|v| v.to_bits()).collect())
                .collect()
        };
        let (g, r, t) = (rows(&d.gradient), rows(&d.ridge), rows(&d.test));
        assert!(g.iter().all(|x| !r.contains(x) && !t.contains(x)));
        assert!(r.iter().all(|x| !t.contains(x)));
        assert!(pool.split(80, 80, 5, 1.0).is_err());
    }

    #[test]
    fn pipeline_runs_on_two_gaussian_classes() {
        let (a, b) = classes(2, 12, 120);
        let pool = ExternalPool::new(&a, &b, false, 0).unwrap();
        let table = run_external(&cfg(99), &pool, &[0.5, 1.0], &[ActivationKind::Tanh]).unwrap();
        assert!(table.metadata.failures.is_empty());
        assert_eq!(table.metadata.axis, "k_over_m");
        assert!(table
            .means("tanh", "g_nn")
            .iter()
            .all(|g| g.is_finite() && *g >= 0.0));
    }

    #[test]
    fn swapping_classes_flips_labels() {
        let (a, b) = classes(3, 8, 60);
        let p = ExternalPool::new(&a, &b, false, 0).unwrap();
        let q = ExternalPool::new(&b, &a, false, 0).unwrap();
        assert_eq!(p.data.y.iter().filter(|&&y| y > 0.0).count(), 60);
        assert_eq!(q.data.y[0], 1.0);
        assert_eq!(p.data.y[0], 1.0);
        assert_eq!(p.data.y[60], -1.0);
    }
}
