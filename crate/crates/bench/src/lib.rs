//! Fixtures shared by the benchmarks.

use hermite_equiv::experiment::ExperimentConfig;
use hermite_equiv::mixture::{
    build_mixture, mixture_covariance, sample_batch, Dataset, MixtureDescriptor, MixtureSpec,
    ScalingSpec,
};
use hermite_equiv::network::{init_network, NetworkInit};
use hermite_equiv::rng::Stream;

/// Mixture, initialization and one batch at size `n = k = m`.
pub struct Fixture {
    pub spec: MixtureSpec,
    pub init: NetworkInit,
    pub batch: Dataset,
}

pub fn fixture(n: usize, seed: u64) -> Fixture {
    let scaling = ScalingSpec::new(0.5, 0.74, n).expect("valid scaling");
    let spec = build_mixture(
        &MixtureDescriptor::default(),
        &scaling,
        &mut Stream::with_id(seed, 0),
    )
    .expect("mixture");
    let trace = mixture_covariance(&spec).expect("covariance").trace;
    let init = init_network(n, n, trace, &mut Stream::with_id(seed, 1)).expect("init");
    let mut batch = sample_batch(&spec, n, &mut Stream::with_id(seed, 2)).expect("batch");
    batch.y = batch.x.column(0).mapv(|v| v.max(0.0));
    Fixture { spec, init, batch }
}

/// Baseline configuration with `trials` trials at size `n`.
pub fn config(n: usize, trials: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::baseline(n);
    cfg.trials = trials;
    cfg
}
