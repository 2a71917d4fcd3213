use ndarray::ArrayView2;
use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::hermite::build_equivalent_activation;
use crate::lab::spike_bulk_decompose;
use crate::mixture::{build_mixture, label_dataset, mixture_covariance, sample_batch, Dataset};
use crate::network::{
    gradient_step, half_mse, init_network, predict, training_error_from_features, FeatureMap,
    TrainedNetwork,
};
use crate::rng::{trial_seed, Stream};

/// Stream ids within a trial seed.
pub mod streams {
    pub const MIXTURE: u64 = 0;
    pub const INIT: u64 = 1;
    pub const GRADIENT_BATCH: u64 = 2;
    pub const RIDGE_BATCH: u64 = 3;
    pub const TEST_BATCH: u64 = 4;
    pub const HERMITE_FIT_NOISE: u64 = 5;
    pub const HERMITE_TEST_NOISE: u64 = 6;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialDiagnostics {
    pub eta: f64,
    pub hermite_scale: f64,
    pub sigma_norm: f64,
    pub u_norm: f64,
    pub v_norm: f64,
    pub delta_norm: f64,
}

/// Errors of the network and of its Hermite counterpart in one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub seed: u64,
    pub t_nn: f64,
    pub g_nn: f64,
    pub t_hermite: f64,
    pub g_hermite: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<TrialDiagnostics>,
}

impl TrialResult {
    /// `|G_nn − G_hermite| / G_nn`.
    pub fn relative_gap(&self) -> f64 {
        (self.g_nn - self.g_hermite).abs() / self.g_nn
    }
}

/// Data of one trial: the three batches drawn for it and the quantities the
/// network needs from the mixture.
pub struct TrialData {
    pub gradient: Dataset,
    pub ridge: Dataset,
    pub test: Dataset,
    pub trace_sigma: f64,
    pub sigma_norm: f64,
    pub hermite_scale: f64,
}

/// Draws the mixture, `ξ` and the three batches of a synthetic trial.
pub fn synthetic_trial_data(cfg: &ExperimentConfig, seed: u64) -> Result<TrialData> {
    let scaling = cfg.scaling()?;
    let mut s0 = Stream::with_id(seed, streams::MIXTURE);
    let spec = build_mixture(&cfg.mixture, &scaling, &mut s0)?;
    let target = cfg.target.build(&spec, &mut s0)?;
    let cov = mixture_covariance(&spec)?;
    let batch = |m: usize, id: u64| -> Result<Dataset> {
        let mut ds = sample_batch(&spec, m, &mut Stream::with_id(seed, id))?;
        label_dataset(&target, &mut ds)?;
        Ok(ds)
    };
    let gradient = batch(cfg.m, streams::GRADIENT_BATCH)?;
    let ridge = batch(cfg.m, streams::RIDGE_BATCH)?;
    let test = batch(cfg.n_test(), streams::TEST_BATCH)?;
    let hermite_scale = cfg
        .hermite_scale
        .unwrap_or_else(|| (cfg.n as f64 / cov.trace).sqrt());
    Ok(TrialData {
        gradient,
        ridge,
        test,
        trace_sigma: cov.trace,
        sigma_norm: cov.spectral_norm,
        hermite_scale,
    })
}

/// Trial `index`: seed `trial_seed(base_seed, index)`, a synthetic mixture
/// drawn for it, one gradient step, then ridge fits with `σ` and `σ̂_l` on the
/// same `F̂`, ridge batch and test batch.
pub fn run_trial(cfg: &ExperimentConfig, index: u64) -> Result<TrialResult> {
    cfg.validate()?;
    let seed = trial_seed(cfg.base_seed, index);
    let data = synthetic_trial_data(cfg, seed)?;
    train_and_evaluate(cfg, &data, seed)
}

/// Two-stage training and evaluation on prepared data.
pub fn train_and_evaluate(
    cfg: &ExperimentConfig,
    data: &TrialData,
    seed: u64,
) -> Result<TrialResult> {
    let act = &cfg.activation;
    let n = data.gradient.dim();
    let init = init_network(
        n,
        cfg.k,
        data.trace_sigma,
        &mut Stream::with_id(seed, streams::INIT),
    )?;
    let eta = cfg.eta();
    let (g, f_hat) = gradient_step(
        &init,
        data.gradient.x.view(),
        data.gradient.y.view(),
        eta,
        act,
    )?;
    let diagnostics = if cfg.diagnostics {
        let d = spike_bulk_decompose(
            g.view(),
            init.w.view(),
            data.gradient.x.view(),
            data.gradient.y.view(),
            act,
        )?;
        Some(TrialDiagnostics {
            eta,
            hermite_scale: data.hermite_scale,
            sigma_norm: data.sigma_norm,
            u_norm: d.norms.u,
            v_norm: d.norms.v,
            delta_norm: d.norms.delta.value,
        })
    } else {
        None
    };
    drop(g);
    let ridge = &data.ridge;
    let test = &data.test;

    let (nn, phi) = TrainedNetwork::fit(
        f_hat.clone(),
        eta,
        cfg.lambda,
        FeatureMap::Plain(act.clone()),
        ridge.x.view(),
        ridge.y.view(),
        None,
    )?;
    let t_nn =
        training_error_from_features(phi.view(), ridge.y.view(), nn.w_hat.view(), cfg.lambda);
    drop(phi);
    let g_nn = test_error(&nn, test.x.view(), test, None)?;

    let hermite = build_equivalent_activation(act, data.hermite_scale, cfg.degree())?;
    let mut fit_noise = Stream::with_id(seed, streams::HERMITE_FIT_NOISE);
    let (hn, phi_h) = TrainedNetwork::fit(
        f_hat,
        eta,
        cfg.lambda,
        FeatureMap::Hermite(hermite),
        ridge.x.view(),
        ridge.y.view(),
        Some(&mut fit_noise),
    )?;
    let t_hermite =
        training_error_from_features(phi_h.view(), ridge.y.view(), hn.w_hat.view(), cfg.lambda);
    drop(phi_h);
    let g_hermite = test_error(
        &hn,
        test.x.view(),
        test,
        Some(&mut Stream::with_id(seed, streams::HERMITE_TEST_NOISE)),
    )?;

    let out = TrialResult {
        seed,
        t_nn,
        g_nn,
        t_hermite,
        g_hermite,
        diagnostics,
    };
    if [t_nn, g_nn, t_hermite, g_hermite]
        .iter()
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite {
            stage: "trial errors",
        });
    }
    let zero_predictor = 0.5 * ridge.y.dot(&ridge.y) / ridge.len() as f64;
    if t_nn > zero_predictor * (1.0 + 1e-9) + 1e-15 {
        log::warn!("training objective {t_nn} exceeds the zero-predictor value {zero_predictor}");
    }
    Ok(out)
}

fn test_error(
    net: &TrainedNetwork,
    x: ArrayView2<f64>,
    test: &Dataset,
    noise: Option<&mut Stream>,
) -> Result<f64> {
    let y_hat = predict(net, x, noise)?;
    Ok(half_mse(test.y.view(), y_hat.view()))
}
