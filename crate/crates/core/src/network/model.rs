use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::ridge::ridge_second_layer;
use crate::error::{Error, Result};
use crate::hermite::{ActivationKind, HermiteActivation, QuadratureRule};
use crate::mixture::{label, sample_batch, MixtureSpec, TargetSpec};
use crate::rng::Stream;

/// Activation applied to `F̂x`: the original one or its Hermite equivalent.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMap {
    Plain(ActivationKind),
    Hermite(HermiteActivation),
}

impl FeatureMap {
    /// True when evaluation draws noise.
    pub fn is_stochastic(&self) -> bool {
        matches!(self, FeatureMap::Hermite(h) if h.has_noise())
    }

    /// Entrywise activation of a preactivation matrix.
    pub fn apply(&self, pre: ArrayView2<f64>, noise: Option<&mut Stream>) -> Result<Array2<f64>> {
        match self {
            FeatureMap::Plain(act) => {
                let out = pre.mapv(|v| act.value(v));
                if out.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { stage: "features" });
                }
                Ok(out)
            }
            FeatureMap::Hermite(h) => {
                let noise = noise.ok_or(Error::MissingNoiseStream)?;
                h.apply(pre, noise)
            }
        }
    }
}

/// `Φ = act(X F̂ᵀ)`, one row per sample.
pub fn features(
    f_hat: ArrayView2<f64>,
    x: ArrayView2<f64>,
    map: &FeatureMap,
    noise: Option<&mut Stream>,
) -> Result<Array2<f64>> {
    if x.ncols() != f_hat.ncols() {
        return Err(Error::DimensionMismatch {
            context: "network inputs",
            expected: f_hat.ncols(),
            actual: x.ncols(),
        });
    }
    map.apply(x.dot(&f_hat.t()).view(), noise)
}

/// Trained first and second layers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedNetwork {
    pub f_hat: Array2<f64>,
    pub w_hat: Array1<f64>,
    pub eta: f64,
    pub lambda: f64,
    pub activation: FeatureMap,
}

impl TrainedNetwork {
    /// Fits `ŵ` by ridge regression on `(x, y)`. Returns the network together
    /// with the feature matrix used for the fit.
    pub fn fit(
        f_hat: Array2<f64>,
        eta: f64,
        lambda: f64,
        activation: FeatureMap,
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
        noise: Option<&mut Stream>,
    ) -> Result<(Self, Array2<f64>)> {
        let phi = features(f_hat.view(), x, &activation, noise)?;
        let w_hat = ridge_second_layer(phi.view(), y, lambda)?;
        Ok((
            TrainedNetwork {
                f_hat,
                w_hat,
                eta,
                lambda,
                activation,
            },
            phi,
        ))
    }

    pub fn width(&self) -> usize {
        self.f_hat.nrows()
    }
}

/// `ŷ = ŵᵀ act(F̂x) / √k` per row of `x`; Hermite noise is fresh per call.
pub fn predict(
    net: &TrainedNetwork,
    x: ArrayView2<f64>,
    noise: Option<&mut Stream>,
) -> Result<Array1<f64>> {
    let phi = features(net.f_hat.view(), x, &net.activation, noise)?;
    Ok(predict_from_features(phi.view(), net.w_hat.view()))
}

pub fn predict_from_features(phi: ArrayView2<f64>, w_hat: ArrayView1<f64>) -> Array1<f64> {
    phi.dot(&w_hat) / (w_hat.len() as f64).sqrt()
}

/// `(1/2N) Σ (y_i − ŷ_i)²`.
pub fn half_mse(y: ArrayView1<f64>, y_hat: ArrayView1<f64>) -> f64 {
    let n = y.len() as f64;
    y.iter()
        .zip(y_hat.iter())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / (2.0 * n)
}

/// Ridge objective `(1/2m) Σ (y_i − ŵᵀφ_i/√k)² + (λ/2)‖ŵ‖²` on given features.
pub fn training_error_from_features(
    phi: ArrayView2<f64>,
    y: ArrayView1<f64>,
    w_hat: ArrayView1<f64>,
    lambda: f64,
) -> f64 {
    half_mse(y, predict_from_features(phi, w_hat).view()) + 0.5 * lambda * w_hat.dot(&w_hat)
}

/// Ridge objective with features recomputed from `x` (fresh Hermite noise).
pub fn training_error(
    net: &TrainedNetwork,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    noise: Option<&mut Stream>,
) -> Result<f64> {
    let phi = features(net.f_hat.view(), x, &net.activation, noise)?;
    Ok(training_error_from_features(
        phi.view(),
        y,
        net.w_hat.view(),
        net.lambda,
    ))
}

/// `(1/2N) Σ (y − ŷ)²` on a fresh test set of `n_test` draws. The set is drawn
/// from `stream` first; Hermite noise follows on the same stream.
pub fn generalization_error(
    net: &TrainedNetwork,
    spec: &MixtureSpec,
    target: &TargetSpec,
    n_test: usize,
    stream: &mut Stream,
) -> Result<f64> {
    let ds = sample_batch(spec, n_test, stream)?;
    let y = label(target, ds.x.view(), &ds.comp)?;
    let y_hat = predict(net, ds.x.view(), Some(stream))?;
    Ok(half_mse(y.view(), y_hat.view()))
}

/// `h̃₁ = E[σ′(z)]`.
pub fn mean_derivative(act: &ActivationKind, rule: &QuadratureRule) -> f64 {
    rule.expect(|x| act.derivative(x))
}
