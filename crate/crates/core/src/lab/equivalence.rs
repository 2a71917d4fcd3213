use serde::Serialize;

use super::decompose::{spike_bulk_decompose, StructureBasis};
use super::moments::{conditional_moments_mc, ConditionalMoments};
use crate::error::Result;
use crate::hermite::{build_equivalent_activation, ActivationKind};
use crate::linalg::norm;
use crate::mixture::{
    build_mixture, build_xi, label_dataset, mixture_covariance, sample_batch, LabelKind,
    MixtureDescriptor, ScalingSpec, TargetSpec, XiMode,
};
use crate::network::{gradient_step, init_network, FeatureMap};
use crate::rng::Stream;

/// One trained first layer, one `κ` draw for component 1, and the
/// conditional moments of `σ(F̂x)` and `σ̂_l(F̂x)` on shared `z⊥` samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentConfig {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
    pub l_degree: usize,
    pub samples: usize,
    pub seed: u64,
    pub activation: ActivationKind,
}

impl MomentConfig {
    pub fn new(n: usize, beta: f64, l_degree: usize, samples: usize, seed: u64) -> Self {
        MomentConfig {
            n,
            k: n,
            m: n,
            alpha: 0.5,
            beta,
            l_degree,
            samples,
            seed,
            activation: ActivationKind::Relu,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentComparison {
    pub hermite_scale: f64,
    pub kappa: Vec<f64>,
    /// `‖ν_σ − ν_σ̂‖ / ‖ν_σ‖`.
    pub mean_gap: f64,
    /// `‖diag_σ − diag_σ̂‖ / ‖diag_σ‖` for the diagonal second moments.
    pub second_moment_gap: f64,
    /// Relative Frobenius gap of the conditional covariances `Φ`.
    pub phi_gap: f64,
    pub psd_change_sigma: f64,
    pub psd_change_hermite: f64,
    #[serde(skip)]
    pub sigma: ConditionalMoments,
    #[serde(skip)]
    pub hermite: ConditionalMoments,
}

fn relative_gap(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    norm((&a - &b).view()) / norm(a)
}

/// Stream ids: 0 mixture and `ξ`, 1 init, 2 gradient batch, 3 `κ`, 4 Monte
/// Carlo.
pub fn moment_equivalence(cfg: &MomentConfig) -> Result<MomentComparison> {
    let scaling = ScalingSpec::new(cfg.alpha, cfg.beta, cfg.n)?;
    let mut s0 = Stream::with_id(cfg.seed, 0);
    let spec = build_mixture(&MixtureDescriptor::default(), &scaling, &mut s0)?;
    let xi = build_xi(&spec, XiMode::SpikeAligned, 1.0, &mut s0)?;
    let target = TargetSpec {
        xi,
        kind: LabelKind::SingleIndex(ActivationKind::Relu),
    };
    let trace = mixture_covariance(&spec)?.trace;
    let init = init_network(cfg.n, cfg.k, trace, &mut Stream::with_id(cfg.seed, 1))?;
    let mut batch = sample_batch(&spec, cfg.m, &mut Stream::with_id(cfg.seed, 2))?;
    label_dataset(&target, &mut batch)?;
    let (g, f_hat) = gradient_step(
        &init,
        batch.x.view(),
        batch.y.view(),
        scaling.eta(),
        &cfg.activation,
    )?;
    let d = spike_bulk_decompose(
        g.view(),
        init.w.view(),
        batch.x.view(),
        batch.y.view(),
        &cfg.activation,
    )?;
    let cov = &spec.components()[0].cov;
    let basis = StructureBasis::new(d.v.view(), cov)?;
    let z = Stream::with_id(cfg.seed, 3).normal_vec(cfg.n);
    let kappa = basis.coordinates(z.view())?;

    let hermite_scale = (cfg.n as f64 / trace).sqrt();
    let hermite = build_equivalent_activation(&cfg.activation, hermite_scale, cfg.l_degree)?;
    let mc = Stream::with_id(cfg.seed, 4);
    let sigma = conditional_moments_mc(
        f_hat.view(),
        cov,
        &basis,
        kappa.view(),
        &FeatureMap::Plain(cfg.activation.clone()),
        cfg.samples,
        &mut mc.clone(),
    )?;
    let herm = conditional_moments_mc(
        f_hat.view(),
        cov,
        &basis,
        kappa.view(),
        &FeatureMap::Hermite(hermite),
        cfg.samples,
        &mut mc.clone(),
    )?;
    let phi_gap = crate::linalg::frobenius((&sigma.phi - &herm.phi).view())
        / crate::linalg::frobenius(sigma.phi.view());
    Ok(MomentComparison {
        hermite_scale,
        kappa: kappa.to_vec(),
        mean_gap: relative_gap(sigma.nu.view(), herm.nu.view()),
        second_moment_gap: relative_gap(sigma.second_moment.view(), herm.second_moment.view()),
        phi_gap,
        psd_change_sigma: sigma.psd_change,
        psd_change_hermite: herm.psd_change,
        sigma,
        hermite: herm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_activation_has_no_gap() {
        let mut cfg = MomentConfig::new(24, 0.5, 2, 10_000, 1);
        cfg.activation = ActivationKind::Identity;
        let r = moment_equivalence(&cfg).unwrap();
        // σ̂ = σ exactly for a linear activation at degree 2.
        assert!(r.mean_gap < 1e-12, "{}", r.mean_gap);
        assert!(r.second_moment_gap < 1e-12);
    }

    #[test]
    fn small_relu_instance_is_close_and_deterministic() {
        let cfg = MomentConfig::new(32, 0.6, 3, 20_000, 2);
        let a = moment_equivalence(&cfg).unwrap();
        let b = moment_equivalence(&cfg).unwrap();
        assert_eq!(a.mean_gap, b.mean_gap);
        assert!(a.mean_gap < 0.1, "{}", a.mean_gap);
        assert!(a.second_moment_gap < 0.1, "{}", a.second_moment_gap);
    }
}
