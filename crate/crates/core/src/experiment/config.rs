use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{ActivationKind, MAX_DEGREE};
use crate::mixture::{
    build_xi, LabelKind, MixtureDescriptor, MixtureSpec, ScalingSpec, TargetSpec, XiMode,
};
use crate::rng::{Stream, GENERATOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// `y = σ*(ξᵀx)`.
    #[default]
    SingleIndex,
    /// `y = 2c − 3` for two components.
    ClassSign,
}

/// Configuration-level description of the labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDescriptor {
    #[serde(default)]
    pub kind: TargetKind,
    /// `σ*` for single-index targets.
    #[serde(default = "default_activation")]
    pub activation: ActivationKind,
    #[serde(default = "default_xi_mode")]
    pub xi_mode: XiMode,
    /// `‖ξ‖ ‖Σ^{1/2}‖`.
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_activation() -> ActivationKind {
    ActivationKind::Relu
}

fn default_xi_mode() -> XiMode {
    XiMode::RandomDirection
}

fn default_c() -> f64 {
    1.0
}

fn default_trials() -> usize {
    20
}

fn default_generator() -> String {
    GENERATOR.to_string()
}

impl Default for TargetDescriptor {
    fn default() -> Self {
        TargetDescriptor {
            kind: TargetKind::SingleIndex,
            activation: ActivationKind::Relu,
            xi_mode: XiMode::RandomDirection,
            c: 1.0,
        }
    }
}

impl TargetDescriptor {
    /// Draws `ξ` (single-index targets) for one mixture realization.
    pub fn build(&self, spec: &MixtureSpec, stream: &mut Stream) -> Result<TargetSpec> {
        match self.kind {
            TargetKind::SingleIndex => {
                let xi = build_xi(spec, self.xi_mode, self.c, stream)?;
                Ok(TargetSpec {
                    xi,
                    kind: LabelKind::SingleIndex(self.activation.clone()),
                })
            }
            TargetKind::ClassSign => {
                if spec.num_components() != 2 {
                    return Err(Error::ClassSignComponents(spec.num_components()));
                }
                Ok(TargetSpec {
                    xi: ndarray::Array1::zeros(spec.dim()),
                    kind: LabelKind::ClassSign,
                })
            }
        }
    }
}

/// One experiment: sizes, scalings, penalty, Hermite degree, activation,
/// target, mixture and Monte Carlo settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub l_degree: usize,
    pub activation: ActivationKind,
    #[serde(default)]
    pub target: TargetDescriptor,
    #[serde(default)]
    pub mixture: MixtureDescriptor,
    /// Test-set size; `4m` when absent.
    #[serde(default)]
    pub n_test: Option<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Learning rate used instead of `n^{βα}`.
    #[serde(default)]
    pub eta_override: Option<f64>,
    /// Hermite scale `b`; `√(n / Tr Σ)` when absent.
    #[serde(default)]
    pub hermite_scale: Option<f64>,
    /// Replace `l_degree` by [`degree_for_beta`] of `beta`.
    #[serde(default)]
    pub match_degree_to_beta: bool,
    /// Record gradient decomposition norms per trial.
    #[serde(default)]
    pub diagnostics: bool,
    #[serde(default = "default_generator")]
    pub generator: String,
}

/// Smallest `l` with `(l−2)/(l−1) < β < (l−1)/l`, i.e. `⌊1/(1−β)⌋ + 1`.
pub fn degree_for_beta(beta: f64) -> usize {
    if beta >= 1.0 {
        return MAX_DEGREE;
    }
    ((1.0 / (1.0 - beta)).floor() as usize + 1).min(MAX_DEGREE)
}

/// Whether `β` lies in the window `((l−2)/(l−1), (l−1)/l)` of degree `l`.
pub fn beta_in_window(beta: f64, l: usize) -> bool {
    let hi = (l as f64 - 1.0) / l as f64;
    let lo = if l >= 2 {
        (l as f64 - 2.0) / (l as f64 - 1.0)
    } else {
        f64::NEG_INFINITY
    };
    beta > lo && beta < hi
}

impl ExperimentConfig {
    /// Default sweep settings at size `n = m = k`.
    pub fn baseline(n: usize) -> Self {
        ExperimentConfig {
            n,
            m: n,
            k: n,
            alpha: 0.5,
            beta: 0.74,
            lambda: 1e-4,
            l_degree: 5,
            activation: ActivationKind::Relu,
            target: TargetDescriptor::default(),
            mixture: MixtureDescriptor::default(),
            n_test: None,
            trials: 20,
            base_seed: 0,
            eta_override: None,
            hermite_scale: None,
            match_degree_to_beta: false,
            diagnostics: false,
            generator: default_generator(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn n_test(&self) -> usize {
        self.n_test.unwrap_or(4 * self.m)
    }

    pub fn scaling(&self) -> Result<ScalingSpec> {
        ScalingSpec::new(self.alpha, self.beta, self.n)
    }

    /// `η`: the override when set, `n^{βα}` otherwise.
    pub fn eta(&self) -> f64 {
        self.eta_override
            .unwrap_or_else(|| (self.n as f64).powf(self.beta * self.alpha))
    }

    /// `log_n(η · n^{β(1−α)})`, the strength exponent implied by the learning
    /// rate actually used.
    pub fn implied_beta(&self) -> f64 {
        let ln = (self.n as f64).ln();
        if ln == 0.0 {
            return self.beta;
        }
        self.eta().ln() / ln + self.beta * (1.0 - self.alpha)
    }

    /// Hermite degree used by the trials.
    pub fn degree(&self) -> usize {
        if self.match_degree_to_beta {
            degree_for_beta(self.beta)
        } else {
            self.l_degree
        }
    }

    /// False when the implied strength exceeds 1.
    pub fn equivalence_guaranteed(&self) -> bool {
        self.implied_beta() <= 1.0 + 1e-12
    }

    /// Rejects invalid settings.
    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.n, "n"),
            (self.m, "m"),
            (self.k, "k"),
            (self.trials, "trials"),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if self.n_test == Some(0) {
            return Err(Error::invalid("n_test", "must be positive"));
        }
        self.scaling()?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(
                "lambda",
                format!("must be non-negative, got {}", self.lambda),
            ));
        }
        if self.l_degree == 0 || self.l_degree > MAX_DEGREE {
            return Err(Error::invalid(
                "l_degree",
                format!("must lie in 1..={MAX_DEGREE}, got {}", self.l_degree),
            ));
        }
        if let Some(eta) = self.eta_override {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::invalid(
                    "eta_override",
                    format!("must be positive, got {eta}"),
                ));
            }
        }
        if let Some(b) = self.hermite_scale {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::invalid(
                    "hermite_scale",
                    format!("must be positive, got {b}"),
                ));
            }
        }
        if !(self.target.c > 0.0 && self.target.c.is_finite()) {
            return Err(Error::invalid("target.c", "must be positive"));
        }
        if self.target.kind == TargetKind::ClassSign && self.mixture.components != 2 {
            return Err(Error::ClassSignComponents(self.mixture.components));
        }
        if self.generator != GENERATOR {
            return Err(Error::invalid(
                "generator",
                format!("only `{GENERATOR}` is available, got `{}`", self.generator),
            ));
        }
        self.mixture.validate()
    }

    /// Conditions that leave the run valid but outside the equivalence
    /// statement.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let l = self.degree();
        if !beta_in_window(self.beta, l) {
            out.push(format!(
                "beta = {} lies outside the window of degree l = {l}",
                self.beta
            ));
        }
        if !self.equivalence_guaranteed() {
            out.push(format!(
                "implied strength exponent {:.3} exceeds 1: no equivalence guarantee",
                self.implied_beta()
            ));
        }
        out
    }
}
