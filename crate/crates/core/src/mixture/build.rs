use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::covariance::{CovarianceSpec, Spike};
use super::spec::{Component, MixtureSpec, ScalingSpec};
use crate::error::{Error, Result};
use crate::linalg::orthonormal_basis;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThetaMode {
    /// Every spike at `n^{β(1−α)}`.
    #[default]
    Fixed,
    /// Spikes uniform on `(0, n^β)`; one draw shared by all components.
    Uniform,
}

/// Configuration-level description of a synthetic mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureDescriptor {
    /// Number of components `C`.
    #[serde(default = "default_components")]
    pub components: usize,
    /// `ρ`; uniform when empty.
    #[serde(default)]
    pub weights: Vec<f64>,
    /// `d_c` per component; a single entry applies to all.
    #[serde(default = "default_ranks")]
    pub ranks: Vec<usize>,
    /// `|γ_{1,1}ᵀ γ_{2,1}|`; independent spikes when absent.
    #[serde(default)]
    pub alignment: Option<f64>,
    #[serde(default)]
    pub theta_mode: ThetaMode,
    #[serde(default)]
    pub nonzero_means: bool,
    /// `‖μ_c‖` along a random direction per component; needs `nonzero_means`.
    #[serde(default)]
    pub mean_norm: f64,
}

fn default_components() -> usize {
    2
}

fn default_ranks() -> Vec<usize> {
    vec![1]
}

impl Default for MixtureDescriptor {
    fn default() -> Self {
        MixtureDescriptor {
            components: 2,
            weights: Vec::new(),
            ranks: vec![1],
            alignment: None,
            theta_mode: ThetaMode::Fixed,
            nonzero_means: false,
            mean_norm: 0.0,
        }
    }
}

impl MixtureDescriptor {
    pub fn resolved_weights(&self) -> Result<Vec<f64>> {
        if self.components == 0 {
            return Err(Error::invalid("components", "must be positive"));
        }
        if self.weights.is_empty() {
            return Ok(vec![1.0 / self.components as f64; self.components]);
        }
        if self.weights.len() != self.components {
            return Err(Error::DimensionMismatch {
                context: "mixture weights",
                expected: self.components,
                actual: self.weights.len(),
            });
        }
        Ok(self.weights.clone())
    }

    pub fn resolved_ranks(&self) -> Result<Vec<usize>> {
        match self.ranks.len() {
            1 => Ok(vec![self.ranks[0]; self.components]),
            l if l == self.components => Ok(self.ranks.clone()),
            l => Err(Error::DimensionMismatch {
                context: "mixture ranks",
                expected: self.components,
                actual: l,
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.resolved_weights()?;
        self.resolved_ranks()?;
        if let Some(a) = self.alignment {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::invalid(
                    "alignment",
                    format!("must lie in [0, 1], got {a}"),
                ));
            }
            if self.components < 2 {
                return Err(Error::invalid("alignment", "needs at least two components"));
            }
            let r = self.resolved_ranks()?;
            if r[0] == 0 || r[1] == 0 {
                return Err(Error::invalid(
                    "alignment",
                    "needs a spike in each of the first two components",
                ));
            }
        }
        if !(self.mean_norm >= 0.0 && self.mean_norm.is_finite()) {
            return Err(Error::invalid("mean_norm", "must be non-negative"));
        }
        if self.mean_norm > 0.0 && !self.nonzero_means {
            return Err(Error::invalid(
                "mean_norm",
                "non-zero means need nonzero_means = true",
            ));
        }
        Ok(())
    }
}

/// Draws spike directions, strengths and means for one realization of the
/// mixture.
pub fn build_mixture(
    desc: &MixtureDescriptor,
    scaling: &ScalingSpec,
    stream: &mut Stream,
) -> Result<MixtureSpec> {
    desc.validate()?;
    let n = scaling.n;
    let weights = desc.resolved_weights()?;
    let ranks = desc.resolved_ranks()?;
    let max_rank = ranks.iter().copied().max().unwrap_or(0);
    if max_rank + 1 > n {
        return Err(Error::invalid(
            "ranks",
            format!("rank {max_rank} too large for n = {n}"),
        ));
    }

    let thetas: Vec<f64> = match desc.theta_mode {
        ThetaMode::Fixed => vec![scaling.spike_scale(); max_rank],
        ThetaMode::Uniform => {
            let hi = (n as f64).powf(scaling.beta);
            (0..max_rank)
                .map(|_| stream.uniform_open(0.0, hi))
                .collect()
        }
    };

    let mut directions: Vec<Vec<Array1<f64>>> = Vec::with_capacity(desc.components);
    for (c, &d) in ranks.iter().enumerate() {
        let dirs = match (c, desc.alignment) {
            (1, Some(a)) => aligned_directions(&directions[0][0], a, d, n, stream)?,
            _ => random_orthonormal(d, n, stream)?,
        };
        directions.push(dirs);
    }

    let mut components = Vec::with_capacity(desc.components);
    for ((w, dirs), &d) in weights.iter().zip(directions).zip(&ranks) {
        let spikes = dirs
            .into_iter()
            .zip(&thetas[..d])
            .map(|(direction, &theta)| Spike { theta, direction })
            .collect();
        let cov = CovarianceSpec::new(n, spikes)?;
        let mean = if desc.mean_norm > 0.0 {
            let g = stream.normal_vec(n);
            let len = g.dot(&g).sqrt();
            g * (desc.mean_norm / len)
        } else {
            Array1::zeros(n)
        };
        components.push(Component {
            weight: *w,
            mean,
            cov,
        });
    }
    MixtureSpec::new(components, desc.nonzero_means)
}

fn random_orthonormal(d: usize, n: usize, stream: &mut Stream) -> Result<Vec<Array1<f64>>> {
    let raw: Vec<_> = (0..d).map(|_| stream.normal_vec(n)).collect();
    let (basis, _) = orthonormal_basis(&raw);
    if basis.len() != d {
        return Err(Error::RankDeficient {
            context: "spike directions",
        });
    }
    Ok(basis)
}

/// `γ_{2,1} = a γ_{1,1} + √(1−a²) γ⊥`; the remaining spikes of the component
/// are orthogonal to both.
fn aligned_directions(
    anchor: &Array1<f64>,
    a: f64,
    d: usize,
    n: usize,
    stream: &mut Stream,
) -> Result<Vec<Array1<f64>>> {
    let mut raw = vec![anchor.clone()];
    raw.extend((0..d).map(|_| stream.normal_vec(n)));
    let (mut basis, _) = orthonormal_basis(&raw);
    if basis.len() != d + 1 {
        return Err(Error::RankDeficient {
            context: "aligned spike directions",
        });
    }
    let perp = basis.remove(1);
    let first = anchor * a + &perp * (1.0 - a * a).max(0.0).sqrt();
    let mut out = vec![first];
    out.extend(basis.into_iter().skip(1));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::mixture_covariance;

    fn scaling() -> ScalingSpec {
        ScalingSpec::new(0.5, 0.74, 200).unwrap()
    }

    #[test]
    fn fixed_mode_uses_the_spike_scale() {
        let spec = build_mixture(
            &MixtureDescriptor::default(),
            &scaling(),
            &mut Stream::new(1),
        )
        .unwrap();
        assert_eq!(spec.num_components(), 2);
        for c in spec.components() {
            assert_eq!(c.cov.rank(), 1);
            assert!((c.cov.spikes()[0].theta - scaling().spike_scale()).abs() < 1e-12);
            assert!((c.weight - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn alignment_is_exact() {
        for a in [0.0, 0.5, 0.9, 1.0] {
            let desc = MixtureDescriptor {
                alignment: Some(a),
                ranks: vec![3],
                ..Default::default()
            };
            let spec = build_mixture(&desc, &scaling(), &mut Stream::new(4)).unwrap();
            let g1 = &spec.components()[0].cov.spikes()[0].direction;
            let g2 = &spec.components()[1].cov.spikes()[0].direction;
            assert!((g1.dot(g2) - a).abs() < 1e-12, "a={a}");
        }
    }

    #[test]
    fn uniform_thetas_keep_traces_equal() {
        let desc = MixtureDescriptor {
            ranks: vec![4],
            theta_mode: ThetaMode::Uniform,
            ..Default::default()
        };
        let s = scaling();
        let spec = build_mixture(&desc, &s, &mut Stream::new(8)).unwrap();
        let hi = (s.n as f64).powf(s.beta);
        let t0 = spec.components()[0].cov.trace();
        for c in spec.components() {
            assert!((c.cov.trace() - t0).abs() < 1e-9);
            assert!(c
                .cov
                .spikes()
                .iter()
                .all(|sp| sp.theta > 0.0 && sp.theta < hi));
        }
    }

    #[test]
    fn means_and_validation() {
        let desc = MixtureDescriptor {
            nonzero_means: true,
            mean_norm: 2.0,
            ..Default::default()
        };
        let spec = build_mixture(&desc, &scaling(), &mut Stream::new(5)).unwrap();
        assert!((spec.components()[0].mean.dot(&spec.components()[0].mean) - 4.0).abs() < 1e-9);
        assert!(mixture_covariance(&spec).unwrap().trace > 200.0);
        let bad = MixtureDescriptor {
            mean_norm: 1.0,
            ..Default::default()
        };
        assert!(build_mixture(&bad, &scaling(), &mut Stream::new(5)).is_err());
        let bad = MixtureDescriptor {
            weights: vec![0.2, 0.3, 0.5],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
