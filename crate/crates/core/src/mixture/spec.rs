use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::hermite::ActivationKind;
use crate::linalg::{norm, orthonormal_basis, symmetric_eigen, Independence};
use crate::rng::Stream;

/// Largest dimension for which an ill-conditioned span falls back to a dense
/// eigenproblem.
pub const DENSE_FALLBACK_MAX: usize = 2048;

/// Ratio `‖μ_c‖² / ‖Σ‖` above which non-zero means are reported.
pub const MEAN_RATIO_WARNING: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: Array1<f64>,
    pub cov: CovarianceSpec,
}

impl Component {
    pub fn centered(weight: f64, cov: CovarianceSpec) -> Self {
        let n = cov.dim();
        Component {
            weight,
            mean: Array1::zeros(n),
            cov,
        }
    }
}

/// `x ∼ Σ_c ρ_c N(μ_c, Σ_c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    components: Vec<Component>,
    nonzero_means: bool,
}

impl MixtureSpec {
    pub fn new(components: Vec<Component>, nonzero_means: bool) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::invalid("components", "need at least one"))?;
        let n = first.cov.dim();
        let mut total = 0.0;
        for c in &components {
            if c.cov.dim() != n {
                return Err(Error::DimensionMismatch {
                    context: "component covariance",
                    expected: n,
                    actual: c.cov.dim(),
                });
            }
            if c.mean.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "component mean",
                    expected: n,
                    actual: c.mean.len(),
                });
            }
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(Error::invalid(
                    "weights",
                    format!("each weight must lie in (0, 1], got {}", c.weight),
                ));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "weights",
                format!("must sum to 1, got {total}"),
            ));
        }
        let spec = MixtureSpec {
            components,
            nonzero_means,
        };
        if nonzero_means {
            let cov = mixture_covariance(&spec)?;
            for (i, c) in spec.components.iter().enumerate() {
                let ratio = c.mean.dot(&c.mean) / cov.spectral_norm;
                if ratio > MEAN_RATIO_WARNING {
                    log::warn!(
                        "component {}: |mu|^2 / |Sigma| = {ratio:.3} exceeds {MEAN_RATIO_WARNING}",
                        i + 1
                    );
                }
            }
        } else {
            if spec
                .components
                .iter()
                .any(|c| c.mean.iter().any(|&v| v != 0.0))
            {
                return Err(Error::invalid(
                    "means",
                    "non-zero means need the nonzero_means flag",
                ));
            }
            let t0 = first_trace(&spec);
            for c in &spec.components {
                let t = c.cov.trace();
                if (t - t0).abs() > 1e-9 * t0 {
                    return Err(Error::invalid(
                        "mixture",
                        format!(
                            "component traces must be equal without nonzero_means ({t0} vs {t})"
                        ),
                    ));
                }
            }
        }
        Ok(spec)
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].cov.dim()
    }

    pub fn nonzero_means(&self) -> bool {
        self.nonzero_means
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    /// `μ̄ = Σ_c ρ_c μ_c`.
    pub fn mean(&self) -> Array1<f64> {
        let mut m = Array1::zeros(self.dim());
        for c in &self.components {
            m.scaled_add(c.weight, &c.mean);
        }
        m
    }

    /// Dense `Σ = Σ_c ρ_c (Σ_c + μ_c μ_cᵀ) − μ̄ μ̄ᵀ`.
    pub fn dense_covariance(&self) -> Array2<f64> {
        let n = self.dim();
        let mut s = Array2::<f64>::eye(n);
        for c in &self.components {
            for sp in c.cov.spikes() {
                add_outer(&mut s, c.weight * sp.theta, sp.direction.view());
            }
            add_outer(&mut s, c.weight, c.mean.view());
        }
        add_outer(&mut s, -1.0, self.mean().view());
        s
    }
}

fn first_trace(spec: &MixtureSpec) -> f64 {
    spec.components[0].cov.trace()
}

fn add_outer(m: &mut Array2<f64>, scale: f64, v: ArrayView1<f64>) {
    if scale == 0.0 {
        return;
    }
    let col = v.insert_axis(Axis(1));
    m.scaled_add(scale, &col.dot(&col.t()));
}

/// Spectral summary of the mixture covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixtureCovariance {
    pub spectral_norm: f64,
    pub trace: f64,
    pub sqrt_spectral_norm: f64,
}

/// `‖Σ‖` and `Tr Σ` of the mixture covariance.
///
/// `Σ − I` lives in the span of all spikes and means, so its eigenvalues come
/// from a small eigenproblem in an orthonormal basis of that span.
pub fn mixture_covariance(spec: &MixtureSpec) -> Result<MixtureCovariance> {
    let n = spec.dim();
    let mu_bar = spec.mean();
    let mut trace = n as f64 - mu_bar.dot(&mu_bar);
    let mut generators: Vec<Array1<f64>> = Vec::new();
    for c in spec.components() {
        for sp in c.cov.spikes() {
            trace += c.weight * sp.theta;
            generators.push(sp.direction.clone());
        }
        trace += c.weight * c.mean.dot(&c.mean);
        if c.mean.iter().any(|&v| v != 0.0) {
            generators.push(c.mean.clone());
        }
    }
    let (basis, status) = orthonormal_basis(&generators);
    let top = if status.contains(&Independence::IllConditioned) {
        if n > DENSE_FALLBACK_MAX {
            return Err(Error::DenseFallbackTooLarge {
                n,
                max: DENSE_FALLBACK_MAX,
            });
        }
        let (vals, _) = symmetric_eigen(spec.dense_covariance().view());
        vals[n - 1]
    } else if basis.is_empty() {
        1.0
    } else {
        let r = basis.len();
        let mut restricted = Array2::<f64>::zeros((r, r));
        let mut add = |scale: f64, v: ArrayView1<f64>| {
            let coords = Array1::from_iter(basis.iter().map(|q| q.dot(&v)));
            for i in 0..r {
                for j in 0..r {
                    restricted[[i, j]] += scale * coords[i] * coords[j];
                }
            }
        };
        for c in spec.components() {
            for sp in c.cov.spikes() {
                add(c.weight * sp.theta, sp.direction.view());
            }
            add(c.weight, c.mean.view());
        }
        add(-1.0, mu_bar.view());
        let (vals, _) = symmetric_eigen(restricted.view());
        1.0 + vals[r - 1].max(0.0)
    };
    Ok(MixtureCovariance {
        spectral_norm: top,
        trace,
        sqrt_spectral_norm: top.sqrt(),
    })
}

/// Inputs with their labels and 1-based component indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub comp: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Rows `idx` in the given order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), idx),
            y: self.y.select(Axis(0), idx),
            comp: idx.iter().map(|&i| self.comp[i]).collect(),
        }
    }
}

/// Draws `m` inputs. Per row: the component from `categorical(ρ)`, then `n`
/// standard normals mapped through `μ_c + Σ_c^{1/2} z`. Labels are left at 0.
pub fn sample_batch(spec: &MixtureSpec, m: usize, stream: &mut Stream) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::invalid("m", "batch size must be positive"));
    }
    let n = spec.dim();
    let weights = spec.weights();
    let mut x = Array2::<f64>::zeros((m, n));
    let mut comp = Vec::with_capacity(m);
    for mut row in x.rows_mut() {
        let c = stream.categorical(&weights);
        for v in row.iter_mut() {
            *v = stream.normal();
        }
        let component = &spec.components[c];
        for sp in component.cov.spikes() {
            let coef = ((1.0 + sp.theta).sqrt() - 1.0) * sp.direction.dot(&row);
            row.scaled_add(coef, &sp.direction);
        }
        row += &component.mean;
        comp.push(c + 1);
    }
    Ok(Dataset {
        x,
        y: Array1::zeros(m),
        comp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum XiMode {
    #[default]
    RandomDirection,
    SpikeAligned,
}

/// Target direction with `‖ξ‖ = C / ‖Σ^{1/2}‖`.
pub fn build_xi(
    spec: &MixtureSpec,
    mode: XiMode,
    c: f64,
    stream: &mut Stream,
) -> Result<Array1<f64>> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("c", format!("must be positive, got {c}")));
    }
    let n = spec.dim();
    let direction = match mode {
        XiMode::RandomDirection => stream.normal_vec(n),
        XiMode::SpikeAligned => {
            let mut sum = Array1::zeros(n);
            for (i, comp) in spec.components().iter().take(2).enumerate() {
                let sp = comp
                    .cov
                    .spikes()
                    .first()
                    .ok_or(Error::MissingSpike { component: i + 1 })?;
                sum += &sp.direction;
            }
            sum
        }
    };
    let len = norm(direction.view());
    if !(len > 0.0) {
        return Err(Error::invalid("xi", "target direction has zero length"));
    }
    let cov = mixture_covariance(spec)?;
    Ok(direction * (c / (len * cov.sqrt_spectral_norm)))
}

#[derive(Debug, Clone, PartialEq)]
pub enum LabelKind {
    SingleIndex(ActivationKind),
    ClassSign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub xi: Array1<f64>,
    pub kind: LabelKind,
}

/// `y = σ*(ξᵀx)` or `y = 2c − 3`.
pub fn label(target: &TargetSpec, x: ArrayView2<f64>, comp: &[usize]) -> Result<Array1<f64>> {
    match &target.kind {
        LabelKind::SingleIndex(act) => {
            if target.xi.len() != x.ncols() {
                return Err(Error::DimensionMismatch {
                    context: "target direction",
                    expected: x.ncols(),
                    actual: target.xi.len(),
                });
            }
            Ok(x.dot(&target.xi).mapv(|s| act.value(s)))
        }
        LabelKind::ClassSign => {
            if comp.len() != x.nrows() {
                return Err(Error::DimensionMismatch {
                    context: "component indices",
                    expected: x.nrows(),
                    actual: comp.len(),
                });
            }
            if let Some(&bad) = comp.iter().find(|&&c| c != 1 && c != 2) {
                return Err(Error::ClassSignComponents(bad));
            }
            Ok(Array1::from_iter(
                comp.iter().map(|&c| 2.0 * c as f64 - 3.0),
            ))
        }
    }
}

/// Labels `ds` in place.
pub fn label_dataset(target: &TargetSpec, ds: &mut Dataset) -> Result<()> {
    ds.y = label(target, ds.x.view(), &ds.comp)?;
    Ok(())
}

/// `η = n^{βα}` and spike scale `n^{β(1−α)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
}

impl ScalingSpec {
    pub fn new(alpha: f64, beta: f64, n: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(
                "alpha",
                format!("must lie in [0, 1], got {alpha}"),
            ));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::invalid(
                "beta",
                format!("must lie in [0, 1], got {beta}"),
            ));
        }
        if n == 0 {
            return Err(Error::invalid("n", "must be positive"));
        }
        Ok(ScalingSpec { alpha, beta, n })
    }

    pub fn eta(&self) -> f64 {
        (self.n as f64).powf(self.beta * self.alpha)
    }

    pub fn spike_scale(&self) -> f64 {
        (self.n as f64).powf(self.beta * (1.0 - self.alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::covariance::Spike;
    use ndarray::array;

    fn e(n: usize, i: usize) -> Array1<f64> {
        let mut v = Array1::zeros(n);
        v[i] = 1.0;
        v
    }

    fn spiked(n: usize, theta: f64, dir: Array1<f64>) -> CovarianceSpec {
        CovarianceSpec::new(
            n,
            vec![Spike {
                theta,
                direction: dir,
            }],
        )
        .unwrap()
    }

    #[test]
    fn covariance_single_spike() {
        let spec = MixtureSpec::new(
            vec![Component::centered(1.0, spiked(10, 4.0, e(10, 3)))],
            false,
        )
        .unwrap();
        let c = mixture_covariance(&spec).unwrap();
        assert!((c.spectral_norm - 5.0).abs() < 1e-12);
        assert!((c.trace - 14.0).abs() < 1e-12);
        assert!((c.sqrt_spectral_norm - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn covariance_orthogonal_and_shared_spikes() {
        let n = 8;
        let orth = MixtureSpec::new(
            vec![
                Component::centered(0.5, spiked(n, 4.0, e(n, 0))),
                Component::centered(0.5, spiked(n, 4.0, e(n, 1))),
            ],
            false,
        )
        .unwrap();
        assert!((mixture_covariance(&orth).unwrap().spectral_norm - 3.0).abs() < 1e-12);
        let shared = MixtureSpec::new(
            vec![
                Component::centered(0.5, spiked(n, 4.0, e(n, 0))),
                Component::centered(0.5, spiked(n, 4.0, e(n, 0))),
            ],
            false,
        )
        .unwrap();
        assert!((mixture_covariance(&shared).unwrap().spectral_norm - 5.0).abs() < 1e-12);
    }

    #[test]
    fn covariance_matches_dense_with_means() {
        let n = 12;
        let mut s = Stream::new(3);
        let a = s.normal_vec(n);
        let a = &a / norm(a.view());
        let b = s.normal_vec(n);
        let b = &b / norm(b.view());
        let spec = MixtureSpec::new(
            vec![
                Component {
                    weight: 0.3,
                    mean: s.normal_vec(n),
                    cov: spiked(n, 2.0, a),
                },
                Component {
                    weight: 0.7,
                    mean: s.normal_vec(n),
                    cov: spiked(n, 5.0, b),
                },
            ],
            true,
        )
        .unwrap();
        let fast = mixture_covariance(&spec).unwrap();
        let dense = spec.dense_covariance();
        let (vals, _) = symmetric_eigen(dense.view());
        assert!((fast.spectral_norm - vals[n - 1]).abs() < 1e-9);
        assert!((fast.trace - dense.diag().sum()).abs() < 1e-9);
    }

    #[test]
    fn validation() {
        let n = 4;
        let id = CovarianceSpec::identity(n);
        assert!(MixtureSpec::new(vec![Component::centered(0.6, id.clone())], false).is_err());
        assert!(MixtureSpec::new(
            vec![
                Component::centered(0.5, id.clone()),
                Component::centered(0.5, spiked(n, 1.0, e(n, 0)))
            ],
            false
        )
        .is_err());
        let shifted = Component {
            weight: 1.0,
            mean: array![1.0, 0.0, 0.0, 0.0],
            cov: id,
        };
        assert!(MixtureSpec::new(vec![shifted.clone()], false).is_err());
        assert!(MixtureSpec::new(vec![shifted], true).is_ok());
    }

    #[test]
    fn sampling_identity_moments() {
        let n = 16;
        let m = 100_000;
        let spec = MixtureSpec::new(
            vec![Component::centered(1.0, CovarianceSpec::identity(n))],
            false,
        )
        .unwrap();
        let ds = sample_batch(&spec, m, &mut Stream::new(1)).unwrap();
        let mean = ds.x.mean_axis(Axis(0)).unwrap();
        let se = (1.0 / m as f64).sqrt();
        assert!(mean.iter().all(|v| v.abs() < 4.0 * se));
        let cov = ds.x.t().dot(&ds.x) / m as f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                let se = ((1.0 + target * target) / m as f64).sqrt();
                assert!(
                    (cov[[i, j]] - target).abs() < 4.0 * se,
                    "({i},{j}) {}",
                    cov[[i, j]]
                );
            }
        }
    }

    #[test]
    fn sampling_frequencies_and_determinism() {
        let n = 6;
        let spec = MixtureSpec::new(
            vec![
                Component::centered(0.5, spiked(n, 3.0, e(n, 0))),
                Component::centered(0.5, spiked(n, 3.0, e(n, 1))),
            ],
            false,
        )
        .unwrap();
        let m = 20_000;
        let a = sample_batch(&spec, m, &mut Stream::new(9)).unwrap();
        let b = sample_batch(&spec, m, &mut Stream::new(9)).unwrap();
        assert_eq!(a, b);
        let ones = a.comp.iter().filter(|&&c| c == 1).count() as f64;
        let sd = (m as f64 * 0.25).sqrt();
        assert!((ones - 0.5 * m as f64).abs() < 3.0 * sd);
        assert!(a.comp.iter().all(|&c| c == 1 || c == 2));
    }

    #[test]
    fn xi_norms() {
        let n = 10;
        let iso = MixtureSpec::new(
            vec![Component::centered(1.0, CovarianceSpec::identity(n))],
            false,
        )
        .unwrap();
        let xi = build_xi(&iso, XiMode::RandomDirection, 1.0, &mut Stream::new(2)).unwrap();
        assert!((norm(xi.view()) - 1.0).abs() < 1e-12);
        let one = MixtureSpec::new(
            vec![Component::centered(1.0, spiked(n, 3.0, e(n, 2)))],
            false,
        )
        .unwrap();
        for mode in [XiMode::RandomDirection, XiMode::SpikeAligned] {
            let xi = build_xi(&one, mode, 1.0, &mut Stream::new(2)).unwrap();
            assert!((norm(xi.view()) - 0.5).abs() < 1e-12);
        }
        assert!(matches!(
            build_xi(&iso, XiMode::SpikeAligned, 1.0, &mut Stream::new(2)),
            Err(Error::MissingSpike { component: 1 })
        ));
    }

    #[test]
    fn spike_aligned_xi_is_along_the_spike_sum() {
        let n = 8;
        let spec = MixtureSpec::new(
            vec![
                Component::centered(0.5, spiked(n, 4.0, e(n, 0))),
                Component::centered(0.5, spiked(n, 4.0, e(n, 1))),
            ],
            false,
        )
        .unwrap();
        let xi = build_xi(&spec, XiMode::SpikeAligned, 1.0, &mut Stream::new(0)).unwrap();
        assert!((xi[0] - xi[1]).abs() < 1e-15 && xi[0] > 0.0);
        assert!(xi.iter().skip(2).all(|&v| v == 0.0));
    }

    #[test]
    fn labels() {
        let x = array![[2.0, 5.0], [-1.0, 3.0], [0.5, 0.0]];
        let relu = TargetSpec {
            xi: array![1.0, 0.0],
            kind: LabelKind::SingleIndex(ActivationKind::Relu),
        };
        assert_eq!(
            label(&relu, x.view(), &[1, 1, 1]).unwrap(),
            array![2.0, 0.0, 0.5]
        );
        let cls = TargetSpec {
            xi: array![0.0, 0.0],
            kind: LabelKind::ClassSign,
        };
        assert_eq!(
            label(&cls, x.view(), &[1, 2, 2]).unwrap(),
            array![-1.0, 1.0, 1.0]
        );
        assert!(matches!(
            label(&cls, x.view(), &[1, 3, 2]),
            Err(Error::ClassSignComponents(3))
        ));
        let zero = TargetSpec {
            xi: array![0.0, 0.0],
            kind: LabelKind::SingleIndex(ActivationKind::Identity),
        };
        assert!(label(&zero, x.view(), &[1, 1, 1])
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn scaling_product() {
        for (a, b, n) in [(0.0, 0.74, 500), (0.5, 0.5, 1024), (1.0, 0.3, 77)] {
            let s = ScalingSpec::new(a, b, n).unwrap();
            let target = (n as f64).powf(b);
            assert!((s.eta() * s.spike_scale() - target).abs() <= 1e-9 * target);
        }
        assert!(ScalingSpec::new(1.5, 0.5, 10).is_err());
    }
}
