use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use super::activation::ActivationKind;
use super::polynomial::{hermite_series, hermite_values, MAX_DEGREE};
use super::quadrature::QuadratureRule;
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Deficits down to this value are treated as round-off and clamped to zero.
pub const RESIDUAL_CLAMP_TOLERANCE: f64 = 1e-10;

/// Deficits below this many ulps of the second moment count as exact zeros.
const ROUNDOFF_ULPS: f64 = 64.0;

/// Polynomial-plus-noise surrogate of an activation:
/// `x ↦ Σ_{j<l} (h_j / j!) H_j(x / b) + h*_l z`, `z ~ N(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermiteActivation {
    pub degree: usize,
    /// `h_0 … h_{l−1}` with `h_j = E[H_j(z) σ(b z)]`.
    pub coeffs: Vec<f64>,
    /// `h*_l`, the standard deviation of the noise term.
    pub residual: f64,
    pub scale: f64,
    /// `h_j / j!`, the coefficients of the Hermite series.
    #[serde(skip)]
    series: Vec<f64>,
}

impl HermiteActivation {
    pub fn new(coeffs: Vec<f64>, residual: f64, scale: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("degree", "must be at least 1"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid(
                "scale_b",
                format!("must be positive, got {scale}"),
            ));
        }
        if !(residual >= 0.0 && residual.is_finite()) {
            return Err(Error::invalid(
                "residual",
                format!("must be non-negative, got {residual}"),
            ));
        }
        let mut factorial = 1.0;
        let series = coeffs
            .iter()
            .enumerate()
            .map(|(j, h)| {
                if j > 0 {
                    factorial *= j as f64;
                }
                h / factorial
            })
            .collect();
        Ok(HermiteActivation {
            degree: coeffs.len(),
            coeffs,
            residual,
            scale,
            series,
        })
    }

    /// Deterministic part `Σ_{j<l} (h_j / j!) H_j(x / b)`.
    #[inline]
    pub fn mean_part(&self, x: f64) -> f64 {
        hermite_series(&self.series, x / self.scale)
    }

    pub fn has_noise(&self) -> bool {
        self.residual > 0.0
    }

    /// `E[σ̂_l(b z)²]`: quadrature of the polynomial part plus `h*²`.
    pub fn second_moment(&self, rule: &QuadratureRule) -> f64 {
        rule.expect(|x| self.mean_part(self.scale * x).powi(2)) + self.residual * self.residual
    }

    /// Entrywise `σ̂_l` with fresh noise for every entry, drawn in row-major
    /// order. The noise stream is only touched when `h*_l > 0`.
    pub fn apply(&self, pre: ArrayView2<f64>, noise: &mut Stream) -> Result<Array2<f64>> {
        if pre.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                stage: "Hermite activation input",
            });
        }
        let mut out = pre.mapv(|x| self.mean_part(x));
        if self.has_noise() {
            for v in out.iter_mut() {
                *v += self.residual * noise.normal();
            }
        }
        Ok(out)
    }
}

/// `h_j = Σ_i w_i H_j(x_i) σ(b x_i)` for `j = 0..l`.
pub fn hermite_coefficients(
    act: &ActivationKind,
    scale: f64,
    degree: usize,
    rule: &QuadratureRule,
) -> Result<Vec<f64>> {
    check_inputs(scale, degree)?;
    if rule.order() < 4 * degree {
        return Err(Error::QuadratureTooCoarse {
            order: rule.order(),
            required: 4 * degree,
        });
    }
    let mut coeffs = vec![0.0; degree];
    let mut h = vec![0.0; degree];
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let s = act.value(scale * x);
        if !s.is_finite() {
            return Err(Error::NonFiniteActivation { node: x, value: s });
        }
        hermite_values(x, &mut h);
        for (c, hj) in coeffs.iter_mut().zip(&h) {
            *c += w * hj * s;
        }
    }
    Ok(coeffs)
}

/// `E[σ(b z)²]` by quadrature.
pub fn activation_second_moment(
    act: &ActivationKind,
    scale: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let mut total = 0.0;
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let s = act.value(scale * x);
        if !s.is_finite() {
            return Err(Error::NonFiniteActivation { node: x, value: s });
        }
        total += w * s * s;
    }
    Ok(total)
}

/// `h*_l = √(E[σ(b z)²] − Σ_{j<l} h_j² / j!)`.
pub fn residual_coefficient(
    act: &ActivationKind,
    scale: f64,
    coeffs: &[f64],
    rule: &QuadratureRule,
) -> Result<f64> {
    check_inputs(scale, coeffs.len())?;
    let second = activation_second_moment(act, scale, rule)?;
    let mut factorial = 1.0;
    let mut explained = 0.0;
    for (j, h) in coeffs.iter().enumerate() {
        if j > 0 {
            factorial *= j as f64;
        }
        explained += h * h / factorial;
    }
    let deficit = second - explained;
    if deficit < -RESIDUAL_CLAMP_TOLERANCE {
        return Err(Error::InconsistentCoefficients { deficit });
    }
    // Round-off in the subtraction would otherwise surface as noise of size √ε.
    if deficit <= ROUNDOFF_ULPS * f64::EPSILON * second {
        return Ok(0.0);
    }
    Ok(deficit.max(0.0).sqrt())
}

/// Equivalent activation of degree `l` using the default quadrature rule.
pub fn build_equivalent_activation(
    act: &ActivationKind,
    scale: f64,
    degree: usize,
) -> Result<HermiteActivation> {
    build_equivalent_activation_with(act, scale, degree, &QuadratureRule::default())
}

pub fn build_equivalent_activation_with(
    act: &ActivationKind,
    scale: f64,
    degree: usize,
    rule: &QuadratureRule,
) -> Result<HermiteActivation> {
    let coeffs = hermite_coefficients(act, scale, degree, rule)?;
    let residual = residual_coefficient(act, scale, &coeffs, rule)?;
    HermiteActivation::new(coeffs, residual, scale)
}

/// Free-function form of [`HermiteActivation::apply`].
pub fn apply_equivalent(
    act: &HermiteActivation,
    pre: ArrayView2<f64>,
    noise: &mut Stream,
) -> Result<Array2<f64>> {
    act.apply(pre, noise)
}

fn check_inputs(scale: f64, degree: usize) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(
            "scale_b",
            format!("must be positive, got {scale}"),
        ));
    }
    if degree == 0 {
        return Err(Error::invalid("degree", "must be at least 1"));
    }
    if degree > MAX_DEGREE + 1 {
        return Err(Error::DegreeTooLarge {
            degree: degree - 1,
            max: MAX_DEGREE,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn inv_sqrt_2pi() -> f64 {
        1.0 / (2.0 * PI).sqrt()
    }

    #[test]
    fn relu_coefficients_match_closed_form() {
        let c = hermite_coefficients(&ActivationKind::Relu, 1.0, 4, &QuadratureRule::default())
            .unwrap();
        let expected = [inv_sqrt_2pi(), 0.5, inv_sqrt_2pi(), 0.0];
        for (a, e) in c.iter().zip(expected) {
            assert!((a - e).abs() < 1e-8, "{c:?}");
        }
    }

    #[test]
    fn identity_has_only_linear_mode() {
        let c = hermite_coefficients(
            &ActivationKind::Identity,
            1.0,
            3,
            &QuadratureRule::default(),
        )
        .unwrap();
        assert!(c[0].abs() < 1e-12 && (c[1] - 1.0).abs() < 1e-12 && c[2].abs() < 1e-12);
    }

    #[test]
    fn tanh_even_modes_vanish() {
        let c = hermite_coefficients(&ActivationKind::Tanh, 1.0, 3, &QuadratureRule::default())
            .unwrap();
        assert!(c[0].abs() < 1e-14 && c[2].abs() < 1e-14);
        assert!(c[1] > 0.0);
    }

    #[test]
    fn coarse_rule_is_rejected() {
        let rule = QuadratureRule::gauss_hermite(10).unwrap();
        assert!(matches!(
            hermite_coefficients(&ActivationKind::Relu, 1.0, 3, &rule),
            Err(Error::QuadratureTooCoarse {
                order: 10,
                required: 12
            })
        ));
    }

    #[test]
    fn non_finite_activation_names_the_node() {
        let blowup =
            ActivationKind::polynomial(vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1e300])
                .unwrap();
        let err = hermite_coefficients(&blowup, 1.0, 2, &QuadratureRule::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteActivation { .. }));
    }

    #[test]
    fn relu_residual_at_degree_two() {
        let rule = QuadratureRule::default();
        let c = hermite_coefficients(&ActivationKind::Relu, 1.0, 2, &rule).unwrap();
        let r = residual_coefficient(&ActivationKind::Relu, 1.0, &c, &rule).unwrap();
        let expected = (0.5 - 1.0 / (2.0 * PI) - 0.25).sqrt();
        assert!((r - expected).abs() < 1e-6);
        assert!((r - 0.301405).abs() < 1e-6);
    }

    #[test]
    fn inconsistent_coefficients_are_reported() {
        let rule = QuadratureRule::default();
        let err =
            residual_coefficient(&ActivationKind::Identity, 1.0, &[0.0, 1.5], &rule).unwrap_err();
        assert!(matches!(err, Error::InconsistentCoefficients { .. }));
    }

    #[test]
    fn identity_equivalent_is_exact() {
        let act = build_equivalent_activation(&ActivationKind::Identity, 1.0, 2).unwrap();
        assert!(act.coeffs[0].abs() < 1e-12 && (act.coeffs[1] - 1.0).abs() < 1e-12);
        assert_eq!(act.residual, 0.0);
        let x = Stream::new(1).normal_matrix(3, 4);
        let y = act.apply(x.view(), &mut Stream::new(2)).unwrap();
        for (a, b) in x.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_degree_one() {
        let rule = QuadratureRule::default();
        let act = build_equivalent_activation(&ActivationKind::Sigmoid, 1.0, 1).unwrap();
        assert!((act.coeffs[0] - 0.5).abs() < 1e-12);
        let m2 = activation_second_moment(&ActivationKind::Sigmoid, 1.0, &rule).unwrap();
        assert!((act.residual - (m2 - 0.25).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn relu_degree_five() {
        let act = build_equivalent_activation(&ActivationKind::Relu, 1.0, 5).unwrap();
        // h_4 = E[(z⁴ − 6z² + 3) z⁺] = (8 − 12 + 3)/√(2π) = −1/√(2π).
        assert!((act.coeffs[4] + inv_sqrt_2pi()).abs() < 1e-8);
        assert!(act.residual >= 0.0);
    }

    #[test]
    fn noiseless_activation_ignores_the_stream() {
        let act = HermiteActivation::new(vec![0.1, 0.7, 0.2], 0.0, 0.8).unwrap();
        let x = Stream::new(5).normal_matrix(4, 6);
        let a = act.apply(x.view(), &mut Stream::new(10)).unwrap();
        let b = act.apply(x.view(), &mut Stream::new(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_scale_and_degree() {
        let rule = QuadratureRule::default();
        assert!(hermite_coefficients(&ActivationKind::Relu, 0.0, 2, &rule).is_err());
        assert!(hermite_coefficients(&ActivationKind::Relu, 1.0, 0, &rule).is_err());
        assert!(HermiteActivation::new(vec![1.0], -0.1, 1.0).is_err());
    }
}
