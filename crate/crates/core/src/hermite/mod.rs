//! Hermite machinery: probabilists' Hermite polynomials, the activation
//! functions, Hermite coefficients by quadrature, and the polynomial-plus-noise
//! equivalent activation built from them.

mod activation;
mod equivalent;
mod polynomial;
mod quadrature;

pub use activation::ActivationKind;
pub use equivalent::{
    activation_second_moment, apply_equivalent, build_equivalent_activation,
    build_equivalent_activation_with, hermite_coefficients, residual_coefficient,
    HermiteActivation, RESIDUAL_CLAMP_TOLERANCE,
};
pub use polynomial::{hermite_eval, hermite_series, hermite_values, MAX_DEGREE};
pub use quadrature::{QuadratureRule, DEFAULT_ORDER, MAX_ORDER};
