//! The two-layer network `x ↦ wᵀσ(Fx)/√k`: initialization, the single
//! first-layer gradient step, ridge regression for the second layer, and the
//! error metrics.

mod gradient;
mod model;
mod ridge;

pub use gradient::{gradient, gradient_step, init_network, NetworkInit};
pub use model::{
    features, generalization_error, half_mse, mean_derivative, predict, predict_from_features,
    training_error, training_error_from_features, FeatureMap, TrainedNetwork,
};
pub use ridge::{ridge_dual, ridge_objective_gradient, ridge_primal, ridge_second_layer};
