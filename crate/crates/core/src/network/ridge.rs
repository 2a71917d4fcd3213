use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;

fn check_shapes(phi: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64) -> Result<()> {
    if phi.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "ridge labels",
            expected: phi.nrows(),
            actual: y.len(),
        });
    }
    if phi.nrows() == 0 || phi.ncols() == 0 {
        return Err(Error::invalid("features", "must be non-empty"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(
            "lambda",
            format!("must be non-negative, got {lambda}"),
        ));
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            stage: "ridge features",
        });
    }
    Ok(())
}

fn add_diagonal(a: &mut Array2<f64>, lambda: f64) {
    a.diag_mut().mapv_inplace(|v| v + lambda);
}

/// `(ΦᵀΦ/(mk) + λI) ŵ = Φᵀy/(m√k)`.
pub fn ridge_primal(phi: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64) -> Result<Array1<f64>> {
    check_shapes(phi, y, lambda)?;
    let (m, k) = phi.dim();
    let (mf, kf) = (m as f64, k as f64);
    let mut a = phi.t().dot(&phi) / (mf * kf);
    add_diagonal(&mut a, lambda);
    let rhs = phi.t().dot(&y) / (mf * kf.sqrt());
    cholesky_solve(a.view(), rhs.view(), "ridge normal equations")
}

/// `ŵ = Φᵀ(ΦΦᵀ/(mk) + λI)⁻¹ y/(m√k)`.
pub fn ridge_dual(phi: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64) -> Result<Array1<f64>> {
    check_shapes(phi, y, lambda)?;
    let (m, k) = phi.dim();
    let (mf, kf) = (m as f64, k as f64);
    let mut a = phi.dot(&phi.t()) / (mf * kf);
    add_diagonal(&mut a, lambda);
    let alpha = cholesky_solve(a.view(), y, "ridge dual system")?;
    Ok(phi.t().dot(&alpha) / (mf * kf.sqrt()))
}

/// Minimizer of `(1/2m) Σ (y_i − wᵀφ_i/√k)² + (λ/2)‖w‖²`; primal form when
/// `k ≤ m`, dual otherwise.
pub fn ridge_second_layer(
    phi: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
) -> Result<Array1<f64>> {
    if phi.ncols() <= phi.nrows() {
        ridge_primal(phi, y, lambda)
    } else {
        ridge_dual(phi, y, lambda)
    }
}

/// Gradient of the ridge objective at `w`.
pub fn ridge_objective_gradient(
    phi: ArrayView2<f64>,
    y: ArrayView1<f64>,
    w: ArrayView1<f64>,
    lambda: f64,
) -> Array1<f64> {
    let (m, k) = phi.dim();
    let sk = (k as f64).sqrt();
    let resid = &y - &(phi.dot(&w) / sk);
    phi.t().dot(&resid) * (-1.0 / (m as f64 * sk)) + &w * lambda
}
