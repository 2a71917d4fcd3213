use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermite::{ActivationKind, QuadratureRule};
use crate::linalg::{
    cholesky_solve, norm, orthonormal_basis, spectral_norm, symmetric_eigen, SpectralNorm,
};
use crate::mixture::CovarianceSpec;
use crate::network::mean_derivative;

pub const POWER_TOLERANCE: f64 = 1e-6;
pub const POWER_MAX_ITER: usize = 500;

/// Smallest eigenvalue of the column-normalized Gram matrix of `Γ` accepted
/// as full rank.
pub const COLLINEARITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionNorms {
    pub u: f64,
    pub v: f64,
    pub delta: SpectralNorm,
}

/// `G = u vᵀ + Δ` with `u = h̃₁ w`, `v = X̃ᵀỹ/(m√k)`.
#[derive(Debug, Clone)]
pub struct GradientDecomposition {
    pub h1_tilde: f64,
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    pub delta: Array2<f64>,
    pub norms: DecompositionNorms,
}

impl GradientDecomposition {
    /// `u vᵀ + Δ`.
    pub fn reconstruct(&self) -> Array2<f64> {
        outer(self.u.view(), self.v.view()) + &self.delta
    }
}

pub(crate) fn outer(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    a.insert_axis(Axis(1)).dot(&b.insert_axis(Axis(0)))
}

pub fn spike_bulk_decompose(
    g: ArrayView2<f64>,
    w: ArrayView1<f64>,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    act: &ActivationKind,
) -> Result<GradientDecomposition> {
    let (k, n) = g.dim();
    let m = x.nrows();
    if w.len() != k {
        return Err(Error::DimensionMismatch {
            context: "second layer",
            expected: k,
            actual: w.len(),
        });
    }
    if x.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "gradient batch",
            expected: n,
            actual: x.ncols(),
        });
    }
    if y.len() != m {
        return Err(Error::DimensionMismatch {
            context: "gradient labels",
            expected: m,
            actual: y.len(),
        });
    }
    let h1_tilde = mean_derivative(act, &QuadratureRule::default());
    let u = &w * h1_tilde;
    let v = x.t().dot(&y) / (m as f64 * (k as f64).sqrt());
    let delta = &g - &outer(u.view(), v.view());
    let dn = spectral_norm(delta.view(), POWER_TOLERANCE, POWER_MAX_ITER);
    if !dn.converged {
        log::warn!(
            "power iteration for the bulk norm stopped after {} iterations (relative change {:e})",
            dn.iterations,
            dn.residual
        );
    }
    let norms = DecompositionNorms {
        u: norm(u.view()),
        v: norm(v.view()),
        delta: dn,
    };
    Ok(GradientDecomposition {
        h1_tilde,
        u,
        v,
        delta,
        norms,
    })
}

/// `Γ_c = [v, γ_{c,1}, …, γ_{c,d_c}]` with the pieces needed to split inputs.
#[derive(Debug, Clone)]
pub struct StructureBasis {
    /// `Γ_c`, n × (d_c + 1).
    pub gamma: Array2<f64>,
    /// Orthonormal basis of the column span, n × (d_c + 1).
    q: Array2<f64>,
}

impl StructureBasis {
    pub fn new(v: ArrayView1<f64>, cov: &CovarianceSpec) -> Result<Self> {
        let n = cov.dim();
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                context: "structure vector",
                expected: n,
                actual: v.len(),
            });
        }
        let mut cols = vec![v.to_owned()];
        cols.extend(cov.spikes().iter().map(|s| s.direction.clone()));
        let r = cols.len();
        let mut gamma = Array2::zeros((n, r));
        for (j, c) in cols.iter().enumerate() {
            gamma.column_mut(j).assign(c);
        }
        let mut normalized = gamma.clone();
        for mut c in normalized.columns_mut() {
            let len = norm(c.view());
            if len == 0.0 {
                return Err(Error::RankDeficient {
                    context: "structure basis (zero column)",
                });
            }
            c /= len;
        }
        let (vals, _) = symmetric_eigen(normalized.t().dot(&normalized).view());
        if vals[0] < COLLINEARITY_TOLERANCE {
            return Err(Error::RankDeficient {
                context: "structure basis",
            });
        }
        let (basis, _) = orthonormal_basis(&cols);
        if basis.len() != r {
            return Err(Error::RankDeficient {
                context: "structure basis",
            });
        }
        let mut q = Array2::zeros((n, r));
        for (j, b) in basis.iter().enumerate() {
            q.column_mut(j).assign(b);
        }
        Ok(StructureBasis { gamma, q })
    }

    pub fn dim(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn rank(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn orthonormal(&self) -> ArrayView2<'_, f64> {
        self.q.view()
    }

    /// `κ = (ΓᵀΓ)⁻¹ Γᵀ z`.
    pub fn coordinates(&self, z: ArrayView1<f64>) -> Result<Array1<f64>> {
        let gram = self.gamma.t().dot(&self.gamma);
        cholesky_solve(
            gram.view(),
            self.gamma.t().dot(&z).view(),
            "structure coordinates",
        )
    }

    /// `Γ κ`.
    pub fn embed(&self, kappa: ArrayView1<f64>) -> Array1<f64> {
        self.gamma.dot(&kappa)
    }

    /// `z − P_Γ z`.
    pub fn project_out(&self, z: ArrayView1<f64>) -> Array1<f64> {
        &z - &self.q.dot(&self.q.t().dot(&z))
    }

    /// Row-wise `z − P_Γ z`.
    pub fn project_out_rows(&self, z: ArrayView2<f64>) -> Array2<f64> {
        &z - &z.dot(&self.q).dot(&self.q.t())
    }
}

/// Structure and bulk parts of one whitened input.
#[derive(Debug, Clone)]
pub struct StructureBulkSplit {
    pub gamma: Array2<f64>,
    pub kappa: Array1<f64>,
    pub z_perp: Array1<f64>,
    /// `a = F̂ Σ_c^{1/2} Γ_c κ_c`.
    pub a_struct: Array1<f64>,
    /// `F⊥ = F + ηΔ`.
    pub f_perp: Array2<f64>,
}

/// `F⊥ = F + ηΔ`.
pub fn bulk_operator(f: ArrayView2<f64>, eta_delta: ArrayView2<f64>) -> Array2<f64> {
    &f + &eta_delta
}

/// `z = Γκ + z⊥` and `F̂ Σ_c^{1/2} z = F⊥ z⊥ + a`.
pub fn structure_bulk_split(
    f_hat: ArrayView2<f64>,
    f_perp: ArrayView2<f64>,
    cov: &CovarianceSpec,
    v: ArrayView1<f64>,
    z: ArrayView1<f64>,
) -> Result<StructureBulkSplit> {
    let basis = StructureBasis::new(v, cov)?;
    split_with_basis(&basis, f_hat, f_perp, cov, z)
}

pub fn split_with_basis(
    basis: &StructureBasis,
    f_hat: ArrayView2<f64>,
    f_perp: ArrayView2<f64>,
    cov: &CovarianceSpec,
    z: ArrayView1<f64>,
) -> Result<StructureBulkSplit> {
    if z.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            context: "whitened input",
            expected: basis.dim(),
            actual: z.len(),
        });
    }
    let kappa = basis.coordinates(z)?;
    let structure = basis.embed(kappa.view());
    let z_perp = &z - &structure;
    let a_struct = f_hat.dot(&cov.sqrt_apply(structure.view()));
    Ok(StructureBulkSplit {
        gamma: basis.gamma.clone(),
        kappa,
        z_perp,
        a_struct,
        f_perp: f_perp.to_owned(),
    })
}
